//! Repeated-trial spike counting and the statistics used to judge whether
//! the counts look Poissonian: sample moments, Poisson MLE, Fano factor,
//! histograms and a Pearson chi-square goodness-of-fit test.

mod special;

pub use special::{chi_square_sf, gamma_q, ln_gamma};

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{bin_probability, EncodingConfig, Generator, PROBABILITY_SLACK};
use crate::rng::RngStream;
use crate::spike_gen::{bernoulli_bins, generate_isi_train, SpikeGenError};

/// Smallest expected frequency a chi-square cell may have after merging.
pub const MIN_EXPECTED: f64 = 5.0;
/// Fewest trials for which [`poisson_gof`] is attempted.
pub const MIN_GOF_TRIALS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error(transparent)]
    SpikeGen(#[from] SpikeGenError),
    #[error("need at least {needed} trials, got {got}")]
    TooFewTrials { needed: usize, got: usize },
    #[error("mean count is zero; the Fano factor is undefined")]
    ZeroMean,
    #[error("histogram bin width must be at least 1")]
    InvalidBinWidth,
    #[error("rate {rate_hz} Hz gives a per-bin probability above 1 at delta_t {delta_t_ms} ms")]
    RateTooHigh { rate_hz: f64, delta_t_ms: f64 },
    #[error("chi-square test needs at least {needed} cells after merging, got {got}")]
    DegenerateFit { needed: usize, got: usize },
    #[error("observed and expected frequency vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("trial count {count} exceeds the {bins} available bins")]
    CountExceedsBins { count: u64, bins: usize },
}

/// Spike counts from `k` independent trials of one generator setting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCounts {
    pub counts: Vec<u64>,
    /// Bins per trial. Bernoulli counts never exceed it; ISI counts are raw
    /// event counts and are not bounded by it.
    pub bins: usize,
    pub rate_hz: f64,
    pub generator: Generator,
}

impl TrialCounts {
    /// Wraps externally produced Bernoulli-style counts, checking each is at
    /// most `bins`.
    pub fn from_counts(counts: Vec<u64>, bins: usize) -> Result<Self, StatsError> {
        if let Some(&count) = counts.iter().find(|&&c| c > bins as u64) {
            return Err(StatsError::CountExceedsBins { count, bins });
        }
        Ok(Self {
            counts,
            bins,
            rate_hz: f64::NAN,
            generator: Generator::BernoulliBinning,
        })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }
}

/// Runs the configured generator `k` times at `rate_hz` and counts spikes.
///
/// Trial `t` draws from `RngStream(config.master_seed, t, 0)`. Bernoulli
/// trials use per-bin probability `rate * dt` over `M` bins; ISI trials count
/// every event in the continuous window, so their counts follow the Poisson
/// law exactly rather than its binned approximation.
pub fn trial_counts(
    rate_hz: f64,
    config: &EncodingConfig,
    k: usize,
) -> Result<TrialCounts, StatsError> {
    let grid = config.validate().map_err(SpikeGenError::from)?;
    if k < 2 {
        return Err(StatsError::TooFewTrials { needed: 2, got: k });
    }
    if !(rate_hz.is_finite() && rate_hz >= 0.0) {
        return Err(SpikeGenError::InvalidRate(rate_hz).into());
    }
    let trial = |t: usize| -> Result<u64, StatsError> {
        let mut rng = RngStream::new(config.master_seed, t as u32, 0);
        Ok(match config.generator {
            Generator::BernoulliBinning => {
                let p = bin_probability(rate_hz, grid.delta_t_us);
                bernoulli_bins(p, grid.bins, &mut rng)
                    .filter(|&b| b)
                    .count() as u64
            }
            Generator::ExponentialIsi => {
                generate_isi_train(rate_hz, config.simulation_time_ms, &mut rng)?.len() as u64
            }
        })
    };
    if config.generator == Generator::BernoulliBinning
        && rate_hz * grid.delta_t_us as f64 / 1e6 > 1.0 + PROBABILITY_SLACK
    {
        return Err(StatsError::RateTooHigh {
            rate_hz,
            delta_t_ms: config.delta_t_ms,
        });
    }
    let counts = (0..k).map(trial).collect::<Result<_, _>>()?;
    Ok(TrialCounts {
        counts,
        bins: grid.bins,
        rate_hz,
        generator: config.generator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub k: usize,
    pub mean: f64,
    /// Unbiased sample variance (divisor `k - 1`).
    pub variance: f64,
    /// Poisson maximum-likelihood rate estimate; equals `mean`.
    pub lambda_hat: f64,
    pub fano: f64,
}

impl TrialSummary {
    pub const CSV_HEADER: &'static str = "k,mean,variance,lambda_hat,fano";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.k, self.mean, self.variance, self.lambda_hat, self.fano
        )
    }
}

pub fn fano_factor(mean: f64, variance: f64) -> Result<f64, StatsError> {
    if mean == 0.0 {
        return Err(StatsError::ZeroMean);
    }
    Ok(variance / mean)
}

pub fn summarize(counts: &[u64]) -> Result<TrialSummary, StatsError> {
    let k = counts.len();
    if k < 2 {
        return Err(StatsError::TooFewTrials { needed: 2, got: k });
    }
    let n = k as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let variance = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(TrialSummary {
        k,
        mean,
        variance,
        lambda_hat: mean,
        fano: fano_factor(mean, variance)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramBin {
    /// Inclusive lower edge; the bin covers `[lower, lower + width)`.
    pub lower: u64,
    pub frequency: usize,
}

/// Integer histogram with bins `[min + i*w, min + (i+1)*w)` covering
/// `[min, max]`.
pub fn histogram(counts: &[u64], bin_width: u64) -> Result<Vec<HistogramBin>, StatsError> {
    if bin_width == 0 {
        return Err(StatsError::InvalidBinWidth);
    }
    let (Some(&min), Some(&max)) = (counts.iter().min(), counts.iter().max()) else {
        return Ok(Vec::new());
    };
    let n_bins = ((max - min) / bin_width + 1) as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lower: min + i as u64 * bin_width,
            frequency: 0,
        })
        .collect();
    for &c in counts {
        bins[((c - min) / bin_width) as usize].frequency += 1;
    }
    Ok(bins)
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("lower_edge,frequency\n");
    for b in bins {
        let _ = writeln!(out, "{},{}", b.lower, b.frequency);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed vs expected frequencies, with
/// `df = cells - 1 - fitted_params`.
pub fn pearson_chi_square(
    observed: &[f64],
    expected: &[f64],
    fitted_params: usize,
) -> Result<GofResult, StatsError> {
    if observed.len() != expected.len() {
        return Err(StatsError::LengthMismatch(observed.len(), expected.len()));
    }
    let needed = fitted_params + 2;
    if observed.len() < needed {
        return Err(StatsError::DegenerateFit {
            needed,
            got: observed.len(),
        });
    }
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum::<f64>();
    let df = observed.len() - 1 - fitted_params;
    Ok(GofResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64),
    })
}

/// Poisson cells before merging: expected and observed frequencies for
/// `n = 0, 1, ..., n_max - 1`, then one open tail cell `n >= n_max`.
/// Expected frequencies sum to `k` up to rounding.
pub fn poisson_cells(counts: &[u64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let k = counts.len() as f64;
    let max_obs = counts.iter().copied().max().unwrap_or(0);
    let n_max = max_obs.max((lambda + 12.0 * lambda.sqrt() + 12.0).ceil() as u64) + 1;
    let ln_lambda = lambda.ln();
    let pmf = |n: u64| (n as f64 * ln_lambda - lambda - ln_gamma(n as f64 + 1.0)).exp();

    let mut expected: Vec<f64> = (0..n_max).map(|n| k * pmf(n)).collect();
    let mut tail = 0.0;
    let mut n = n_max;
    loop {
        let term = pmf(n);
        tail += term;
        if term < 1e-20 || n > n_max + 10_000 {
            break;
        }
        n += 1;
    }
    expected.push(k * tail);

    let mut observed = vec![0.0; expected.len()];
    for &c in counts {
        observed[c.min(n_max) as usize] += 1.0;
    }
    (expected, observed)
}

/// Greedy left-to-right merge so every cell has expected frequency at least
/// `min_expected`; a short remainder joins the last full cell.
pub fn merge_cells(expected: &[f64], observed: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut exp_out = Vec::new();
    let mut obs_out = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (&e, &o) in expected.iter().zip(observed) {
        e_acc += e;
        o_acc += o;
        if e_acc >= min_expected {
            exp_out.push(e_acc);
            obs_out.push(o_acc);
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match (exp_out.last_mut(), obs_out.last_mut()) {
            (Some(e), Some(o)) => {
                *e += e_acc;
                *o += o_acc;
            }
            _ => {
                exp_out.push(e_acc);
                obs_out.push(o_acc);
            }
        }
    }
    (exp_out, obs_out)
}

/// Chi-square test of the counts against Poisson(lambda_hat), with lambda
/// estimated from the data (`df = cells - 2`).
pub fn poisson_gof(counts: &[u64]) -> Result<GofResult, StatsError> {
    if counts.len() < MIN_GOF_TRIALS {
        return Err(StatsError::TooFewTrials {
            needed: MIN_GOF_TRIALS,
            got: counts.len(),
        });
    }
    let lambda = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
    if lambda == 0.0 {
        return Err(StatsError::DegenerateFit { needed: 3, got: 1 });
    }
    let (expected, observed) = poisson_cells(counts, lambda);
    let (expected, observed) = merge_cells(&expected, &observed, MIN_EXPECTED);
    pearson_chi_square(&observed, &expected, 1)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when the
/// inputs differ in length, have fewer than two points, or one side is
/// constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
