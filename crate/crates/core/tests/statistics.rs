//! Distributional checks of the generators against independent oracles:
//! exact binomial enumeration, the binomial variance identity, and exact
//! Poisson probabilities.

use spikeforge::stats::{pearson_chi_square, poisson_gof, summarize, trial_counts};
use spikeforge::{encode_frame, histogram, spike_probability, EncodingConfig, Generator};

fn bernoulli(sim_ms: f64, seed: u64) -> EncodingConfig {
    EncodingConfig {
        simulation_time_ms: sim_ms,
        delta_t_ms: 1.0,
        generator: Generator::BernoulliBinning,
        master_seed: seed,
        ..Default::default()
    }
}

fn isi(sim_ms: f64, seed: u64) -> EncodingConfig {
    EncodingConfig {
        generator: Generator::ExponentialIsi,
        ..bernoulli(sim_ms, seed)
    }
}

/// Binomial(m, p) pmf by enumerating every bin pattern.
fn enumerated_binomial(m: u32, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; m as usize + 1];
    for pattern in 0u32..(1 << m) {
        let k = pattern.count_ones();
        pmf[k as usize] += p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
    }
    pmf
}

/// Poisson pmf via ln P(n) = ln P(n-1) + ln(lambda / n), in log space so
/// large lambda does not underflow.
fn poisson_pmf(lambda: f64, n_max: usize) -> Vec<f64> {
    let mut ln_p = -lambda;
    let mut pmf = vec![ln_p.exp()];
    for n in 1..=n_max {
        ln_p += (lambda / n as f64).ln();
        pmf.push(ln_p.exp());
    }
    pmf
}

#[test]
fn enumeration_oracle_sanity() {
    let pmf = enumerated_binomial(4, 0.5);
    let sixteenths: Vec<f64> = pmf.iter().map(|p| p * 16.0).collect();
    assert_eq!(sixteenths, vec![1.0, 4.0, 6.0, 4.0, 1.0]);
}

#[test]
fn small_m_counts_follow_enumerated_binomial() {
    // M = 6, p = 0.3 (rate 300 Hz at 1 ms bins)
    let k = 50_000;
    let tc = trial_counts(300.0, &bernoulli(6.0, 11), k).unwrap();
    let pmf = enumerated_binomial(6, 0.3);
    let mut observed = vec![0.0; 7];
    for &c in &tc.counts {
        observed[c as usize] += 1.0;
    }
    let expected: Vec<f64> = pmf.iter().map(|p| p * k as f64).collect();
    let g = pearson_chi_square(&observed, &expected, 0).unwrap();
    assert!(g.p_value > 0.001, "{g:?}");
}

#[test]
fn bernoulli_mean_count_law() {
    // N = 1000 trains of M = 100 at p = 0.2
    let (n, m, p): (f64, f64, f64) = (1000.0, 100.0, 0.2);
    let tc = trial_counts(200.0, &bernoulli(100.0, 1), 1000).unwrap();
    let mean = summarize(&tc.counts).unwrap().mean;
    let sigma_rel = ((1.0 - p) / (n * m * p)).sqrt();
    let ratio = mean / (m * p);
    assert!(
        (ratio - 1.0).abs() <= 3.0 * sigma_rel,
        "ratio {ratio}, sigma_rel {sigma_rel}"
    );
}

#[test]
fn bernoulli_fano_is_one_minus_p() {
    for &(rate, p) in &[(119.569, 0.119569), (500.0, 0.5)] {
        let fanos: Vec<f64> = (0..100)
            .map(|seed| {
                let tc = trial_counts(rate, &bernoulli(1000.0, seed), 1000).unwrap();
                summarize(&tc.counts).unwrap().fano
            })
            .collect();
        let mean = fanos.iter().sum::<f64>() / 100.0;
        assert!((mean - (1.0 - p)).abs() <= 0.02, "p {p}: mean fano {mean}");
    }
}

#[test]
fn isi_fano_converges_to_one() {
    let fanos: Vec<f64> = (0..100)
        .map(|seed| {
            let tc = trial_counts(119.569, &isi(1000.0, seed), 1000).unwrap();
            summarize(&tc.counts).unwrap().fano
        })
        .collect();
    let mean = fanos.iter().sum::<f64>() / 100.0;
    assert!((0.97..=1.03).contains(&mean), "mean fano {mean}");
}

#[test]
fn isi_counts_match_exact_poisson() {
    // rate 1000 Hz over 1000 ms: Poisson(1000), sd ~ 31.6
    let k = 2000;
    let tc = trial_counts(1000.0, &isi(1000.0, 7), k).unwrap();
    let s = summarize(&tc.counts).unwrap();
    assert!(
        (s.mean - 1000.0).abs() < 3.0 * (1000.0f64 / k as f64).sqrt(),
        "mean {}",
        s.mean
    );
    assert!(tc.counts.iter().all(|&c| c.abs_diff(1000) < 200));

    // chi-square against the exact pmf (no fitted parameter), cells of width 10
    let pmf = poisson_pmf(1000.0, 1400);
    let edges: Vec<usize> = (900..=1100).step_by(10).collect();
    let mut expected = Vec::new();
    let mut observed = Vec::new();
    let mut lo = 0usize;
    for &hi in edges.iter().chain(std::iter::once(&1401)) {
        expected.push(pmf[lo..hi].iter().sum::<f64>() * k as f64);
        observed.push(
            tc.counts
                .iter()
                .filter(|&&c| (lo as u64..hi as u64).contains(&c))
                .count() as f64,
        );
        lo = hi;
    }
    let g = pearson_chi_square(&observed, &expected, 0).unwrap();
    assert!(g.p_value > 0.001, "{g:?}");
}

#[test]
fn gof_accepts_poisson_and_rejects_binomial() {
    let accepted = (0..100)
        .filter(|&seed| {
            let tc = trial_counts(120.0, &isi(1000.0, 1000 + seed), 1000).unwrap();
            poisson_gof(&tc.counts).unwrap().p_value > 0.01
        })
        .count();
    assert!(accepted >= 95, "{accepted}/100");

    let rejected = (0..20)
        .filter(|&seed| {
            let tc = trial_counts(500.0, &bernoulli(100.0, seed), 1000).unwrap();
            poisson_gof(&tc.counts).unwrap().p_value < 0.01
        })
        .count();
    assert!(rejected >= 18, "{rejected}/20");
}

#[test]
fn mean_count_increases_with_probability() {
    let mean = |rate: f64| {
        let tc = trial_counts(rate, &bernoulli(100.0, 3), 1000).unwrap();
        summarize(&tc.counts).unwrap().mean
    };
    let means: Vec<f64> = [50.0, 100.0, 150.0, 300.0, 600.0]
        .iter()
        .map(|&r| mean(r))
        .collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn trial_histogram_is_unimodal_near_rate() {
    let tc = trial_counts(119.569, &bernoulli(1000.0, 0), 1000).unwrap();
    let h = histogram(&tc.counts, 5).unwrap();
    assert_eq!(h.iter().map(|b| b.frequency).sum::<usize>(), 1000);
    let mode = h.iter().max_by_key(|b| b.frequency).unwrap();
    assert!(
        (105..=135).contains(&mode.lower),
        "mode bin at {}",
        mode.lower
    );
}

#[test]
fn per_pixel_spike_fraction_tracks_probability() {
    let frame: Vec<u8> = (0..28).map(|i| (i * 9) as u8).collect();
    let reps = 1000;
    let mut totals = vec![0usize; frame.len()];
    for seed in 0..reps {
        let cfg = EncodingConfig {
            master_seed: seed,
            ..Default::default()
        };
        let m = encode_frame(&frame, &cfg, 0).unwrap();
        for (p, t) in totals.iter_mut().enumerate() {
            *t += m.row_spike_count(p);
        }
    }
    let cfg = EncodingConfig::default();
    let trials = (reps * 100) as f64;
    for (p, &px) in frame.iter().enumerate() {
        let prob = spike_probability(px, &cfg).unwrap();
        let frac = totals[p] as f64 / trials;
        let sigma = (prob * (1.0 - prob) / trials).sqrt();
        assert!(
            (frac - prob).abs() <= 3.0 * sigma,
            "pixel {p} (intensity {px}): fraction {frac} vs {prob}"
        );
    }
}
