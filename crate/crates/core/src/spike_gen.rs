//! Homogeneous Poisson spike-train generators.
//!
//! Two constructions are provided. [`generate_bernoulli_train`] divides the
//! window into `M` bins and fires bin `i` when `r * dt > x_i` for a fresh
//! uniform `x_i`, giving Binomial(M, r*dt) counts. [`generate_isi_train`]
//! cumulates exponential inter-spike intervals in continuous time, giving
//! Poisson(r*T) counts; [`events_to_bins`] maps its output onto the bin grid.

use thiserror::Error;

use crate::config::{ConfigError, EncodingConfig};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpikeGenError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("rate {0} Hz must be finite and non-negative")]
    InvalidRate(f64),
    #[error("event at {time_ms} ms lies outside the window [0, {window_ms}) ms")]
    EventOutOfWindow { time_ms: f64, window_ms: f64 },
    #[error("event times must be finite and strictly increasing (position {0})")]
    NotIncreasing(usize),
}

/// One boolean per bin; `true` marks a spike. At most one spike per bin.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpikeTrain {
    bins: Vec<bool>,
}

impl SpikeTrain {
    pub fn new(bins: Vec<bool>) -> Self {
        Self { bins }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn spike_count(&self) -> usize {
        self.bins.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bins
    }

    pub fn into_inner(self) -> Vec<bool> {
        self.bins
    }
}

/// Strictly increasing spike times in milliseconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTimes {
    times: Vec<f64>,
}

impl EventTimes {
    pub fn new(times: Vec<f64>) -> Result<Self, SpikeGenError> {
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= times[i - 1]) {
                return Err(SpikeGenError::NotIncreasing(i));
            }
        }
        Ok(Self { times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.times
    }
}

/// Lazily yields the `M` Bernoulli bins for probability `p`. Consumes exactly
/// one uniform per bin, in bin order.
pub(crate) fn bernoulli_bins(
    p: f64,
    bins: usize,
    rng: &mut RngStream,
) -> impl Iterator<Item = bool> + '_ {
    (0..bins).map(move |_| p > rng.next_uniform())
}

/// Bernoulli-binning generator: bin `i` spikes iff `p > x_i`, with `x_i`
/// uniform on `[0, 1)`. So `p = 1` always fires and `p = 0` never does.
pub fn generate_bernoulli_train(
    p: f64,
    bins: usize,
    rng: &mut RngStream,
) -> Result<SpikeTrain, SpikeGenError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SpikeGenError::InvalidProbability(p));
    }
    Ok(SpikeTrain::new(bernoulli_bins(p, bins, rng).collect()))
}

/// Exponential-ISI generator over `[0, simulation_time_ms)`.
///
/// Intervals are drawn by inversion, `-ln(1 - u) / rate` with `u` in
/// `[0, 1)`, and accumulated from 0 until the running time reaches the
/// window end. A zero-length interval (u = 0, or an increment lost to
/// rounding) would repeat the previous time; such coincident events are
/// merged so the output stays strictly increasing.
pub fn generate_isi_train(
    rate_hz: f64,
    simulation_time_ms: f64,
    rng: &mut RngStream,
) -> Result<EventTimes, SpikeGenError> {
    if !(rate_hz.is_finite() && rate_hz >= 0.0) {
        return Err(SpikeGenError::InvalidRate(rate_hz));
    }
    let mut times = Vec::new();
    if rate_hz == 0.0 {
        return Ok(EventTimes { times });
    }
    let mean_isi_ms = 1000.0 / rate_hz;
    let mut t = 0.0f64;
    loop {
        let u = rng.next_uniform();
        t += -(1.0 - u).ln() * mean_isi_ms;
        if t >= simulation_time_ms {
            break;
        }
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
    Ok(EventTimes { times })
}

/// Index of the bin `[i*dt, (i+1)*dt)` containing `t`, using the same float
/// products as the interval bounds so boundary cases agree with them.
fn bin_index(t: f64, delta_t_ms: f64) -> usize {
    let mut i = (t / delta_t_ms).floor().max(0.0) as usize;
    while i > 0 && i as f64 * delta_t_ms > t {
        i -= 1;
    }
    while (i + 1) as f64 * delta_t_ms <= t {
        i += 1;
    }
    i
}

/// Bins continuous spike times: bin `i` is set iff some event falls in
/// `[i*dt, (i+1)*dt)`. Several events in one bin collapse to one spike.
pub fn events_to_bins(
    events: &EventTimes,
    config: &EncodingConfig,
) -> Result<SpikeTrain, SpikeGenError> {
    let grid = config.validate()?;
    let mut bins = vec![false; grid.bins];
    for &t in events.as_slice() {
        let out_of_window = || SpikeGenError::EventOutOfWindow {
            time_ms: t,
            window_ms: config.simulation_time_ms,
        };
        if !(0.0..config.simulation_time_ms).contains(&t) {
            return Err(out_of_window());
        }
        let i = bin_index(t, config.delta_t_ms);
        *bins.get_mut(i).ok_or_else(out_of_window)? = true;
    }
    Ok(SpikeTrain::new(bins))
}
