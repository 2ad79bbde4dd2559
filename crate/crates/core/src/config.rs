//! Encoding parameters: simulation window, bin width, rate ceiling,
//! generator choice and master seed.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const DEFAULT_SIMULATION_TIME_MS: f64 = 100.0;
pub const DEFAULT_DELTA_T_MS: f64 = 1.0;
pub const DEFAULT_MAX_RATE_HZ: f64 = 1000.0;

/// Slack allowed when checking that `max_rate * delta_t <= 1`.
pub(crate) const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{name} must be a positive finite number, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} = {value} ms is not a whole number of microseconds")]
    SubMicrosecond { name: &'static str, value: f64 },
    #[error(
        "simulation time {simulation_time_ms} ms is not a multiple of delta_t {delta_t_ms} ms"
    )]
    NonDivisible {
        simulation_time_ms: f64,
        delta_t_ms: f64,
    },
    #[error("max rate {max_rate_hz} Hz with delta_t {delta_t_ms} ms gives a per-bin probability above 1")]
    RateTooHigh { max_rate_hz: f64, delta_t_ms: f64 },
    #[error("max rate must be finite and non-negative, got {0}")]
    InvalidMaxRate(f64),
}

/// Which homogeneous-Poisson construction drives each pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Generator {
    /// One uniform per bin; a bin spikes when `r * dt` exceeds the draw.
    #[default]
    BernoulliBinning,
    /// Cumulated exponential inter-spike intervals, then binned.
    ExponentialIsi,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::BernoulliBinning => "bernoulli",
            Generator::ExponentialIsi => "isi",
        })
    }
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(Generator::BernoulliBinning),
            "isi" => Ok(Generator::ExponentialIsi),
            other => Err(format!(
                "unknown generator `{other}` (expected bernoulli or isi)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingConfig {
    pub simulation_time_ms: f64,
    pub delta_t_ms: f64,
    /// Rate in Hz assigned to a pixel of intensity 255.
    pub max_rate_hz: f64,
    pub generator: Generator,
    pub master_seed: u64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            simulation_time_ms: DEFAULT_SIMULATION_TIME_MS,
            delta_t_ms: DEFAULT_DELTA_T_MS,
            max_rate_hz: DEFAULT_MAX_RATE_HZ,
            generator: Generator::BernoulliBinning,
            master_seed: 0,
        }
    }
}

/// The integer time grid a valid config resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub simulation_time_us: u64,
    pub delta_t_us: u64,
    pub bins: usize,
}

fn to_micros(name: &'static str, ms: f64) -> Result<u64, ConfigError> {
    if !(ms.is_finite() && ms > 0.0) {
        return Err(ConfigError::NotPositive { name, value: ms });
    }
    let us = ms * 1000.0;
    let rounded = us.round();
    if (us - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded < 1.0 || rounded > u64::MAX as f64
    {
        return Err(ConfigError::SubMicrosecond { name, value: ms });
    }
    Ok(rounded as u64)
}

/// Number of bins `M = simulation_time / delta_t`. Both durations are taken in
/// milliseconds and resolved to whole microseconds, so the division is exact.
pub fn bin_count(simulation_time_ms: f64, delta_t_ms: f64) -> Result<usize, ConfigError> {
    Ok(time_grid(simulation_time_ms, delta_t_ms)?.bins)
}

fn time_grid(simulation_time_ms: f64, delta_t_ms: f64) -> Result<TimeGrid, ConfigError> {
    let sim = to_micros("simulation_time", simulation_time_ms)?;
    let dt = to_micros("delta_t", delta_t_ms)?;
    if sim % dt != 0 {
        return Err(ConfigError::NonDivisible {
            simulation_time_ms,
            delta_t_ms,
        });
    }
    Ok(TimeGrid {
        simulation_time_us: sim,
        delta_t_us: dt,
        bins: (sim / dt) as usize,
    })
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<TimeGrid, ConfigError> {
        let grid = time_grid(self.simulation_time_ms, self.delta_t_ms)?;
        if !(self.max_rate_hz.is_finite() && self.max_rate_hz >= 0.0) {
            return Err(ConfigError::InvalidMaxRate(self.max_rate_hz));
        }
        if self.max_rate_hz * grid.delta_t_us as f64 / 1e6 > 1.0 + PROBABILITY_SLACK {
            return Err(ConfigError::RateTooHigh {
                max_rate_hz: self.max_rate_hz,
                delta_t_ms: self.delta_t_ms,
            });
        }
        Ok(grid)
    }

    /// Firing rate in Hz for a pixel intensity, linear in intensity.
    pub fn rate_for_pixel(&self, pixel: u8) -> f64 {
        f64::from(pixel) * self.max_rate_hz / 255.0
    }
}

/// `rate * dt` with `dt` in microseconds, clamped to 1.
pub(crate) fn bin_probability(rate_hz: f64, delta_t_us: u64) -> f64 {
    (rate_hz * delta_t_us as f64 / 1e6).min(1.0)
}

/// Per-bin spike probability `r * dt` for a pixel, where
/// `r = pixel / 255 * max_rate`.
pub fn spike_probability(pixel: u8, config: &EncodingConfig) -> Result<f64, ConfigError> {
    let grid = config.validate()?;
    Ok(pixel_probability(
        pixel,
        config.max_rate_hz,
        grid.delta_t_us,
    ))
}

pub(crate) fn pixel_probability(pixel: u8, max_rate_hz: f64, delta_t_us: u64) -> f64 {
    // Single rounding step: 255 * 1000 Hz * 1000 us / 255e6 is exactly 1.
    (f64::from(pixel) * max_rate_hz * delta_t_us as f64 / 255e6).min(1.0)
}
