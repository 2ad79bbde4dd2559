//! Frame-to-spike-matrix encoding, per image and per dataset.
//!
//! Pixel `i` of image `k` always draws from `RngStream(master_seed, k, i)`,
//! so the output does not depend on thread count or evaluation order.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{pixel_probability, ConfigError, EncodingConfig, Generator, TimeGrid};
use crate::idx::{FrameSet, LabelSet};
use crate::matrix::SpikeMatrix;
use crate::rng::RngStream;
use crate::spike_gen::{bernoulli_bins, events_to_bins, generate_isi_train, SpikeGenError};

/// Images encoded per parallel batch before they are handed to the sink.
/// Bounds peak memory at roughly `BATCH * 9.8 KB` for MNIST geometry.
const BATCH: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    SpikeGen(#[from] SpikeGenError),
    #[error("frame has {found} pixels, encoder expects {expected}")]
    GeometryMismatch { expected: usize, found: usize },
    #[error("{frames} frames but {labels} labels")]
    CountMismatch { frames: usize, labels: usize },
    #[error("{0} pixels per frame exceeds the 65535 addressable by an event record")]
    TooManyPixels(usize),
    #[error("{0} bins per image exceeds the 65535 a file header can hold")]
    TooManyBins(usize),
    #[error("simulation window of {0} us does not fit 32-bit microsecond timestamps")]
    WindowTooLong(u64),
    #[error("dataset has more than 2^32 images")]
    TooManyImages,
    #[error("failed to start worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncodingConfig,
    grid: TimeGrid,
    pixels: usize,
}

impl Encoder {
    /// Validates `config` once for frames of `pixels` intensities.
    pub fn new(config: EncodingConfig, pixels: usize) -> Result<Self, EncodeError> {
        let grid = config.validate()?;
        if pixels == 0 || pixels > usize::from(u16::MAX) {
            return Err(EncodeError::TooManyPixels(pixels));
        }
        if grid.bins > usize::from(u16::MAX) {
            return Err(EncodeError::TooManyBins(grid.bins));
        }
        if grid.simulation_time_us > u64::from(u32::MAX) {
            return Err(EncodeError::WindowTooLong(grid.simulation_time_us));
        }
        Ok(Self {
            config,
            grid,
            pixels,
        })
    }

    pub fn config(&self) -> &EncodingConfig {
        &self.config
    }

    pub fn bins(&self) -> usize {
        self.grid.bins
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn encode_frame(
        &self,
        frame: &[u8],
        image_index: u32,
        label: Option<u8>,
    ) -> Result<SpikeMatrix, EncodeError> {
        if frame.len() != self.pixels {
            return Err(EncodeError::GeometryMismatch {
                expected: self.pixels,
                found: frame.len(),
            });
        }
        let dt_us = self.grid.delta_t_us;
        let mut m = SpikeMatrix::new(
            self.pixels,
            self.grid.bins,
            dt_us as u32,
            image_index,
            label,
        );
        let seed = self.config.master_seed;
        for (i, &pixel) in frame.iter().enumerate() {
            let p = pixel_probability(pixel, self.config.max_rate_hz, dt_us);
            // A stream is private to its pixel, so skipping the draws when the
            // outcome is forced (p = 0 never fires, p = 1 always does since
            // uniforms are < 1) leaves every other row unchanged.
            if p <= 0.0 {
                continue;
            }
            match self.config.generator {
                Generator::BernoulliBinning => {
                    if p >= 1.0 {
                        m.fill_row(i);
                    } else {
                        let mut rng = RngStream::new(seed, image_index, i as u32);
                        m.set_row(i, bernoulli_bins(p, self.grid.bins, &mut rng));
                    }
                }
                Generator::ExponentialIsi => {
                    let mut rng = RngStream::new(seed, image_index, i as u32);
                    let rate = self.config.rate_for_pixel(pixel);
                    let events =
                        generate_isi_train(rate, self.config.simulation_time_ms, &mut rng)?;
                    let train = events_to_bins(&events, &self.config)?;
                    m.set_row(i, train.into_inner());
                }
            }
        }
        Ok(m)
    }

    /// Encodes every frame, passing matrices to `sink` in image order.
    ///
    /// Work is spread over `threads` workers (0 means rayon's default) in
    /// fixed-size batches; the output sequence is identical for any value.
    /// Returns the number of images encoded.
    pub fn encode_dataset<E, F>(
        &self,
        frames: &FrameSet,
        labels: Option<&LabelSet>,
        threads: usize,
        mut sink: F,
    ) -> Result<usize, E>
    where
        E: From<EncodeError>,
        F: FnMut(SpikeMatrix) -> Result<(), E>,
    {
        if frames.pixels_per_frame() != self.pixels {
            return Err(EncodeError::GeometryMismatch {
                expected: self.pixels,
                found: frames.pixels_per_frame(),
            }
            .into());
        }
        if let Some(labels) = labels {
            if labels.len() != frames.len() {
                return Err(EncodeError::CountMismatch {
                    frames: frames.len(),
                    labels: labels.len(),
                }
                .into());
            }
        }
        if u32::try_from(frames.len()).is_err() {
            return Err(EncodeError::TooManyImages.into());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| EncodeError::ThreadPool(e.to_string()))?;

        let total = frames.len();
        let mut start = 0;
        while start < total {
            let end = (start + BATCH).min(total);
            let batch: Result<Vec<SpikeMatrix>, EncodeError> = pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|k| {
                        let label = labels.and_then(|l| l.get(k));
                        self.encode_frame(frames.frame(k).unwrap(), k as u32, label)
                    })
                    .collect()
            });
            for m in batch? {
                sink(m)?;
            }
            start = end;
        }
        Ok(total)
    }

    /// Collects [`Encoder::encode_dataset`] into memory.
    pub fn encode_all(
        &self,
        frames: &FrameSet,
        labels: Option<&LabelSet>,
        threads: usize,
    ) -> Result<Vec<SpikeMatrix>, EncodeError> {
        let mut out = Vec::with_capacity(frames.len());
        self.encode_dataset(frames, labels, threads, |m| {
            out.push(m);
            Ok::<(), EncodeError>(())
        })?;
        Ok(out)
    }
}

/// Encodes one frame whose length defines the pixel count.
pub fn encode_frame(
    frame: &[u8],
    config: &EncodingConfig,
    image_index: u32,
) -> Result<SpikeMatrix, EncodeError> {
    Encoder::new(config.clone(), frame.len())?.encode_frame(frame, image_index, None)
}

/// Encodes a whole split in memory with labels attached.
pub fn encode_dataset(
    frames: &FrameSet,
    labels: &LabelSet,
    config: &EncodingConfig,
) -> Result<Vec<SpikeMatrix>, EncodeError> {
    Encoder::new(config.clone(), frames.pixels_per_frame())?.encode_all(frames, Some(labels), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::spike_probability;
    use crate::spike_gen::generate_bernoulli_train;

    fn mnist_like(frames: usize, fill: impl Fn(usize, usize) -> u8) -> FrameSet {
        let data = (0..frames)
            .flat_map(|k| (0..784).map(move |i| (k, i)))
            .map(|(k, i)| fill(k, i))
            .collect();
        FrameSet::from_raw(28, 28, data).unwrap()
    }

    #[test]
    fn blank_and_white_frames() {
        let cfg = EncodingConfig::default();
        let zero = encode_frame(&[0; 784], &cfg, 0).unwrap();
        assert_eq!((zero.pixels(), zero.bins()), (784, 100));
        assert_eq!(zero.spike_count(), 0);
        let white = encode_frame(&[255; 784], &cfg, 0).unwrap();
        assert_eq!(white.spike_count(), 784 * 100);
        for p in 0..784 {
            assert_eq!(white.row_spike_count(p), 100);
        }
    }

    #[test]
    fn rows_match_direct_generator_calls() {
        let cfg = EncodingConfig {
            master_seed: 77,
            ..Default::default()
        };
        let frame: Vec<u8> = (0..784).map(|i| (i * 7 % 256) as u8).collect();
        let m = encode_frame(&frame, &cfg, 12).unwrap();
        for (i, &px) in frame.iter().enumerate() {
            let p = spike_probability(px, &cfg).unwrap();
            let mut rng = RngStream::new(77, 12, i as u32);
            let row = generate_bernoulli_train(p, 100, &mut rng).unwrap();
            assert_eq!(m.row(i), row, "pixel {i}");
        }
    }

    #[test]
    fn isi_rows_are_binned_events() {
        let cfg = EncodingConfig {
            generator: Generator::ExponentialIsi,
            master_seed: 5,
            ..Default::default()
        };
        let frame: Vec<u8> = (0..784).map(|i| (i % 256) as u8).collect();
        let m = encode_frame(&frame, &cfg, 3).unwrap();
        for (i, &px) in frame.iter().enumerate().step_by(37) {
            let mut rng = RngStream::new(5, 3, i as u32);
            let ev = generate_isi_train(cfg.rate_for_pixel(px), 100.0, &mut rng).unwrap();
            assert_eq!(m.row(i), events_to_bins(&ev, &cfg).unwrap());
        }
    }

    #[test]
    fn geometry_and_count_checks() {
        let enc = Encoder::new(EncodingConfig::default(), 784).unwrap();
        assert!(matches!(
            enc.encode_frame(&[0; 783], 0, None),
            Err(EncodeError::GeometryMismatch {
                expected: 784,
                found: 783
            })
        ));
        let frames = mnist_like(3, |_, _| 0);
        let labels = LabelSet::new(vec![1, 2]).unwrap();
        assert!(matches!(
            enc.encode_all(&frames, Some(&labels), 1),
            Err(EncodeError::CountMismatch {
                frames: 3,
                labels: 2
            })
        ));
        assert!(matches!(
            Encoder::new(EncodingConfig::default(), 70_000),
            Err(EncodeError::TooManyPixels(70_000))
        ));
        let bad = EncodingConfig {
            delta_t_ms: 3.0,
            ..Default::default()
        };
        assert!(matches!(
            Encoder::new(bad, 784),
            Err(EncodeError::Config(ConfigError::NonDivisible { .. }))
        ));
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let frames = mnist_like(600, |k, i| ((k * 31 + i * 17) % 256) as u8);
        let labels = LabelSet::new((0..600).map(|k| (k % 10) as u8).collect()).unwrap();
        let enc = Encoder::new(
            EncodingConfig {
                master_seed: 42,
                ..Default::default()
            },
            784,
        )
        .unwrap();
        let serial = enc.encode_all(&frames, Some(&labels), 1).unwrap();
        let parallel = enc.encode_all(&frames, Some(&labels), 4).unwrap();
        assert_eq!(serial, parallel);
        for (k, m) in serial.iter().enumerate() {
            assert_eq!(m.image_index() as usize, k);
            assert_eq!(m.label(), Some((k % 10) as u8));
        }
    }

    #[test]
    fn sink_errors_stop_encoding() {
        let frames = mnist_like(600, |_, _| 10);
        let enc = Encoder::new(EncodingConfig::default(), 784).unwrap();
        let mut seen = 0;
        let res = enc.encode_dataset(&frames, None, 1, |_| {
            seen += 1;
            if seen == 3 {
                Err(EncodeError::TooManyImages)
            } else {
                Ok(())
            }
        });
        assert!(res.is_err());
        assert_eq!(seen, 3);
    }
}
