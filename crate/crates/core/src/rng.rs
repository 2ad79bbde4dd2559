//! Keyed uniform streams.
//!
//! Every (master seed, image index, pixel index) triple owns an independent
//! ChaCha8 stream: the 256-bit key is the master seed in little-endian order
//! followed by 24 zero bytes, and the 64-bit stream id is
//! `image_index << 32 | pixel_index`. Uniforms are the top 53 bits of each
//! 64-bit output scaled by 2^-53, so they lie in `[0, 1)`.
//!
//! This construction is part of the file format's reproducibility contract;
//! changing it changes every generated dataset.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const TWO_POW_MINUS_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, image_index: u32, pixel_index: u32) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream((u64::from(image_index) << 32) | u64::from(pixel_index));
        Self { inner }
    }

    /// Next uniform in `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * TWO_POW_MINUS_53
    }
}
