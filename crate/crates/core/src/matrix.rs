//! Bit-packed pixels x bins spike grid for one encoded image.

use crate::spike_gen::SpikeTrain;

/// One encoded image: row `i` is the spike train of pixel `i`.
///
/// Cells are numbered row-major, `cell = pixel * bins + bin`, and stored
/// eight per byte: cell `c` lives at bit `c % 8` (LSB first) of byte `c / 8`.
/// This is exactly the payload layout of the dense file format.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeMatrix {
    pixels: usize,
    bins: usize,
    delta_t_us: u32,
    image_index: u32,
    label: Option<u8>,
    bits: Vec<u8>,
}

pub(crate) fn packed_len(pixels: usize, bins: usize) -> usize {
    (pixels * bins).div_ceil(8)
}

impl SpikeMatrix {
    /// An all-false matrix.
    pub fn new(
        pixels: usize,
        bins: usize,
        delta_t_us: u32,
        image_index: u32,
        label: Option<u8>,
    ) -> Self {
        Self {
            pixels,
            bins,
            delta_t_us,
            image_index,
            label,
            bits: vec![0; packed_len(pixels, bins)],
        }
    }

    /// Wraps an already packed payload. Returns `None` if the length does not
    /// match `ceil(pixels * bins / 8)` or padding bits past the last cell are
    /// set.
    pub fn from_packed(
        pixels: usize,
        bins: usize,
        delta_t_us: u32,
        image_index: u32,
        label: Option<u8>,
        bits: Vec<u8>,
    ) -> Option<Self> {
        if bits.len() != packed_len(pixels, bins) {
            return None;
        }
        let used = (pixels * bins) % 8;
        if used != 0 && bits.last().is_some_and(|b| b >> used != 0) {
            return None;
        }
        Some(Self {
            pixels,
            bins,
            delta_t_us,
            image_index,
            label,
            bits,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(
        rows: &[SpikeTrain],
        delta_t_us: u32,
        image_index: u32,
        label: Option<u8>,
    ) -> Option<Self> {
        let bins = rows.first().map_or(0, SpikeTrain::len);
        if rows.iter().any(|r| r.len() != bins) {
            return None;
        }
        let mut m = Self::new(rows.len(), bins, delta_t_us, image_index, label);
        for (p, row) in rows.iter().enumerate() {
            m.set_row(p, row.as_slice().iter().copied());
        }
        Some(m)
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn delta_t_us(&self) -> u32 {
        self.delta_t_us
    }

    pub fn image_index(&self) -> u32 {
        self.image_index
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn set_label(&mut self, label: Option<u8>) {
        self.label = label;
    }

    pub fn packed(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    fn cell(&self, pixel: usize, bin: usize) -> usize {
        assert!(
            pixel < self.pixels && bin < self.bins,
            "cell ({pixel}, {bin}) out of range"
        );
        pixel * self.bins + bin
    }

    pub fn get(&self, pixel: usize, bin: usize) -> bool {
        let c = self.cell(pixel, bin);
        self.bits[c >> 3] >> (c & 7) & 1 == 1
    }

    pub fn set(&mut self, pixel: usize, bin: usize, value: bool) {
        let c = self.cell(pixel, bin);
        let mask = 1u8 << (c & 7);
        if value {
            self.bits[c >> 3] |= mask;
        } else {
            self.bits[c >> 3] &= !mask;
        }
    }

    /// Overwrites row `pixel` with the first `bins` values of `values`.
    pub(crate) fn set_row(&mut self, pixel: usize, values: impl IntoIterator<Item = bool>) {
        for (bin, v) in values.into_iter().take(self.bins).enumerate() {
            if v {
                self.set(pixel, bin, true);
            }
        }
    }

    /// Sets every cell of row `pixel`.
    pub(crate) fn fill_row(&mut self, pixel: usize) {
        let start = pixel * self.bins;
        let end = start + self.bins;
        let mut c = start;
        while c < end {
            if c & 7 == 0 && c + 8 <= end {
                self.bits[c >> 3] = 0xff;
                c += 8;
            } else {
                self.bits[c >> 3] |= 1 << (c & 7);
                c += 1;
            }
        }
    }

    pub fn row(&self, pixel: usize) -> SpikeTrain {
        SpikeTrain::new((0..self.bins).map(|b| self.get(pixel, b)).collect())
    }

    pub fn row_spike_count(&self, pixel: usize) -> usize {
        (0..self.bins).filter(|&b| self.get(pixel, b)).count()
    }

    /// Total number of true cells.
    pub fn spike_count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// `(pixel, bin)` of every true cell in row-major order.
    pub fn spikes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits.iter().enumerate().flat_map(move |(j, &byte)| {
            let bins = self.bins;
            (0..8).filter(move |k| byte >> k & 1 == 1).map(move |k| {
                let c = j * 8 + k;
                (c / bins, c % bins)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_layout() {
        let mut m = SpikeMatrix::new(3, 5, 1000, 0, None);
        assert_eq!(m.packed().len(), 2);
        m.set(0, 0, true);
        m.set(1, 3, true); // cell 8 -> byte 1 bit 0
        m.set(2, 4, true); // cell 14 -> byte 1 bit 6
        assert_eq!(m.packed(), &[0b0000_0001, 0b0100_0001]);
        assert_eq!(m.spike_count(), 3);
        assert_eq!(m.spikes().collect::<Vec<_>>(), vec![(0, 0), (1, 3), (2, 4)]);
        m.set(1, 3, false);
        assert_eq!(m.packed(), &[0b0000_0001, 0b0100_0000]);
    }

    #[test]
    fn mnist_payload_size() {
        // 784 * 100 cells = 78400 bits = 9800 bytes
        assert_eq!(
            SpikeMatrix::new(784, 100, 1000, 0, None).packed().len(),
            9800
        );
    }

    #[test]
    fn fill_row_matches_setting_each_cell() {
        for bins in [1usize, 3, 8, 13, 100] {
            let mut a = SpikeMatrix::new(5, bins, 1, 0, None);
            let mut b = a.clone();
            a.fill_row(2);
            for bin in 0..bins {
                b.set(2, bin, true);
            }
            assert_eq!(a, b, "bins = {bins}");
            assert_eq!(a.row_spike_count(2), bins);
            assert_eq!(a.spike_count(), bins);
        }
    }

    #[test]
    fn from_packed_rejects_dirty_padding() {
        assert!(SpikeMatrix::from_packed(1, 3, 1, 0, None, vec![0b0000_0111]).is_some());
        assert!(SpikeMatrix::from_packed(1, 3, 1, 0, None, vec![0b0000_1000]).is_none());
        assert!(SpikeMatrix::from_packed(1, 3, 1, 0, None, vec![0, 0]).is_none());
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            SpikeTrain::new(vec![true, false, true]),
            SpikeTrain::new(vec![false, false, true]),
        ];
        let m = SpikeMatrix::from_rows(&rows, 1000, 4, Some(3)).unwrap();
        assert_eq!(m.row(0), rows[0]);
        assert_eq!(m.row(1), rows[1]);
        assert_eq!(m.row_spike_count(0), 2);
        let ragged = vec![SpikeTrain::new(vec![true]), SpikeTrain::new(vec![])];
        assert!(SpikeMatrix::from_rows(&ragged, 1, 0, None).is_none());
    }
}
