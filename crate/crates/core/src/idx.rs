//! Reader (and inverse writer) for the IDX container used by the MNIST
//! distribution files.
//!
//! Layout: a big-endian 32-bit magic (`0x00000803` for 3-D unsigned-byte
//! image tensors, `0x00000801` for 1-D label vectors), one big-endian 32-bit
//! size per dimension, then the raw payload in row-major order.

use thiserror::Error;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const GZIP_PREFIX: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdxError {
    #[error("input is gzip-compressed; decompress it first (e.g. `gunzip file.gz`)")]
    Compressed,
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated IDX data: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("IDX dimensions {dims:?} describe a payload too large to address")]
    OversizedHeader { dims: Vec<u32> },
    #[error("frames of {rows}x{cols} pixels are empty")]
    EmptyFrame { rows: usize, cols: usize },
    #[error("{extra} unexpected bytes after the IDX payload")]
    TrailingBytes { extra: u64 },
    #[error("label {value} at position {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, value: u8 },
}

/// A decoded image corpus. Frames are stored contiguously, row-major, one
/// byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl FrameSet {
    /// Builds a frame set from contiguous pixel data. Returns `None` when the
    /// data length is not a whole number of `width * height` frames.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        let frame_len = width.checked_mul(height)?;
        if frame_len == 0 || !data.len().is_multiple_of(frame_len) {
            return None;
        }
        Some(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.pixels_per_frame()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Pixel intensities of frame `index`, flattened as `row * width + col`.
    pub fn frame(&self, index: usize) -> Option<&[u8]> {
        let n = self.pixels_per_frame();
        self.data.get(index * n..(index + 1) * n)
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.pixels_per_frame())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<u8>,
}

impl LabelSet {
    pub fn new(labels: Vec<u8>) -> Result<Self, IdxError> {
        if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(IdxError::LabelOutOfRange { index, value });
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<u8> {
        self.labels.get(index).copied()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Validates magic and dimension header, returning the dimensions and the
/// payload slice of exactly the advertised length.
fn split_header(raw: &[u8], magic: u32, ndims: usize) -> Result<(Vec<u32>, &[u8]), IdxError> {
    if raw.starts_with(&GZIP_PREFIX) {
        return Err(IdxError::Compressed);
    }
    if raw.len() < 4 {
        let mut padded = [0u8; 4];
        padded[..raw.len()].copy_from_slice(raw);
        return Err(IdxError::BadMagic {
            expected: magic,
            found: u32::from_be_bytes(padded),
        });
    }
    let found = be_u32(raw, 0);
    if found != magic {
        return Err(IdxError::BadMagic {
            expected: magic,
            found,
        });
    }
    let header_len = 4 + 4 * ndims;
    if raw.len() < header_len {
        return Err(IdxError::Truncated {
            needed: header_len as u64,
            available: raw.len() as u64,
        });
    }
    let dims: Vec<u32> = (0..ndims).map(|i| be_u32(raw, 4 + 4 * i)).collect();
    let payload_len = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(u64::from(d)))
        .filter(|&len| usize::try_from(len).is_ok_and(|n| n <= isize::MAX as usize))
        .ok_or_else(|| IdxError::OversizedHeader { dims: dims.clone() })?;
    let payload = &raw[header_len..];
    let available = payload.len() as u64;
    if available < payload_len {
        return Err(IdxError::Truncated {
            needed: header_len as u64 + payload_len,
            available: raw.len() as u64,
        });
    }
    if available > payload_len {
        return Err(IdxError::TrailingBytes {
            extra: available - payload_len,
        });
    }
    Ok((dims, payload))
}

/// Parses an IDX3 unsigned-byte image file (`count x rows x cols`).
pub fn parse_idx_images(raw: &[u8]) -> Result<FrameSet, IdxError> {
    let (dims, payload) = split_header(raw, IMAGES_MAGIC, 3)?;
    let (rows, cols) = (dims[1] as usize, dims[2] as usize);
    if rows == 0 || cols == 0 {
        return Err(IdxError::EmptyFrame { rows, cols });
    }
    Ok(FrameSet {
        width: cols,
        height: rows,
        data: payload.to_vec(),
    })
}

/// Parses an IDX1 unsigned-byte label file.
pub fn parse_idx_labels(raw: &[u8]) -> Result<LabelSet, IdxError> {
    let (_, payload) = split_header(raw, LABELS_MAGIC, 1)?;
    LabelSet::new(payload.to_vec())
}

/// Serializes a frame set back into IDX3 bytes.
pub fn write_idx_images(frames: &FrameSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + frames.data.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for dim in [frames.len(), frames.height, frames.width] {
        out.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    out.extend_from_slice(&frames.data);
    out
}

/// Serializes labels back into IDX1 bytes.
pub fn write_idx_labels(labels: &LabelSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(&labels.labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image_fixture(dims: [u32; 3], payload: &[u8]) -> Vec<u8> {
        let mut raw = vec![0x00, 0x00, 0x08, 0x03];
        for d in dims {
            raw.extend_from_slice(&d.to_be_bytes());
        }
        raw.extend_from_slice(payload);
        raw
    }

    #[test]
    fn parses_handcrafted_images() {
        let raw = image_fixture([2, 2, 2], &[0, 255, 7, 7, 1, 2, 3, 4]);
        let fs = parse_idx_images(&raw).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!((fs.height(), fs.width()), (2, 2));
        assert_eq!(fs.frame(0).unwrap(), &[0, 255, 7, 7]);
        assert_eq!(fs.frame(1).unwrap(), &[1, 2, 3, 4]);
        assert!(fs.frame(2).is_none());
    }

    #[test]
    fn short_payload_is_truncated() {
        let raw = image_fixture([2, 2, 2], &[0, 1, 2, 3, 4, 5]);
        assert!(matches!(
            parse_idx_images(&raw),
            Err(IdxError::Truncated {
                needed: 24,
                available: 22
            })
        ));
    }

    #[test]
    fn short_header_is_truncated() {
        assert!(matches!(
            parse_idx_images(&[0, 0, 8, 3, 0, 0]),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn wrong_magic() {
        let mut raw = image_fixture([1, 1, 1], &[9]);
        raw[3] = 0x01;
        assert_eq!(
            parse_idx_images(&raw),
            Err(IdxError::BadMagic {
                expected: IMAGES_MAGIC,
                found: LABELS_MAGIC
            })
        );
        assert!(matches!(
            parse_idx_images(&[]),
            Err(IdxError::BadMagic { .. })
        ));
    }

    #[test]
    fn gzip_input_is_rejected_distinctly() {
        assert_eq!(
            parse_idx_images(&[0x1f, 0x8b, 8, 0, 0, 0]),
            Err(IdxError::Compressed)
        );
    }

    #[test]
    fn overflowing_dimensions() {
        let raw = image_fixture([u32::MAX, u32::MAX, u32::MAX], &[]);
        assert!(matches!(
            parse_idx_images(&raw),
            Err(IdxError::OversizedHeader { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let raw = image_fixture([1, 1, 2], &[1, 2, 3]);
        assert_eq!(
            parse_idx_images(&raw),
            Err(IdxError::TrailingBytes { extra: 1 })
        );
    }

    #[test]
    fn labels() {
        let raw = [0, 0, 8, 1, 0, 0, 0, 3, 5, 0, 9];
        assert_eq!(parse_idx_labels(&raw).unwrap().as_slice(), &[5, 0, 9]);

        let bad = [0, 0, 8, 1, 0, 0, 0, 2, 5, 12];
        assert_eq!(
            parse_idx_labels(&bad),
            Err(IdxError::LabelOutOfRange {
                index: 1,
                value: 12
            })
        );

        let short = [0, 0, 8, 1, 0, 0, 0, 3, 5];
        assert!(matches!(
            parse_idx_labels(&short),
            Err(IdxError::Truncated { .. })
        ));
    }

    proptest! {
        #[test]
        fn image_round_trip(count in 0usize..5, rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let data: Vec<u8> = (0..count * rows * cols)
                .map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8)
                .collect();
            let raw = image_fixture([count as u32, rows as u32, cols as u32], &data);
            let parsed = parse_idx_images(&raw).unwrap();
            prop_assert_eq!(parse_idx_images(&raw).unwrap(), parsed.clone());
            prop_assert_eq!(write_idx_images(&parsed), raw);
        }

        #[test]
        fn label_round_trip(labels in proptest::collection::vec(0u8..10, 0..64)) {
            let set = LabelSet::new(labels).unwrap();
            let raw = write_idx_labels(&set);
            prop_assert_eq!(parse_idx_labels(&raw).unwrap(), set);
        }
    }
}
