//! `EVTM` (event records) and `EVTD` (bit-packed dense) containers.
//!
//! Both start with a 4-byte ASCII magic and a little-endian `u16` version,
//! followed by one record per image. Every image record opens with the same
//! 17-byte little-endian sub-header:
//!
//! ```text
//! image_index u32 | label u8 (255 = none) | pixels u16 | bins u16
//! | delta_t_us u32 | record_count u32
//! ```
//!
//! In `EVTM` the sub-header is followed by `record_count` packed
//! `(address u16, timestamp_us u32)` records. In `EVTD` it is followed by
//! `ceil(pixels * bins / 8)` bytes of row-major bit-packed cells (bit `k` of
//! byte `j` is cell `8j + k`), and `record_count` holds the number of set
//! cells.

use std::io::{self, Read, Write};

use super::events::{events_to_matrix, matrix_to_events, EventRecord, EventStream, StreamHeader};
use super::{FormatError, NO_LABEL};
use crate::matrix::{packed_len, SpikeMatrix};

pub const EVENTS_MAGIC: [u8; 4] = *b"EVTM";
pub const DENSE_MAGIC: [u8; 4] = *b"EVTD";
pub const FORMAT_VERSION: u16 = 1;
pub const SUB_HEADER_LEN: usize = 17;
const RECORD_LEN: usize = 6;

fn label_byte(label: Option<u8>) -> Result<u8, FormatError> {
    match label {
        None => Ok(NO_LABEL),
        Some(NO_LABEL) => Err(FormatError::ReservedLabel(NO_LABEL)),
        Some(l) => Ok(l),
    }
}

fn encode_sub_header(
    h: &StreamHeader,
    record_count: usize,
) -> Result<[u8; SUB_HEADER_LEN], FormatError> {
    let count = u32::try_from(record_count).map_err(|_| FormatError::FieldOverflow {
        field: "record_count",
        value: record_count as u64,
    })?;
    let mut buf = [0u8; SUB_HEADER_LEN];
    buf[0..4].copy_from_slice(&h.image_index.to_le_bytes());
    buf[4] = label_byte(h.label)?;
    buf[5..7].copy_from_slice(&h.pixels.to_le_bytes());
    buf[7..9].copy_from_slice(&h.bins.to_le_bytes());
    buf[9..13].copy_from_slice(&h.delta_t_us.to_le_bytes());
    buf[13..17].copy_from_slice(&count.to_le_bytes());
    Ok(buf)
}

fn decode_sub_header(buf: &[u8; SUB_HEADER_LEN]) -> (StreamHeader, u32) {
    let u16_at = |i: usize| u16::from_le_bytes([buf[i], buf[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let header = StreamHeader {
        image_index: u32_at(0),
        label: (buf[4] != NO_LABEL).then_some(buf[4]),
        pixels: u16_at(5),
        bins: u16_at(7),
        delta_t_us: u32_at(9),
    };
    (header, u32_at(13))
}

/// Reads as many bytes as available up to `buf.len()`.
fn fill(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<(), FormatError> {
    if fill(r, buf)? < buf.len() {
        return Err(FormatError::Truncated(what));
    }
    Ok(())
}

fn write_file_header(w: &mut impl Write, magic: [u8; 4]) -> io::Result<()> {
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())
}

fn magic_string(m: &[u8]) -> String {
    String::from_utf8_lossy(m).into_owned()
}

/// Reads and checks magic and version; returns which format was found.
fn read_file_header(r: &mut impl Read, accept: &[DatasetKind]) -> Result<DatasetKind, FormatError> {
    let mut magic = [0u8; 4];
    let n = fill(r, &mut magic)?;
    let kind = DatasetKind::from_magic(&magic[..n]).filter(|k| accept.contains(k));
    let Some(kind) = kind else {
        return Err(FormatError::BadMagic {
            expected: accept
                .iter()
                .map(|k| magic_string(&k.magic()))
                .collect::<Vec<_>>()
                .join(" or "),
            found: magic_string(&magic[..n]),
        });
    };
    let mut version = [0u8; 2];
    read_exact_or(r, &mut version, "file header")?;
    let version = u16::from_le_bytes(version);
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    Ok(kind)
}

/// Reads the next sub-header, or `None` at a clean end of file.
fn next_sub_header(r: &mut impl Read) -> Result<Option<(StreamHeader, u32)>, FormatError> {
    let mut buf = [0u8; SUB_HEADER_LEN];
    match fill(r, &mut buf)? {
        0 => Ok(None),
        SUB_HEADER_LEN => Ok(Some(decode_sub_header(&buf))),
        _ => Err(FormatError::Truncated("image sub-header")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Events,
    Dense,
}

impl DatasetKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            DatasetKind::Events => EVENTS_MAGIC,
            DatasetKind::Dense => DENSE_MAGIC,
        }
    }

    pub fn from_magic(bytes: &[u8]) -> Option<Self> {
        match bytes {
            b"EVTM" => Some(DatasetKind::Events),
            b"EVTD" => Some(DatasetKind::Dense),
            _ => None,
        }
    }
}

pub struct EvtWriter<W: Write> {
    inner: W,
}

impl<W: Write> EvtWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, FormatError> {
        write_file_header(&mut inner, EVENTS_MAGIC)?;
        Ok(Self { inner })
    }

    pub fn write_stream(&mut self, s: &EventStream) -> Result<(), FormatError> {
        let sub = encode_sub_header(&s.header, s.records.len())?;
        self.inner.write_all(&sub)?;
        let mut body = Vec::with_capacity(s.records.len() * RECORD_LEN);
        for r in &s.records {
            body.extend_from_slice(&r.address.to_le_bytes());
            body.extend_from_slice(&r.timestamp_us.to_le_bytes());
        }
        self.inner.write_all(&body)?;
        Ok(())
    }

    pub fn write_matrix(&mut self, m: &SpikeMatrix) -> Result<(), FormatError> {
        self.write_stream(&matrix_to_events(m)?)
    }

    pub fn finish(mut self) -> Result<W, FormatError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct DenseWriter<W: Write> {
    inner: W,
}

impl<W: Write> DenseWriter<W> {
    pub fn new(mut inner: W) -> Result<Self, FormatError> {
        write_file_header(&mut inner, DENSE_MAGIC)?;
        Ok(Self { inner })
    }

    pub fn write_matrix(&mut self, m: &SpikeMatrix) -> Result<(), FormatError> {
        let header = StreamHeader::of(m)?;
        let sub = encode_sub_header(&header, m.spike_count())?;
        self.inner.write_all(&sub)?;
        self.inner.write_all(m.packed())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, FormatError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streams image records out of an `EVTM` file.
pub struct EvtReader<R: Read> {
    inner: R,
    done: bool,
}

impl<R: Read> EvtReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        read_file_header(&mut inner, &[DatasetKind::Events])?;
        Ok(Self { inner, done: false })
    }

    fn read_body(&mut self, header: StreamHeader, count: u32) -> Result<EventStream, FormatError> {
        let mut records = Vec::new();
        let mut buf = [0u8; RECORD_LEN * 1024];
        let mut remaining = count as usize;
        while remaining > 0 {
            let n = remaining.min(1024);
            let chunk = &mut buf[..n * RECORD_LEN];
            read_exact_or(&mut self.inner, chunk, "event records")?;
            records.extend(chunk.chunks_exact(RECORD_LEN).map(|r| EventRecord {
                address: u16::from_le_bytes([r[0], r[1]]),
                timestamp_us: u32::from_le_bytes([r[2], r[3], r[4], r[5]]),
            }));
            remaining -= n;
        }
        Ok(EventStream { header, records })
    }
}

impl<R: Read> Iterator for EvtReader<R> {
    type Item = Result<EventStream, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match next_sub_header(&mut self.inner) {
            Ok(None) => None,
            Ok(Some((header, count))) => Some(self.read_body(header, count)),
            Err(e) => Some(Err(e)),
        };
        self.done = !matches!(item, Some(Ok(_)));
        item
    }
}

/// Streams matrices out of an `EVTD` file.
pub struct DenseReader<R: Read> {
    inner: R,
    done: bool,
}

impl<R: Read> DenseReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        read_file_header(&mut inner, &[DatasetKind::Dense])?;
        Ok(Self { inner, done: false })
    }

    fn read_body(&mut self, h: StreamHeader, count: u32) -> Result<SpikeMatrix, FormatError> {
        let (pixels, bins) = (usize::from(h.pixels), usize::from(h.bins));
        let mut bits = vec![0u8; packed_len(pixels, bins)];
        read_exact_or(&mut self.inner, &mut bits, "dense payload")?;
        let m = SpikeMatrix::from_packed(pixels, bins, h.delta_t_us, h.image_index, h.label, bits)
            .ok_or_else(|| {
                FormatError::Corrupt(format!("image {}: padding bits set", h.image_index))
            })?;
        if m.spike_count() != count as usize {
            return Err(FormatError::Corrupt(format!(
                "image {}: header counts {} spikes, payload holds {}",
                h.image_index,
                count,
                m.spike_count()
            )));
        }
        Ok(m)
    }
}

impl<R: Read> Iterator for DenseReader<R> {
    type Item = Result<SpikeMatrix, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match next_sub_header(&mut self.inner) {
            Ok(None) => None,
            Ok(Some((header, count))) => Some(self.read_body(header, count)),
            Err(e) => Some(Err(e)),
        };
        self.done = !matches!(item, Some(Ok(_)));
        item
    }
}

/// Reads either container, yielding matrices. Event streams are decoded
/// through [`events_to_matrix`].
pub enum DatasetReader<R: Read> {
    Events(EvtReader<R>),
    Dense(DenseReader<R>),
}

impl<R: Read> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        match read_file_header(&mut inner, &[DatasetKind::Dense, DatasetKind::Events])? {
            DatasetKind::Events => Ok(DatasetReader::Events(EvtReader { inner, done: false })),
            DatasetKind::Dense => Ok(DatasetReader::Dense(DenseReader { inner, done: false })),
        }
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            DatasetReader::Events(_) => DatasetKind::Events,
            DatasetReader::Dense(_) => DatasetKind::Dense,
        }
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<SpikeMatrix, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            DatasetReader::Events(r) => r.next().map(|s| s.and_then(|s| events_to_matrix(&s))),
            DatasetReader::Dense(r) => r.next(),
        }
    }
}

pub fn write_evt<W: Write>(streams: &[EventStream], sink: W) -> Result<W, FormatError> {
    let mut w = EvtWriter::new(sink)?;
    for s in streams {
        w.write_stream(s)?;
    }
    w.finish()
}

pub fn read_evt<R: Read>(source: R) -> Result<Vec<EventStream>, FormatError> {
    EvtReader::new(source)?.collect()
}

pub fn write_dense<W: Write>(matrices: &[SpikeMatrix], sink: W) -> Result<W, FormatError> {
    let mut w = DenseWriter::new(sink)?;
    for m in matrices {
        w.write_matrix(m)?;
    }
    w.finish()
}

pub fn read_dense<R: Read>(source: R) -> Result<Vec<SpikeMatrix>, FormatError> {
    DenseReader::new(source)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_stream(image_index: u32) -> EventStream {
        EventStream {
            header: StreamHeader {
                image_index,
                label: None,
                pixels: 784,
                bins: 100,
                delta_t_us: 1000,
            },
            records: vec![],
        }
    }

    #[test]
    fn single_empty_image_layout() {
        let bytes = write_evt(&[empty_stream(0)], Vec::new()).unwrap();
        // magic(4) + version(2) + sub-header(17), no records
        assert_eq!(bytes.len(), 23);
        let expected: &[u8] = &[
            b'E', b'V', b'T', b'M', 1, 0, // file header
            0, 0, 0, 0,   // image_index
            255, // label: none
            0x10, 0x03, // pixels = 784
            100, 0, // bins
            0xe8, 0x03, 0, 0, // delta_t_us = 1000
            0, 0, 0, 0, // record_count
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn record_layout() {
        let mut s = empty_stream(7);
        s.header.label = Some(3);
        s.records.push(EventRecord {
            address: 0x0102,
            timestamp_us: 0x0a0b0c0d,
        });
        let bytes = write_evt(&[s.clone()], Vec::new()).unwrap();
        assert_eq!(&bytes[6..11], &[7, 0, 0, 0, 3]);
        assert_eq!(&bytes[19..23], &[1, 0, 0, 0]);
        assert_eq!(&bytes[23..], &[0x02, 0x01, 0x0d, 0x0c, 0x0b, 0x0a]);
        assert_eq!(read_evt(&bytes[..]).unwrap(), vec![s]);
    }

    #[test]
    fn dense_layout() {
        let mut m = SpikeMatrix::new(784, 100, 1000, 2, Some(9));
        m.set(0, 9, true); // cell 9: byte 1, bit 1
        let bytes = write_dense(&[m.clone()], Vec::new()).unwrap();
        assert_eq!(bytes.len(), 6 + 17 + 9800);
        assert_eq!(&bytes[..6], b"EVTD\x01\x00");
        assert_eq!(&bytes[19..23], &[1, 0, 0, 0]);
        assert_eq!(bytes[23], 0);
        assert_eq!(bytes[24], 0b10);
        assert_eq!(read_dense(&bytes[..]).unwrap(), vec![m]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            read_evt(&b""[..]),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            read_dense(&b""[..]),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            read_dense(&b"EVTM\x01\x00"[..]),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            read_evt(&b"EVTM\x02\x00"[..]),
            Err(FormatError::UnsupportedVersion(2))
        ));
        assert!(matches!(
            read_evt(&b"EVTM\x01"[..]),
            Err(FormatError::Truncated(_))
        ));
        assert_eq!(read_evt(&b"EVTM\x01\x00"[..]).unwrap(), vec![]);
    }

    #[test]
    fn truncation_detected_everywhere() {
        let mut s = empty_stream(0);
        s.records = (0..5)
            .map(|a| EventRecord {
                address: a,
                timestamp_us: 0,
            })
            .collect();
        let bytes = write_evt(&[s], Vec::new()).unwrap();
        for cut in 7..bytes.len() {
            assert!(
                matches!(read_evt(&bytes[..cut]), Err(FormatError::Truncated(_))),
                "cut at {cut}"
            );
        }
        let dense = write_dense(&[SpikeMatrix::new(3, 3, 1, 0, None)], Vec::new()).unwrap();
        for cut in 7..dense.len() {
            assert!(matches!(
                read_dense(&dense[..cut]),
                Err(FormatError::Truncated(_))
            ));
        }
    }

    #[test]
    fn dense_count_mismatch_is_corrupt() {
        let mut m = SpikeMatrix::new(4, 4, 1, 0, None);
        m.set(1, 1, true);
        let mut bytes = write_dense(&[m], Vec::new()).unwrap();
        bytes[19] = 2;
        assert!(matches!(
            read_dense(&bytes[..]),
            Err(FormatError::Corrupt(_))
        ));
    }

    #[test]
    fn reserved_label_rejected() {
        let m = SpikeMatrix::new(1, 1, 1, 0, Some(255));
        assert!(matches!(
            write_dense(&[m], Vec::new()),
            Err(FormatError::ReservedLabel(255))
        ));
    }

    #[test]
    fn dataset_reader_detects_kind() {
        let mut m = SpikeMatrix::new(5, 6, 250, 1, Some(0));
        m.set(4, 5, true);
        m.set(0, 2, true);
        let dense = write_dense(&[m.clone()], Vec::new()).unwrap();
        let events = write_evt(&[matrix_to_events(&m).unwrap()], Vec::new()).unwrap();
        let r = DatasetReader::new(&dense[..]).unwrap();
        assert_eq!(r.kind(), DatasetKind::Dense);
        assert_eq!(r.collect::<Result<Vec<_>, _>>().unwrap(), vec![m.clone()]);
        let r = DatasetReader::new(&events[..]).unwrap();
        assert_eq!(r.kind(), DatasetKind::Events);
        assert_eq!(r.collect::<Result<Vec<_>, _>>().unwrap(), vec![m]);
        assert!(matches!(
            DatasetReader::new(&b"P1\n"[..]),
            Err(FormatError::BadMagic { .. })
        ));
    }
}
