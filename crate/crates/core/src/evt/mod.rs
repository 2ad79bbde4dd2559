//! Event-stream and dense views of encoded images, their file formats, and
//! raster rendering.

mod events;
mod files;
mod raster;

pub use events::{events_to_matrix, matrix_to_events, EventRecord, EventStream, StreamHeader};
pub use files::{
    read_dense, read_evt, write_dense, write_evt, DatasetKind, DatasetReader, DenseReader,
    DenseWriter, EvtReader, EvtWriter, DENSE_MAGIC, EVENTS_MAGIC, FORMAT_VERSION, SUB_HEADER_LEN,
};
pub use raster::render_raster;

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("file ends inside {0}")]
    Truncated(&'static str),
    #[error("{field} = {value} does not fit the file header")]
    FieldOverflow { field: &'static str, value: u64 },
    #[error("label {0} is reserved; 255 encodes a missing label")]
    ReservedLabel(u8),
    #[error("record {index} (address {address}, timestamp {timestamp_us} us) is outside the {pixels}x{bins} grid")]
    RecordOutOfBounds {
        index: usize,
        address: u16,
        timestamp_us: u32,
        pixels: u16,
        bins: u16,
    },
    #[error(
        "record {index} timestamp {timestamp_us} us is not a multiple of delta_t {delta_t_us} us"
    )]
    MisalignedTimestamp {
        index: usize,
        timestamp_us: u32,
        delta_t_us: u32,
    },
    #[error("records are not strictly sorted by (timestamp, address) at position {0}")]
    UnsortedStream(usize),
    #[error("corrupt image record: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Label byte used on disk for "no label".
pub const NO_LABEL: u8 = 255;
