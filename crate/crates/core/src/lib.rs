//! Converts frame datasets (MNIST IDX files) into Poisson spike-train event
//! datasets and checks the generated trains statistically.
//!
//! The pipeline is: [`idx`] parses images and labels, [`encoder`] turns each
//! frame into a pixels x bins [`SpikeMatrix`] using the generators in
//! [`spike_gen`], and [`evt`] persists matrices as dense (`EVTD`) or
//! address-event (`EVTM`) files and renders raster plots. [`stats`] runs
//! repeated trials and computes Fano factors and Poisson fits.

pub mod config;
pub mod encoder;
pub mod evt;
pub mod idx;
pub mod matrix;
pub mod rng;
pub mod spike_gen;
pub mod stats;

pub use config::{bin_count, spike_probability, ConfigError, EncodingConfig, Generator};
pub use encoder::{encode_dataset, encode_frame, EncodeError, Encoder};
pub use evt::{
    events_to_matrix, matrix_to_events, read_dense, read_evt, render_raster, write_dense,
    write_evt, EventRecord, EventStream, FormatError, StreamHeader,
};
pub use idx::{parse_idx_images, parse_idx_labels, FrameSet, IdxError, LabelSet};
pub use matrix::SpikeMatrix;
pub use rng::RngStream;
pub use spike_gen::{
    events_to_bins, generate_bernoulli_train, generate_isi_train, EventTimes, SpikeGenError,
    SpikeTrain,
};
pub use stats::{
    histogram, poisson_gof, summarize, trial_counts, GofResult, HistogramBin, StatsError,
    TrialCounts, TrialSummary,
};

/// Any failure from the pipeline, for callers that chain stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse: {0}")]
    Idx(#[from] IdxError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("generate: {0}")]
    SpikeGen(#[from] SpikeGenError),
    #[error("encode: {0}")]
    Encode(#[from] EncodeError),
    #[error("format: {0}")]
    Format(#[from] FormatError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
