//! Crate-wide error type covering file formats, linear algebra, filtering and evaluation.

use std::path::PathBuf;

use thiserror::Error;

use crate::matrix_io::StreamKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input path does not exist.
    #[error("file not found: {path}")]
    MissingFile { path: PathBuf },

    /// Any other I/O failure, with the path it occurred on.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A text matrix row has a different field count than the first row.
    #[error("{path}: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    /// A text matrix field failed to parse as a decimal number.
    #[error("{path}: line {line}, field {field}: not a number: {text:?}")]
    NonNumericField {
        path: PathBuf,
        line: usize,
        field: usize,
        text: String,
    },

    /// A loaded value was NaN or infinite; matrices must hold finite values.
    #[error("{path}: non-finite value at element {index}")]
    NonFiniteValue { path: PathBuf, index: usize },

    /// Fewer than two frames in an input file.
    #[error("{path}: expected at least 2 frames, found {found}")]
    TooFewFrames { path: PathBuf, found: usize },

    /// A binary matrix file does not start with the expected magic bytes.
    #[error("{path}: bad magic bytes (expected {expected:?})")]
    BadMagic {
        path: PathBuf,
        expected: &'static str,
    },

    /// A binary matrix file is shorter than its header declares.
    #[error("{path}: truncated payload: need {expected} bytes, file holds {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    /// A binary matrix file has bytes left over after the declared payload.
    #[error("{path}: {extra} trailing bytes after declared payload")]
    TrailingBytes { path: PathBuf, extra: u64 },

    /// A matrix or waveform constructed in memory violates its shape rules.
    #[error("invalid shape: {reason}")]
    InvalidShape { reason: String },

    /// All frames are identical: the covariance is zero and no principal axis exists.
    #[error("degenerate matrix: all frames identical, covariance is zero")]
    DegenerateMatrix,

    /// Requested more principal components than the matrix supports.
    #[error("k = {k} exceeds the maximum component count {max}")]
    KTooLarge { k: usize, max: usize },

    /// A matrix's feature dimension does not match the model it is used with.
    #[error("dimension mismatch: matrix dim {matrix_dim}, model dim {model_dim}")]
    DimensionMismatch { matrix_dim: usize, model_dim: usize },

    /// Asked to project onto a component the model does not hold.
    #[error("component index {index} out of range for a model with {count} axes")]
    BadComponentIndex { index: usize, count: usize },

    /// Band-filter threshold outside the valid range for the spectrum length.
    #[error("alpha {alpha} outside [2, {max}] for length-{len} spectrum")]
    AlphaOutOfRange { alpha: u32, max: u32, len: usize },

    /// A configuration value violates its documented range.
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    /// The selected fusion mode needs a stream that was not supplied.
    #[error("missing {stream} stream for the selected fusion mode")]
    MissingStream { stream: StreamKind },

    /// Spatial and temporal matrices disagree on frame count.
    #[error("frame count mismatch: spatial has {spatial} frames, temporal has {temporal}")]
    FrameCountMismatch { spatial: usize, temporal: usize },

    /// A synthetic-fixture spec violates its constraints.
    #[error("invalid synth spec: {reason}")]
    SpecInvalid { reason: String },

    /// An oracle was called on an input larger than it is rated for.
    #[error("input size {size} exceeds oracle limit {limit}")]
    SizeExceedsOracleLimit { size: usize, limit: usize },

    /// A manifest file failed to parse as JSON.
    #[error("manifest {path}: {source}")]
    ManifestParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
