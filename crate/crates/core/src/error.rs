use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SeldError>;

#[derive(Debug, Error)]
pub enum SeldError {
    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("block length mismatch: expected {expected} samples per channel, found {found}")]
    BlockLengthMismatch { expected: usize, found: usize },

    #[error("insufficient blocks: window needs {needed}, buffer holds {available}")]
    InsufficientBlocks { needed: usize, available: usize },

    #[error("direction vector is not unit length (norm {0})")]
    NonUnitDirection(f64),

    #[error("angular distance needs unit vectors (norms {0}, {1})")]
    NonUnitInput(f64, f64),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need at least 2 channels, found {0}")]
    TooFewChannels(usize),

    #[error("feature spec mismatch: backend expects {expected}, got {found}")]
    SpecMismatch { expected: String, found: String },

    #[error("backend failure: {0}")]
    BackendFailure(String),

    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),

    #[error("layer graph shape inconsistent at layer {index}: {reason}")]
    ShapeInconsistent { index: usize, reason: String },

    #[error("frame resolution mismatch: {0} s vs {1} s")]
    ResolutionMismatch(f64, f64),

    #[error("value out of range: {0}")]
    RangeViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("reference set has no events")]
    EmptyReference,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<hound::Error> for SeldError {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) => SeldError::Io(e),
            other => SeldError::MalformedWav(other.to_string()),
        }
    }
}
