use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DmrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DmrError {
    #[error("no samples")]
    NoSamples,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },

    #[error("degenerate scale: variance {0} is not positive")]
    DegenerateScale(f64),

    #[error("model has no data clouds")]
    EmptyModel,

    #[error("empty sample stream for class {0:?}")]
    EmptyStream(String),

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("class {label:?} has {count} sample(s); at least 2 are needed to split")]
    InsufficientClassSamples { label: String, count: usize },

    #[error("prototypes have not been ranked")]
    NotRanked,

    #[error("mega-clouds have not been computed; merge first")]
    MergeFirst,

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: usize, value: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },

    #[error("unsupported version: model format_version {found}, this build reads {supported}")]
    UnsupportedVersion { found: u64, supported: u32 },

    #[error("model integrity error at {path}: {message}")]
    Integrity { path: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl DmrError {
    pub(crate) fn integrity(path: impl Into<String>, message: impl Into<String>) -> Self {
        DmrError::Integrity {
            path: path.into(),
            message: message.into(),
        }
    }
}
