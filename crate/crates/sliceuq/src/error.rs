use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing header key `{0}`")]
    MissingHeaderKey(String),
    #[error("bad header value for `{key}`: {value}")]
    BadHeaderValue { key: String, value: String },
    #[error("unsupported element type `{0}`")]
    UnsupportedElementType(String),
    #[error("raw payload size mismatch: header declares {expected} bytes, file has {actual}")]
    RawSizeMismatch { expected: usize, actual: usize },
    #[error("malformed CSV row {row}: {reason}")]
    MalformedCsv { row: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimsMismatch(String),
    #[error("invalid spacing: components must be > 0")]
    InvalidSpacing,
    #[error("mask is empty")]
    EmptyMask,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate fit: feature is constant")]
    DegenerateFit,
    #[error("model targets {expected} but {actual} was requested")]
    ModelMismatch { expected: String, actual: String },
    #[error("slice index {0} out of range")]
    SliceOutOfRange(usize),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
