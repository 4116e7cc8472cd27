use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmestError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance descriptor is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("cannot split {n} samples into {t} batches")]
    TooFewSamples { n: usize, t: usize },

    #[error("sample budget too small: need at least N = {min_n} samples, have {have}")]
    InfeasibleN { min_n: usize, have: usize },

    #[error("batch supplier exhausted after {drawn} batches")]
    SupplierExhausted { drawn: usize },

    #[error("rejection sampling accepted no samples at dimension {dim}")]
    EmptyAcceptance { dim: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ground truth is not attached to this dataset")]
    MissingTruth,

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EmestError {
    fn from(e: std::io::Error) -> Self {
        EmestError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EmestError>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> EmestError {
    EmestError::InvalidParam {
        field: field.to_string(),
        reason: reason.into(),
    }
}
