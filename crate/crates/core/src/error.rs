use thiserror::Error;

/// Errors raised by the samplers, exact laws and verification machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not a partition: {0}")]
    NotAPartition(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("chi-square bin violation: {0}")]
    BinSize(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
