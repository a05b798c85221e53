use thiserror::Error;

/// Errors produced by the reducers, graph machinery and evaluation protocol.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite values in {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("oracle failed: {0}")]
    Oracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
