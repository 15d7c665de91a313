use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {dim} (at most {max} supported)")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("unsupported problem size: {0}")]
    UnsupportedSize(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
