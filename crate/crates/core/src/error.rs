use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate column `{name}` (index {index}): zero empirical norm")]
    DegenerateColumn { index: usize, name: String },

    #[error("invalid intercept mode: {0}")]
    InvalidMode(String),

    #[error("fold too small: {0}")]
    FoldTooSmall(String),

    #[error("near-singular design in nodewise regression for column {column}: sigma^2 = {sigma2:e}")]
    NearSingularDesign { column: usize, sigma2: f64 },

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("incomplete panel: {0}")]
    MissingData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
