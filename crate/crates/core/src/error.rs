use thiserror::Error;

/// Failure modes shared by every solver stage.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the parameter region where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A root solve lost its sign-change bracket.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// A truncated series cannot meet the requested tolerance with the modes available.
    #[error("truncation error: {0}")]
    Truncation(String),
    /// Two finite-difference profiles are not on compatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// A run configuration failed validation.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
