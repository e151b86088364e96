use thiserror::Error;

/// Error type shared by every module.
///
/// `Numerical` is reserved for failures of floating-point procedures on
/// mathematically valid input (factorization breakdown, variance more
/// negative than the clamp policy allows). Everything else is a caller
/// mistake and is reported before any numerics run.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain a kernel or measure is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched or empty shapes (point sets, weight vectors, grids).
    #[error("shape error: {0}")]
    Shape(String),

    /// A floating-point procedure failed beyond its recovery policy.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Operation is valid in general but not implemented for this
    /// kernel/measure/functional combination.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed kernel spec string or config value.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
