use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function (e.g. `u <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter is out of range (e.g. `α ∉ (1/2, 1)`).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Quadrature, factorization or another numerical procedure failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("partition needs {needed} nodes, above the cap of {cap}")]
    Capacity { needed: usize, cap: usize },

    #[error("kernel is not square integrable on (0, ∞): {0}")]
    NotSquareIntegrable(String),

    #[error("unsupported measure variant: {0}")]
    UnsupportedVariant(String),

    #[error(
        "Euler step unstable: dt * max(eta) = {product} >= 1; use the exact scheme or a smaller dt"
    )]
    Stability { product: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
