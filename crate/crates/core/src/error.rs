use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a polynomial of degree {expected}, got degree {found}")]
    Degree { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("branch jump while continuing sqrt(q/z) from {from} to {to}")]
    BranchJump { from: Complex64, to: Complex64 },

    #[error("path passes within {distance:e} of the critical point {point}")]
    PathTooClose { point: Complex64, distance: f64 },

    #[error("degenerate quadratic differential: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("no measure: {0}")]
    NoMeasure(String),
}
