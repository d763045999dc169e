use thiserror::Error;

use crate::params::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters or policy violate the stability / capacity constraints.
    #[error("invalid input: {0}")]
    Invalid(ValidationReport),

    /// A single malformed argument (out-of-range state, bad threshold, ...).
    #[error("rejected input: {0}")]
    Rejected(String),

    /// The patience constraint cannot be met.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The truncated chain still carried too much boundary mass at the size cap.
    #[error("truncation failed at {q1_max}x{q2_max}: boundary mass {boundary_mass:e}")]
    Truncation {
        q1_max: usize,
        q2_max: usize,
        boundary_mass: f64,
    },

    /// A proven relation failed numerically; the result is not trustworthy.
    #[error("theorem check failed: {0}")]
    TheoremViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
