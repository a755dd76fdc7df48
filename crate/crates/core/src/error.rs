use thiserror::Error;

use crate::linsys::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid boundary specification: {0}")]
    InvalidBoundary(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Iterative solve did not reach the requested tolerance. Carries the best
    /// iterate so callers can inspect or flush partial results.
    #[error(
        "linear solve did not converge after {} iterations (relative residual {:.3e})",
        .report.iterations,
        .report.relative_residual
    )]
    NotConverged { report: SolveReport, best: Vec<f64> },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("density {value} outside the domain of the material law")]
    DensityDomain { value: f64 },

    #[error("negative coefficient {value} on element {element}")]
    NegativeCoefficient { element: usize, value: f64 },

    #[error("no Dirichlet degrees of freedom: the state problem is singular")]
    EmptyDirichlet,

    #[error("measure has no positive mass")]
    ZeroMass,

    #[error("transport problem too large for the exact solver ({size} > {limit} support points)")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("Sinkhorn iterations did not converge (marginal violation {violation:.3e})")]
    SinkhornNotConverged { violation: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
