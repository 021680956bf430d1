use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("productivity ladder is empty")]
    EmptyLadder,

    #[error("productivity levels must be strictly increasing (violated at index {index})")]
    NonMonotoneLevels { index: usize },

    #[error("aggregate demand {demand} is outside the feasible interval [{lower}, {upper}]")]
    InfeasibleDemand { demand: f64, lower: f64, upper: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    DomainError(String),

    #[error("no positivity-preserving step exists: {0}")]
    DomainViolation(String),

    #[error("solver did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("enumeration exceeds the cap of {cap} feasible vectors")]
    InstanceTooLarge { cap: usize },

    #[error("levels and demand are not integer multiples of the unit {unit}")]
    NonIntegerLadder { unit: f64 },

    #[error("constraint set contains no feasible occupation vector")]
    NoFeasibleState,

    #[error("quadrature failed to reach tolerance: estimated error {error:e} after {subdivisions} subdivisions")]
    QuadratureFailure { error: f64, subdivisions: usize },

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("line {line}: cuts must increase strictly and p_gt must not increase")]
    Monotonicity { line: u64 },

    #[error("dataset contains no usable points")]
    EmptyDataset,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad
    /// input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::QuadratureFailure { .. } | Error::DomainViolation(_)
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
