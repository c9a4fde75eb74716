use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum HedgeError {
    #[error("argument {value} lies outside the admissible strip ({lower}, {upper})")]
    DomainViolation { value: f64, lower: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("integrand tail does not decay: {0}")]
    TailDivergence(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid contour abscissa {abscissa}: {reason}")]
    InvalidAbscissa { abscissa: f64, reason: String },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, HedgeError>;

pub(crate) fn invalid(msg: impl Into<String>) -> HedgeError {
    HedgeError::InvalidParameter(msg.into())
}
