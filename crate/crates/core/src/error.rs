use thiserror::Error;

use crate::methods::MethodId;
use crate::population::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The population parameters break one or more invariants.
    #[error("invalid population: {0}")]
    InvalidSpec(ValidationReport),

    /// The reference variable is constant, so Se or Sp is a 0/0 ratio.
    #[error("{method}: degenerate reference, P(reference = 1) = {p_positive}")]
    DegenerateReference { method: MethodId, p_positive: f64 },

    /// A square root or a ratio in the latent class closed forms is undefined.
    #[error("latent class estimator undefined: {0}")]
    UndefinedEstimator(String),

    #[error("prevalence equation has no root in (0, 0.5)")]
    NoRoot,

    #[error("method {0} is not supported by this operation")]
    UnsupportedMethod(MethodId),

    /// The covariance constraints leave nothing admissible along one axis.
    #[error("empty admissible region: {0}")]
    EmptyRegion(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("invalid sweep axis: {0}")]
    InvalidAxis(String),

    #[error("malformed sweep data: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code, shared by the sweep skip reasons and the API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSpec(report) if report.is_bounds_only() => "OUT_OF_BOUNDS",
            Error::InvalidSpec(_) => "INVALID_SPEC",
            Error::EmptyRegion(_) => "OUT_OF_BOUNDS",
            Error::DegenerateReference { .. } => "DEGENERATE_REFERENCE",
            Error::UndefinedEstimator(_) => "UNDEFINED_ESTIMATOR",
            Error::NoRoot => "NO_ROOT",
            Error::UnsupportedMethod(_)
            | Error::Precondition(_)
            | Error::InvalidAxis(_)
            | Error::Format(_) => "BAD_REQUEST",
        }
    }
}
