//! Error type shared by all solver and model routines.

use thiserror::Error;

/// Errors produced by the forward model, dictionary synthesis, solvers and
/// the material inversion chain.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The selected dictionary columns are numerically dependent.
    #[error(
        "rank-deficient least-squares system: condition estimate {cond:.3e} exceeds {limit:.1e}"
    )]
    RankDeficient { cond: f64, limit: f64 },

    /// The residual constraint cannot be met by any coefficient vector.
    #[error("infeasible residual constraint: best achievable residual energy {min_residual:.3e} exceeds epsilon {epsilon:.3e}")]
    Infeasible { min_residual: f64, epsilon: f64 },

    /// An operation that needs recovered atoms was given an empty support.
    #[error("empty support: {0}")]
    EmptySupport(String),

    /// A recovered quantity has no physical interpretation.
    #[error("non-physical result: {0}")]
    NonPhysical(String),
}

pub type CoreResult<T> = Result<T, CoreError>;

impl CoreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }
}
