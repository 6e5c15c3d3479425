use thiserror::Error;

/// Errors raised by the lab's numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point outside the geometry domain: {0}")]
    DomainViolation(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate:e} after {evaluations} evaluations")]
    NonConvergence {
        estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("linear system is numerically singular: {0}")]
    Singular(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
