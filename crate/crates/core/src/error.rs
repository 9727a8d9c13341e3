use thiserror::Error;

/// Errors raised by the model crates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state outside the model domain: {0}")]
    Domain(String),

    #[error("non-finite value in component {component} at step {step}")]
    NonFinite { component: usize, step: usize },

    #[error("matrix is not positive semi-definite (pivot {pivot} = {value:e})")]
    NotPositiveSemiDefinite { pivot: usize, value: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("accounting identity violated: {0}")]
    Identity(String),

    #[error("ledger rejected event: {0}")]
    Ledger(String),

    #[error("singular linear system")]
    Singular,
}

pub type Result<T> = std::result::Result<T, CircuitError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> CircuitError {
    CircuitError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
