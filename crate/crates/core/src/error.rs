use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("range error in {what}: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("nonpositive implicit pivot {pivot:e}; reduce the step size")]
    StepSize { pivot: f64 },

    #[error("quadrature failed in {what}: {detail}")]
    Quadrature { what: &'static str, detail: String },

    #[error("linear solver breakdown after {iterations} iterations (relative residual {residual:e})")]
    SolverBreakdown { iterations: usize, residual: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("nonlinearity left its domain at u = {value:e}")]
    NonlinearDomain { value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        what,
        detail: detail.into(),
    }
}
