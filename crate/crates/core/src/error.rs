use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outflow regime: {0}")]
    Outflow(String),
    #[error("1/a is not integrable at the origin: {0}")]
    NonIntegrableRate(String),
    #[error("degenerate rate: a vanishes at x = {0:e}")]
    DegenerateRate(f64),
    #[error("inflow condition violated: {0}")]
    InflowViolation(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fixed point did not converge: {0}")]
    WindowFailure(String),
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
