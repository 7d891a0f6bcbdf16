use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scalar root solve ran out of iterations; carries the last bracket.
    #[error("root solve did not converge for xi = {xi} after {iterations} iterations (bracket [{lo}, {hi}])")]
    RootNonConvergence {
        xi: f64,
        lo: f64,
        hi: f64,
        iterations: usize,
    },

    /// Time stepping failed after exhausting all step halvings.
    #[error("step failure at t = {time}: dt reduced to {dt} after {halvings} halvings, last Newton residual {residual} after {iterations} iterations")]
    StepFailure {
        time: f64,
        dt: f64,
        halvings: u32,
        residual: f64,
        iterations: usize,
    },

    /// Not enough data to evaluate a statistic.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
