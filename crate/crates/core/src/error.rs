use thiserror::Error;

/// Errors raised by measure construction, transport and operator routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A measure or field failed its structural invariants.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The map is not monotone on the cells it was declared with.
    #[error("unsupported map: {0}")]
    UnsupportedMap(String),

    /// `Id + t v` folds over itself, so the pushed measure has no density.
    #[error("fold at x = {x}: 1 + t v'(x) = {jacobian}")]
    Fold { x: f64, jacobian: f64 },

    /// A brute-force routine was asked for more atoms than it enumerates.
    #[error("capacity exceeded: {len} atoms (limit {limit})")]
    Capacity { len: usize, limit: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An iteration stopped before reaching its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
