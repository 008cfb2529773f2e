use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what}: series did not converge within {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },

    #[error(
        "{what}: adaptive quadrature exhausted {intervals} intervals (error estimate {estimate:e})"
    )]
    Quadrature {
        what: &'static str,
        intervals: usize,
        estimate: f64,
    },

    #[error("covariance matrix is not positive definite after jitter {jitter:e} (relative to mean diagonal)")]
    Decomposition { jitter: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
