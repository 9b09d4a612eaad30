use thiserror::Error;

/// Errors raised by the physics and numerics layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}")]
    NotConverged { estimate: f64, error: f64 },

    #[error("factorization failed at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    #[error("unstable quadratic form: {0}")]
    Instability(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("positivity violated: min eigenvalue {0:e}")]
    Positivity(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
