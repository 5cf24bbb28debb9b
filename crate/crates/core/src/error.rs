use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("quadrature did not converge: {context} (achieved error {achieved:e}, requested {requested:e})")]
    QuadratureNonConvergence {
        context: String,
        achieved: f64,
        requested: f64,
    },

    #[error("exponential action did not converge: residual {residual:e} after {iterations} terms")]
    ExpNonConvergence { residual: f64, iterations: usize },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("value {value} outside [{lo}, {hi}]: {context}")]
    RangeViolation {
        value: f64,
        lo: f64,
        hi: f64,
        context: String,
    },

    #[error("cache format error: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::NumericDomain(msg.into())
    }
}
