use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A quadrature, iteration, or table lookup failed to produce a
    /// trustworthy number (non-convergence, NaN, divergent integral).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Requested exponent sits in the regime where no positive solution
    /// exists; `threshold` is the critical exponent for (dim, s).
    #[error(
        "no positive solution regime: p = {p} with dim = {dim}, s = {s}; \
         positive solutions require p > {threshold} (nonexistence holds for 1 < p <= {threshold})"
    )]
    RegimeRejected {
        p: f64,
        threshold: f64,
        dim: usize,
        s: f64,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
