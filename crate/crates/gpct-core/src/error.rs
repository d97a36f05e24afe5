//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Error, Debug)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A text input file could not be parsed. Carries the file and the
    /// 1-based line where parsing failed.
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    /// The requested prior family has no pointwise covariance function;
    /// only its spectral density is defined.
    #[error("covariance undefined for the {0} prior; use the spectral density")]
    DegenerateCovariance(&'static str),

    /// The Laplacian spectral density diverges at zero frequency.
    #[error("Laplacian spectral density is singular at zero frequency")]
    SpectralSingularity,

    /// A positive-definite factorization failed even after jitter
    /// escalation.
    #[error("Cholesky factorization failed (size {size}, final jitter {jitter:.3e}): {detail}")]
    Factorization {
        size: usize,
        jitter: f64,
        detail: String,
    },

    /// Shapes of two operands do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}
