//! Crate-wide error type and result alias.

use thiserror::Error;

/// Convenient alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type covering construction, validation, numerics, and I/O.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A parameter lies outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input lengths or shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The input is too degenerate for the requested computation
    /// (e.g. constant phenotype, empty table, sample too small).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A design matrix does not have full column rank.
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// A series or numerical integration stopped before reaching its target
    /// accuracy; the achieved bound is reported so callers can decide whether
    /// the value is still usable.
    #[error("{what} failed to converge: achieved error {achieved:.3e}, target {target:.3e}")]
    NonConvergence {
        /// Short description of the quantity being evaluated.
        what: &'static str,
        /// Error bound actually reached.
        achieved: f64,
        /// Error bound that was requested.
        target: f64,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed content in an input file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        /// File being parsed.
        path: String,
        /// 1-based line number (0 when not line-oriented).
        line: usize,
        /// Description of the problem.
        msg: String,
    },
}

impl Error {
    /// Shorthand used throughout the crate.
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Shorthand for dimension mismatches.
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Shorthand for degenerate-input errors.
    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }
}
