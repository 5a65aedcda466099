use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the rfflab library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated its documented domain. `name` is the offending
    /// parameter or config key.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A feature was (near-)constant on the training window.
    #[error("degenerate scale for feature {index}: sigma-hat = {scale:e} is below the floor")]
    DegenerateScale { index: usize, scale: f64 },

    #[error("degenerate denominator: reference sample has zero mean error")]
    DegenerateDenominator,

    /// Too many Monte-Carlo draws hit the small-ball tail of the denominator.
    #[error("limit-kernel oracle degenerate: {degenerate} of {total} draws below the floor")]
    DegenerateOracle { degenerate: usize, total: usize },

    /// The affine-independence (rank) condition failed for a generated panel.
    #[error("training window is affinely dependent: rank {rank} < {expected}")]
    AffineDependence { rank: usize, expected: usize },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's inputs rather than the run itself.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. } | Error::DimensionMismatch { .. } | Error::Config { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
