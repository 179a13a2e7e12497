use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the navigation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid panorama: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pose ({x:.1}, {y:.1}) lies outside the world extent {extent:.1} mm")]
    OutsideWorld { x: f64, y: f64, extent: f64 },

    #[error("empty result: {0}")]
    Empty(String),

    #[error("training diverged: loss became NaN at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("malformed {what} at {path}: {msg}")]
    Malformed {
        what: &'static str,
        path: PathBuf,
        msg: String,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
