use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("value {value} at index {index} outside {range}")]
    OutOfRange {
        value: f64,
        index: usize,
        range: &'static str,
    },

    #[error("window size must be odd and positive, got {0}")]
    InvalidWindow(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("netpbm: {0}")]
    Netpbm(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged at epoch {epoch} (last finite epoch {}): term `{term}` = {value}", .epoch.saturating_sub(1))]
    Divergence {
        epoch: usize,
        term: &'static str,
        value: f64,
    },

    #[error("gradient check failed for: {}", .0.join(", "))]
    GradCheck(Vec<String>),

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
