use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image dimensions {width}x{height}: {reason}")]
    Dimensions {
        width: usize,
        height: usize,
        reason: String,
    },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("image contains non-finite samples")]
    NonFinite,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("time went backwards: {now} < {last}")]
    TimeRegression { now: f64, last: f64 },
    #[error("failed to read frame {path}: {reason}")]
    Frame { path: PathBuf, reason: String },
    #[error("{0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
