use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
#[derive(Debug, Error)]
pub enum FineError {
    #[error("format error: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("document `{0}` has zero total count")]
    DegenerateDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("support violation at index {index}: divergence is infinite")]
    Support { index: usize },

    #[error("metric `{metric}` cannot be used with {kind} densities")]
    MetricMismatch { metric: String, kind: String },

    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("insufficient spectrum: requested {requested} dimensions, {available} available")]
    InsufficientSpectrum { requested: usize, available: usize },

    #[error("class {0} is absent from the training split")]
    Stratification(i64),

    #[error("missing label for `{0}`")]
    MissingLabel(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl FineError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FineError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, FineError>;
