//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus handling, model training and detection.
#[derive(Debug, Error)]
pub enum Error {
    /// Markup or data-file syntax error, with position information.
    #[error("parse error at line {line}, offset {offset}: {msg}")]
    Parse {
        line: usize,
        offset: usize,
        msg: String,
    },

    /// Invalid configuration or parameter value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data that is structurally valid but unusable (empty corpus,
    /// too few utterances for the requested fold count, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A candidate position outside the search window of a detection stage.
    #[error("window violation: {0}")]
    Window(String),

    /// A feature vector offered to a classifier trained on a different
    /// stage or feature manifest.
    #[error("feature manifest mismatch: {0}")]
    ManifestMismatch(String),

    /// Persisted model/forest file with a bad magic header or version.
    #[error("unsupported model format: {0}")]
    Format(String),

    /// Artifacts in a model bundle that were not trained together.
    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
