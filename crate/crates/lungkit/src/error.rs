//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// All failure modes of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("cannot parse metadata from file name `{0}`")]
    MetadataParse(String),

    #[error("recording too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label syntax error at {origin}:{line}: {msg}")]
    Syntax {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error("reference interval set has zero duration")]
    EmptyReference,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("too few subjects: have {have}, need {need}")]
    TooFewSubjects { have: usize, need: usize },

    #[error("event [{start}, {end}) lies outside the frame grid [0, {max})")]
    OutOfRange { start: f64, end: f64, max: f64 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("model file version mismatch: {0}")]
    VersionMismatch(String),

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("incomplete runs: expected {expected} metric sets, got {got}")]
    IncompleteRuns { expected: usize, got: usize },
}

impl Error {
    /// Wrap an i/o error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
