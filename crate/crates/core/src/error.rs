use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are split into configuration-class errors (bad input shapes,
/// invalid hyperparameters, malformed files) and runtime errors (numerical
/// failures, I/O). The CLI maps the former to exit code 2 and the latter to 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("label alignment: expected {expected} labels, found {found}")]
    Alignment { expected: usize, found: usize },

    #[error("insufficient frames: need at least {needed}, have {found}")]
    InsufficientFrames { needed: usize, found: usize },

    #[error("numerical error at step {step}: {msg}")]
    Numerical { step: usize, msg: String },

    #[error("{path}:{line}: {msg}")]
    Manifest { path: PathBuf, line: usize, msg: String },

    #[error("malformed {kind} file: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav {path}: {msg}")]
    Wav { path: PathBuf, msg: String },

    #[error("utterance {id}: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("trial with seed {seed}: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_utterance(self, id: &str) -> Self {
        Error::Utterance { id: id.to_string(), source: Box::new(self) }
    }

    /// True for errors caused by invalid user input or configuration rather
    /// than by a failure while computing.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Shape(_)
            | Error::Alignment { .. }
            | Error::Manifest { .. }
            | Error::Format { .. } => true,
            Error::Utterance { source, .. } | Error::Trial { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
