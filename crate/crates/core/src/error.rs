use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate sample set: {0}")]
    Degenerate(String),

    #[error("non-finite model output at theta = {theta:?}")]
    ModelOutput { theta: Vec<f64> },

    #[error("predictive assigns zero mass to the observed data")]
    ZeroPredictiveMass,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("training failed at step {step}: {source}")]
    Training {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("experiment `{experiment}` failed: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the configuration rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Experiment { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}
