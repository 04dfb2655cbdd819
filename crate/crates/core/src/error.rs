use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the separation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed wav file {path}: {detail}")]
    MalformedWav { path: PathBuf, detail: String },

    #[error("unsupported wav encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },

    #[error("empty waveform")]
    EmptyWaveform,

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("covariance is not positive definite (gamma = {gamma}, |c| = {relation_abs})")]
    NotPositiveDefinite { gamma: f64, relation_abs: f64 },

    #[error("malformed dictionary file: {0}")]
    MalformedDictionary(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
