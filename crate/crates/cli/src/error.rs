use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] cisnmf::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("config file {}, line {line}: {detail}", path.display())]
    Config { path: PathBuf, line: usize, detail: String },
    #[error("invalid value for `{key}`: {detail}")]
    Value { key: String, detail: String },
    #[error("dictionary {} has F = {dictionary} bins but the mixture STFT has F = {mixture}", path.display())]
    BinMismatch { path: PathBuf, dictionary: usize, mixture: usize },
    #[error("{0}")]
    Usage(String),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
