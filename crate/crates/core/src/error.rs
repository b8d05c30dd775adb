use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("feature extraction: {0}")]
    Feature(String),

    #[error("training: {0}")]
    Training(String),

    #[error("input: {0}")]
    Input(String),

    #[error("split: {0}")]
    Split(String),

    #[error("model load: {0}")]
    Load(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Manifest(_) => "manifest",
            Error::Feature(_) => "feature",
            Error::Training(_) => "training",
            Error::Input(_) => "input",
            Error::Split(_) => "split",
            Error::Load(_) => "load",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
