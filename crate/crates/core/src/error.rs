use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("region {region} is missing from {path}")]
    MissingRegion { region: String, path: PathBuf },
    #[error("adjacency file names unknown region {0}")]
    UnknownRegion(String),
    #[error("adjacency file contains a self-loop on region {0}")]
    SelfLoop(String),
    #[error("adjacency graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("explosive scenario: mean {mu} exceeds 10x initial susceptibles in region {region} on day {day}")]
    Explosive { region: usize, day: usize, mu: f64 },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_) | Error::InvalidConfig(_) => ErrorClass::Config,
            Error::NonFinite(_) | Error::Explosive { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
