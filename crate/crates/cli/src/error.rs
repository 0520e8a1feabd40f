use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; `path` is the dotted location of the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{task} failed: {source}")]
    Numerical {
        task: &'static str,
        #[source]
        source: dimerlab_core::Error,
    },
    #[error("{0}")]
    NonConvergence(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), message: message.into() }
    }

    pub fn numerical(task: &'static str, source: dimerlab_core::Error) -> Self {
        match source {
            dimerlab_core::Error::NonConvergence { .. } => CliError::NonConvergence(format!("{task}: {source}")),
            source => CliError::Numerical { task, source },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
