use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(qgfbsde_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("study checks failed: {0}")]
    StudyFailed(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::StudyFailed(_) => 4,
        }
    }
}

impl From<qgfbsde_core::Error> for CliError {
    fn from(e: qgfbsde_core::Error) -> Self {
        match e {
            qgfbsde_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Numerical(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let path = PathBuf::from("<csv>");
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::Io { path, source: io },
            other => CliError::Io { path, source: std::io::Error::other(format!("{other:?}")) },
        }
    }
}
