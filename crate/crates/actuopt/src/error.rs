use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] actuopt_core::Error),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn detail(&self) -> String {
        match self {
            AppError::Config(msg) => msg.clone(),
            other => other.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => crate::EXIT_USAGE,
            AppError::Io { .. } => crate::EXIT_IO,
            AppError::Numerics(actuopt_core::Error::Usage(_))
            | AppError::Numerics(actuopt_core::Error::InvalidParameter(_))
            | AppError::Numerics(actuopt_core::Error::ProjectionRequired(_)) => crate::EXIT_USAGE,
            AppError::Numerics(_) => crate::EXIT_NUMERICS,
        }
    }
}
