use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed VTK file: {0}")]
    Vtk(String),
    #[error(transparent)]
    Core(#[from] surfphase_core::Error),
}

impl AppError {
    pub fn invalid(key: &str, msg: impl Into<String>) -> Self {
        Self::Invalid { key: key.to_string(), msg: msg.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
