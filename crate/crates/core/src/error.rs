use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum XbcfError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{path}: row {row}, column '{column}': {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("archive error: {0}")]
    Archive(String),
}

impl XbcfError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        XbcfError::Validation(msg.into())
    }

    /// True for errors caused by the contents of the input rather than by the
    /// environment. The CLI maps these to exit code 1 and the rest to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            XbcfError::Validation(_) | XbcfError::Parse { .. } | XbcfError::Archive(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, XbcfError>;
