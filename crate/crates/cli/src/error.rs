use std::path::PathBuf;

use thiserror::Error;

use crate::idx::IdxError;
use crate::pgm::PgmError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config problem, tied to the offending key where there is one.
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Idx {
        path: PathBuf,
        #[source]
        source: IdxError,
    },

    #[error("{}: {source}", path.display())]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: lstmcs::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a human-readable context to core errors.
pub trait CoreContext<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> CoreContext<T> for lstmcs::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: context(),
            source,
        })
    }
}
