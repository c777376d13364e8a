use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("phone `{0}` is not in the active inventory")]
    UnknownPhone(String),

    #[error("malformed inventory table at line {line}: {reason}")]
    InventoryFormat { line: usize, reason: String },

    #[error("inventory is invalid: {0}")]
    InvalidInventory(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("could not generate an unambiguous root set after {attempts} attempts")]
    RootGeneration { attempts: usize },

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("result files disagree on config hash ({0} distinct); pass --force to aggregate anyway")]
    MixedHashes(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            actual,
        }
    }
}
