//! Workbench around `romkit-core`: Matrix Market ingestion, model
//! archives, validation tables, SVG reports and the `romkit` command line.

use std::io;
use std::path::{Path, PathBuf};

pub mod archive;
pub mod cli;
pub mod external;
pub mod mtx;
pub mod offline;
pub mod report;
pub mod validate;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error(transparent)]
    Core(#[from] romkit_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    MatrixMarket { path: PathBuf, line: usize, message: String },

    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("checksum mismatch in {file}: manifest says {expected}, payload hashes to {found}")]
    Checksum { file: PathBuf, expected: String, found: String },

    #[error("unsupported archive format version \"{found}\" (this build reads version \"1\")")]
    UnsupportedVersion { found: String },

    #[error("{file}: {message}")]
    Payload { file: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Usage(String),
}

impl WorkbenchError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        WorkbenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Exit status for the command line: 2 for bad input, 3 for numerical
    /// failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Core(e) if !e.is_configuration() => 3,
            _ => 2,
        }
    }
}
