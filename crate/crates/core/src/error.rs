// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("unsupported schema: {0}")]
    Schema(String),

    #[error("column count mismatch: expected {expected}, found {found}")]
    ColumnCount { expected: usize, found: usize },

    #[error("cannot parse cell {cell:?} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: usize,
        cell: String,
    },

    /// Caller violated an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Eigensolver non-convergence, non-finite precision entries and the like.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An upstream pipeline stage has not produced its artifact yet.
    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { stage: String, path: PathBuf },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code: 2 configuration, 3 missing artifact, 4 numeric
    /// failure, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::InvalidInput(_) => 2,
            Self::MissingArtifact { .. } => 3,
            Self::Numeric(_) | Self::NonFinite { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
