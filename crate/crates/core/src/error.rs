use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum SindyError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("adjacency matrix is not square ({rows} rows, {cols} columns)")]
    NonSquare { rows: usize, cols: usize },

    #[error("negative edge weight {value} at row {row}, column {col}")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("singular normal equations ({0}); try a ridge strength lambda > 0")]
    Singular(String),

    #[error("library cannot represent the model: missing term {0}")]
    Unrepresentable(String),

    #[error("R^2 undefined: observed derivatives have zero total variance")]
    UndefinedRSquared,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SindyError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SindyError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SindyError::Divergence { .. } | SindyError::Singular(_) | SindyError::UndefinedRSquared
        )
    }
}

pub type Result<T> = std::result::Result<T, SindyError>;
