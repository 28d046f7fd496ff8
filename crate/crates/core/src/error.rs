use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("value {value} at pixel (row {row}, col {col}) is outside [0, {max}]")]
    Range {
        row: usize,
        col: usize,
        value: f64,
        max: u32,
    },

    #[error("images are not aligned: {left_width}x{left_height} vs {right_width}x{right_height}")]
    Alignment {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("class imbalance: no {empty_class} samples present")]
    Imbalance { empty_class: &'static str },

    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
