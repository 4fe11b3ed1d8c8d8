use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("row {row}: {field} must be 0 or 1, got {value}")]
    NotBinary {
        row: usize,
        field: &'static str,
        value: f64,
    },

    #[error("row {row}: propensity must lie in (0, 1), got {value}")]
    Propensity { row: usize, value: f64 },

    #[error("row {row}: non-finite value in {field}")]
    NonFinite { row: usize, field: &'static str },

    #[error("source stratum s={stratum} has {size} rows, fewer than {k} folds")]
    StratumTooSmall { stratum: u8, size: usize, k: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("input file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no rows with treatment a={arm} in {context}")]
    EmptyArm { arm: u8, context: String },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
