use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state became non-finite at t = {time} h")]
    NonFinite { time: f64 },

    #[error("label matrix is rank deficient (rank {rank} < {expected}, condition {condition:e})")]
    RankDeficient {
        rank: usize,
        expected: usize,
        condition: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("peak at {center} 1/cm lies outside the grid [{start}, {end}]")]
    PeakOutOfRange { center: f64, start: f64, end: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label column `{0}` of the training set is identically zero")]
    ZeroRange(String),

    #[error("dataset was normalized with a different record than the model")]
    NormalizationMismatch,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("fixture missing: {0}")]
    FixtureMissing(PathBuf),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
