use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("non-finite value at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("problem too large for exhaustive search: n = {n}, max = {max}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("solver diverged at step {step}")]
    Diverged { step: usize },

    #[error("invalid quote: ask {ask}, bid {bid}")]
    InvalidQuote { ask: f64, bid: f64 },

    #[error("unknown stock code `{0}`")]
    UnknownCode(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("timestamp regression at line {line}: {ts} < {prev}")]
    TimestampRegression { line: u64, ts: i64, prev: i64 },

    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },

    #[error("correlation history is empty")]
    EmptyHistory,

    #[error("fill references unknown order {0}")]
    UnmatchedFill(u64),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
