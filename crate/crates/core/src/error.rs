use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("invalid label {label} for logistic loss (expected -1 or +1)")]
    InvalidLabel { label: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid bounds: lower {lo} exceeds upper {hi} at index {index}")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },

    #[error("matrix is not symmetric: |M[{i},{j}] - M[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("non-finite data: {0}")]
    NonFinite(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("subproblem failed at outer iteration {iteration}: {source}")]
    Subproblem {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular system with zero ridge; a positive regularization is required")]
    RegularizationRequired,

    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("infeasible region: {0}")]
    Infeasible(String),

    #[error("time budget of {budget_secs}s exceeded")]
    TimeBudget { budget_secs: f64 },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
