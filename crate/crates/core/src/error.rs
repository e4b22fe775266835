use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("cannot raise negative value {value} to non-integer power {exponent}")]
    NegativeBase { value: f64, exponent: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: negative interaction value {value}", path.display())]
    NegativeValue { path: PathBuf, line: usize, value: f64 },

    #[error("dataset is empty after filtering")]
    EmptyDataset,

    #[error("split quotas are infeasible: {0}")]
    QuotaInfeasible(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("requested {requested} factors but the matrix supports at most {max}")]
    RankTooLarge { requested: usize, max: usize },

    #[error("exhaustive search over {n} variables exceeds the cap of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("gini diversity needs a catalog of at least 2 items, got {0}")]
    DegenerateCatalog(usize),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("malformed artifact {}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) => 2,
            Error::QuotaInfeasible(_)
            | Error::InfeasibleConfig(_)
            | Error::RankTooLarge { .. }
            | Error::TooLarge { .. }
            | Error::DegenerateCatalog(_) => 4,
            _ => 3,
        }
    }
}
