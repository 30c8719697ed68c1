use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("columns have unequal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-positive value {value} at row {row} of column `{column}`; log-returns undefined")]
    NonPositive {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("lag {lag} out of range for series of length {n}")]
    LagOutOfRange { lag: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("correlation {0} outside the open interval (-1, 1)")]
    RhoOutOfRange(f64),
    #[error("kernel weights vanish around the point ({0}); no local observations")]
    DegenerateWeights(String),
    #[error("correlation set is missing lag {0}")]
    MissingLag(usize),
    #[error("frequency {0} is not on the grid")]
    FrequencyNotOnGrid(f64),
    #[error("too few usable replicates: {usable} (need at least {needed})")]
    TooFewReplicates { usable: usize, needed: usize },
    #[error("malformed percentile point `{0}`; expected `a::b` with 0 < a, b < 100")]
    MalformedPoint(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
