use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("too few current vectors for splitting: have {have}, need at least {need}")]
    TooFewCurrentVectors { have: usize, need: usize },

    #[error("query position within {limit_m} m standoff of coil {coil} (distance {dist_m} m)")]
    StandoffViolation {
        coil: usize,
        dist_m: f64,
        limit_m: f64,
    },

    #[error("singular basis evaluation: position coincides with expansion center of coil {coil}")]
    SingularBasis { coil: usize },

    #[error(
        "rank-deficient least-squares system: coil {coil}, degree {degree} block \
         (column {column}, |R_ii| = {diag:e})"
    )]
    RankDeficient {
        coil: usize,
        degree: usize,
        column: usize,
        diag: f64,
    },

    #[error("too few samples with i_max <= {cap_a} A: have {have}, need {need}")]
    TooFewLowCurrentSamples { cap_a: f64, have: usize, need: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty hyperparameter grid")]
    EmptyGrid,

    #[error("model incompatible with dataset: {0}")]
    ModelMismatch(String),

    #[error("parse error in {path} line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
