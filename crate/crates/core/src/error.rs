use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("non-numeric cell {value:?} at data row {row}, column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("unknown feature {0:?}")]
    UnknownFeature(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("at least two classes are required, found {0}")]
    SingleClass(usize),

    #[error("class {class} has only {count} sample(s); at least 2 are required")]
    ClassTooSmall { class: i64, count: usize },

    #[error("problem of dimension {n} exceeds the tractability limit of {limit}")]
    Intractable { n: usize, limit: usize },

    #[error("Metropolis-Hastings chain is stuck: acceptance rate {0:.4}")]
    StuckChain(f64),

    #[error("initial state inadmissible: the empty feature set has zero admissibility")]
    InadmissibleStart,

    #[error("stability undefined: {0}")]
    UndefinedStability(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
