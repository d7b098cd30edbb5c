use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("label column `{0}` not present in header")]
    LabelColumnMissing(String),
    #[error("label column is not binary: found {0} distinct values")]
    NotBinary(usize),
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("cannot stratify: class {class} has {found} training rows but {needed} are needed")]
    Stratification {
        class: u8,
        found: usize,
        needed: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample index set is empty")]
    EmptySample,
    #[error("training rows outside fold {fold} contain a single class")]
    SingleClassFold { fold: usize },
    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("objective returned a non-finite value at a feasible point")]
    NonFiniteObjective,
    #[error("every tree has zero out-of-fold accuracy")]
    DegenerateAccuracies,
    #[error("neighbors ({neighbors}) exceeds training rows ({rows})")]
    TooManyNeighbors { neighbors: usize, rows: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Parse {
                line,
                message: format!("{kind:?}"),
            },
        }
    }
}
