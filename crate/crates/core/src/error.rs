use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ranking: {0}")]
    InvalidRanking(#[from] crate::ranking::Violation),

    #[error("invalid query case: {0}")]
    InvalidCase(String),

    #[error("invalid gain specification: {0}")]
    InvalidGain(String),

    #[error("gain function applied to negative argument {0}")]
    NegativeArgument(f64),

    #[error("no discount defined for {0}")]
    MissingDiscount(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("instance too large for exhaustive search: {count} rankings exceed limit {limit}")]
    InstanceTooLarge { count: u128, limit: u128 },

    #[error("negative effective weight {weight} for component {component}")]
    NegativeWeight { component: usize, weight: f64 },

    #[error("target ranking has zero utility")]
    ZeroUtilityTarget,

    #[error("feature error: {0}")]
    Features(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
