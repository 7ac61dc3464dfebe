use thiserror::Error;

/// Errors raised by the evaluation, statistics and training routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("input contains no records")]
    EmptyInput,
    #[error("timestamps decrease at line {line} ({prev} -> {current}); pass the sort option to reorder")]
    UnsortedInput { line: usize, prev: f64, current: f64 },
    #[error("split ratios {0:?} produce an empty part")]
    DegenerateSplit((f64, f64, f64)),
    #[error("invalid split ratios {0:?}: must be positive and sum to 1")]
    InvalidRatios((f64, f64, f64)),
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("invalid metric settings: {0}")]
    InvalidSpec(String),
    #[error("average precision needs at least one positive label")]
    NoPositives,
    #[error("AU-ROC needs both positive and negative labels")]
    OneClassOnly,
    #[error("nearest-neighbour distance needs at least one other entry")]
    InsufficientSet,
    #[error("reference set is empty")]
    EmptySet,
    #[error("both distance sums are zero; T statistic undefined")]
    DegenerateDistances,
    #[error("VCS needs at least 2 disagreements, found {0}")]
    TooFewDisagreements(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("spec violation: {0}")]
    SpecViolation(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
