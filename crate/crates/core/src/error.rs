use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series has zero variance")]
    ConstantSeries,
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("all pairwise distances are zero")]
    AllIdentical,
    #[error("estimated null variance of HSIC is not positive")]
    DegenerateNull,
    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("hyperparameter optimization failed: {0}")]
    OptimizerFailed(String),
    #[error("mixture fit failed: {0}")]
    FitFailed(String),
    #[error("repeated x values; use the slope++ estimator")]
    RepeatedX,
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: row {line} has {got} columns, expected {expected}")]
    NonRectangular {
        path: PathBuf,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("metadata file not found in {0}")]
    MissingMeta(PathBuf),
    #[error("metadata references {id} but {path} does not exist")]
    MetaPairMismatch { id: String, path: PathBuf },
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("ROC needs both truth classes with positive weight")]
    SingleClass,
    #[error("results and metadata disagree: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
