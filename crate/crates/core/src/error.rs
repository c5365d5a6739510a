//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable {variable} of modality {modality} has zero variance over its observed entries")]
    ZeroVariance { modality: String, variable: usize },

    #[error("variable {variable} of modality {modality} has {found} observed entries, needs at least {needed}")]
    TooFewObserved {
        modality: String,
        variable: usize,
        found: usize,
        needed: usize,
    },

    #[error("confound matrix is rank deficient")]
    RankDeficientConfounds,

    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    #[error("split fraction {fraction} leaves an empty {side} set for {n} observations")]
    EmptySplit {
        fraction: f64,
        side: &'static str,
        n: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    NumericalAt { iteration: usize, message: String },

    #[error("all {0} restarts failed numerically")]
    AllRestartsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
