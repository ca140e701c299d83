use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("singular system: sigma_min/sigma_max = {ratio:.3e}")]
    SingularSystem { ratio: f64 },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("evaluation point {point} outside basis domain [{lo}, {hi}]")]
    Domain { point: f64, lo: f64, hi: f64 },

    #[error("grid has {grid} points but the basis has {basis} functions")]
    UnderdeterminedCurveFit { grid: usize, basis: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation requires a {expected} basis")]
    BasisKind { expected: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("smoother is saturated: tr(H) = {trace} equals n = {n}")]
    SaturatedSmoother { trace: f64, n: usize },

    #[error("leverage of observation {index} equals one")]
    LeverageOne { index: usize },

    #[error("tuning failed: {0}")]
    TuningFailed(String),

    #[error("insufficient residual degrees of freedom: n = {n}, tr(H) = {trace}")]
    InsufficientDof { n: usize, trace: f64 },

    #[error("degenerate plug-in: {0}")]
    DegeneratePlugIn(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("join error: {0}")]
    Join(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers rather than by input files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::DegenerateInput(_)
                | Error::SingularSystem { .. }
                | Error::SaturatedSmoother { .. }
                | Error::LeverageOne { .. }
                | Error::InsufficientDof { .. }
                | Error::DegeneratePlugIn(_)
        )
    }
}
