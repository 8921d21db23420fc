//! Crate-wide error type.
//!
//! Errors carry enough context to name the offending file, cell, or parameter,
//! and classify into config / data / numerical failures so the CLI can map them
//! to distinct exit codes.

use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure class used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    /// Bad configuration or parameters (exit code 2).
    Config,
    /// Bad or missing input data (exit code 3).
    Data,
    /// Numerical failure: domain error, non-convergence (exit code 4).
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in `{path}` line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("missing column `{column}` in `{path}`")]
    MissingColumn { path: String, column: String },

    #[error("non-monotone dates in `{path}` at row {row} ({date})")]
    NonMonotoneDates { path: String, row: usize, date: NaiveDate },

    #[error("non-finite value: {what}")]
    NonFinite { what: String },

    #[error("es > var for method `{method}` on {date} (var={var}, es={es})")]
    EsExceedsVar { method: String, date: NaiveDate, var: f64, es: f64 },

    #[error("ragged panel: method `{method}` is missing dates present for other methods")]
    RaggedPanel { method: String },

    #[error("duplicate (method, date) cell: `{method}` on {date}")]
    DuplicateCell { method: String, date: NaiveDate },

    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch { what: String, left: usize, right: usize },

    #[error("insufficient data for {what}: need {need}, got {got}")]
    InsufficientData { what: String, need: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("root finding failed to converge: {0}")]
    NonConvergence(String),

    #[error("mean CDF never reaches alpha={alpha} on the x grid; grid range too narrow")]
    GridRangeExceeded { alpha: f64 },

    #[error("singular regressor matrix in {0}")]
    SingularRegression(String),

    #[error("all inputs failed or were excluded for {0}")]
    AllInputsFailed(String),
}

impl Error {
    pub fn failure_class(&self) -> FailureClass {
        match self {
            Error::InvalidParameter(_) | Error::InvalidConfig(_) => FailureClass::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::MissingColumn { .. }
            | Error::NonMonotoneDates { .. }
            | Error::NonFinite { .. }
            | Error::EsExceedsVar { .. }
            | Error::RaggedPanel { .. }
            | Error::DuplicateCell { .. }
            | Error::LengthMismatch { .. }
            | Error::InsufficientData { .. } => FailureClass::Data,
            Error::Domain(_)
            | Error::OptimizationFailed(_)
            | Error::NonConvergence(_)
            | Error::GridRangeExceeded { .. }
            | Error::SingularRegression(_)
            | Error::AllInputsFailed(_) => FailureClass::Numeric,
        }
    }
}
