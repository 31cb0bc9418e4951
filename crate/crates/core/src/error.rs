use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid {record} `{id}`: field `{field}` {message}")]
    Validation {
        record: &'static str,
        id: String,
        field: &'static str,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown beneficiary `{0}`")]
    MissingBeneficiary(String),

    #[error("index event `{0}` has no model input (empty history and no index step)")]
    EmptySequence(String),

    #[error("{op}: dimension mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("fusion mode `{0}` requires domain features but the domain dimension is 0")]
    FusionWithoutDomain(&'static str),

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    #[error("SMOTE needs at least {need} minority samples, found {have}; fall back to duplicating minority rows")]
    TooFewMinority { have: usize, need: usize },

    #[error("{what} did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        grad_norm: f64,
    },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("all {0} grid trials failed")]
    AllTrialsFailed(usize),

    #[error("calibrator misuse: {0}")]
    Calibration(String),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Convergence { .. }
                | Error::Divergence(_)
                | Error::AllTrialsFailed(_)
        )
    }

    pub(crate) fn validation(
        record: &'static str,
        id: impl Into<String>,
        field: &'static str,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            record,
            id: id.into(),
            field,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
