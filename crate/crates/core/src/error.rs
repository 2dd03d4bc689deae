use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
///
/// The variants are grouped so the CLI can map them onto distinct exit codes:
/// malformed inputs, bad configuration, and a degenerate reference set.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The reference set has no samples in the top (highest-LVR) area, so the
    /// high-confidence ratio estimate is undefined.
    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator {operator} is not applicable: {reason}")]
    OperatorInapplicable { operator: String, reason: String },

    #[error("mutant gate starvation: accepted {accepted} of {attempts} candidates (rate {rate:.4}), needed {needed}")]
    GateStarvation {
        accepted: usize,
        attempts: usize,
        needed: usize,
        rate: f64,
    },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("digest mismatch for {path}: manifest has {expected}, file has {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::OperatorInapplicable { .. } => 3,
            Error::DegenerateReference(_) => 4,
            Error::GateStarvation { .. } => 5,
            _ => 2,
        }
    }
}
