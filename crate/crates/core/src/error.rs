use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum RcmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate point at sorted positions {0} and {1}")]
    DuplicatePoint(usize, usize),

    #[error("degenerate connection function: m_phi = {0} is not in (0, inf)")]
    DegenerateConnection(f64),

    #[error("connection function {psi} is not dominated by {phi}")]
    DominationFailed { phi: String, psi: String },

    #[error("graph is not connected")]
    Disconnected,

    #[error("graph order {order} exceeds the cap {cap}")]
    OrderTooLarge { order: usize, cap: usize },

    #[error("invalid graph class identifier {0:?}")]
    BadClassId(String),

    #[error("points must be pairwise distinct")]
    PointsNotDistinct,

    #[error("truncation radius {radius} exceeds the hard cap {cap}")]
    TruncationCap { radius: f64, cap: f64 },

    #[error("budget too small: {0}")]
    BudgetTooSmall(String),

    #[error("functional is not standardizable: {0}")]
    NotStandardized(String),

    #[error("empty input")]
    EmptyInput,

    #[error("window volume {volume} exceeds the cap {cap}")]
    WindowTooLarge { volume: f64, cap: f64 },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RcmError {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        RcmError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            RcmError::Config { .. } | RcmError::Io { .. } | RcmError::BadClassId(_) => 2,
            RcmError::InvalidParameter(_) | RcmError::DimensionMismatch { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, RcmError>;
