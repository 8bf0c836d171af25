use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("cutoff {cutoff} leaves Poisson tail {tail:e} above tolerance {tolerance:e}")]
    Truncation {
        cutoff: u32,
        tail: f64,
        tolerance: f64,
    },

    #[error("projection leaves zero probability")]
    EmptyProjection,

    #[error("basis is not closed under the coupling: {0}")]
    InconsistentBasis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

impl CpcError {
    /// Stable machine-readable tag, used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            CpcError::InvalidArgument(_) => "invalid-argument",
            CpcError::UnknownMode(_) => "unknown-mode",
            CpcError::Truncation { .. } => "truncation-error",
            CpcError::EmptyProjection => "empty-projection",
            CpcError::InconsistentBasis(_) => "inconsistent-basis",
            CpcError::Numerical(_) => "numerical-failure",
            CpcError::Parse { .. } => "parse-error",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CpcError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CpcError>;
