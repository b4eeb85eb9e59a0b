use thiserror::Error;

/// Why a run did not produce a passing record.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Usage(String),
    #[error("check {check} failed: {message}")]
    Failed { check: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn usage(msg: impl Into<String>) -> Self {
        RunError::Usage(msg.into())
    }

    /// Exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Attributes a core error to a named check. Argument and domain errors
/// mean the configuration was invalid.
pub fn at(check: &'static str) -> impl Fn(stochlab_core::Error) -> RunError {
    move |e| match e {
        stochlab_core::Error::Argument(_) | stochlab_core::Error::Domain(_) => {
            RunError::Usage(format!("{check}: {e}"))
        }
        other => RunError::Failed {
            check: check.to_string(),
            message: other.to_string(),
        },
    }
}
