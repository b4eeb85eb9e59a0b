use thiserror::Error;

/// Failure modes shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric failure: {message} (partial value {partial:?})")]
    Numeric {
        message: String,
        partial: Option<f64>,
    },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("divergent series: {0}")]
    Divergence(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("collision at t = {time}: {detail}")]
    Collision { time: f64, detail: String },
    #[error("branch cut failure at step {step}; refine the step size")]
    BranchCut { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, partial: Option<f64>) -> Self {
        Error::Numeric {
            message: msg.into(),
            partial,
        }
    }
}
