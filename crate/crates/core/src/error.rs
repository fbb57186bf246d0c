//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by model construction, estimators, detectors and the
/// Monte Carlo drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error in {context}: {message}")]
    Domain {
        context: &'static str,
        message: String,
    },

    /// Observation outside the support of the model family.
    #[error("observation {value} outside support of {family}")]
    OutOfSupport { family: &'static str, value: f64 },

    /// Estimator kind incompatible with the model family.
    #[error("estimator {estimator} incompatible with model family {family}")]
    FamilyMismatch {
        estimator: &'static str,
        family: &'static str,
    },

    /// Invalid specification (bad thresholds, bad clamp bounds, ...).
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A detector was stepped after it had already stopped.
    #[error("detector stepped after stopping at n={stopped_at}")]
    SteppedAfterStop { stopped_at: u64 },

    /// Checkpoint record could not be parsed or has the wrong version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An iterative routine failed to converge; carries the best iterate.
    #[error("no convergence in {context}: best iterate {best}")]
    NoConvergence { context: &'static str, best: f64 },
}

impl Error {
    pub(crate) fn domain(context: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            context,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
