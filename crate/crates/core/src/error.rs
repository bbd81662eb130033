use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: value {value} at element {index} is outside the domain")]
    Domain {
        op: &'static str,
        index: usize,
        value: f64,
    },

    /// A vector whose norm is at or below the cosine degeneracy threshold.
    #[error("degenerate vector at index {index} (norm {norm:e})")]
    DegenerateVector { index: usize, norm: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite loss at step {step} (seed {seed}, epoch {epoch}, batch {batch})")]
    NonFiniteLoss {
        step: usize,
        seed: u64,
        epoch: usize,
        batch: usize,
    },

    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
