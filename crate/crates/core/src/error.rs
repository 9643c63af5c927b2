use thiserror::Error;

/// Errors produced by the link models, optimizers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("impulse response length {len} captures only {captured:.6} of the energy (need {required})")]
    ImpulseTooShort {
        len: usize,
        captured: f64,
        required: f64,
    },

    #[error("subcarrier {index} does not carry data (valid range 1..={max})")]
    NotDataSubcarrier { index: usize, max: usize },

    #[error("search grid `{0}` is empty")]
    EmptyGrid(&'static str),

    #[error("mean squared error evaluated to {0:e}, assembly is inconsistent")]
    NegativeMse(f64),

    #[error("expected only {expected:.1} bit errors; at least {required} are needed for a meaningful BER estimate")]
    InsufficientErrors { expected: f64, required: u64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
