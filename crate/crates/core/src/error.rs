use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation produced a non-finite value at step {step}")]
    Simulation { step: usize },

    #[error("singular normal equations at time step {step}")]
    SingularRegression { step: usize },

    #[error("regression design is rank deficient after ridge fallback")]
    RankDeficient,

    #[error("non-finite value from {what}")]
    NonFinite { what: &'static str },

    #[error("value {value} outside the feasible region (must exceed {floor})")]
    Domain { value: f64, floor: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
