use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("exploration failure: {0}")]
    ExplorationFailure(String),

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("Bregman divergence is infinite: q has a zero where p is positive")]
    DivergenceInfinite,

    #[error("singular linear system")]
    Singular,

    #[error("trace too short: need iterate {need}, have {have}")]
    TraceTooShort { need: usize, have: usize },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for violations of the exploration or ergodicity assumptions.
    pub fn is_assumption_failure(&self) -> bool {
        matches!(self, Error::ExplorationFailure(_) | Error::NotErgodic(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
