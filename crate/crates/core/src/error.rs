use thiserror::Error;

/// Errors produced by the channel synthesis, prediction and evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample track is not uniformly spaced (sample {index} deviates)")]
    NonUniformSpacing { index: usize },

    #[error("support selection produced no positions")]
    EmptySupport,

    #[error("reference channel has zero norm")]
    ZeroNormTruth,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("drop {drop} failed: {source}")]
    DropFailed {
        drop: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
