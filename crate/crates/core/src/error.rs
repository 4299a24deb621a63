use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("controller synthesis failed: {0}")]
    Synthesis(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error("parse error in {path}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("checkpoint latent dimension {found} does not match configured {expected}")]
    LatentDimMismatch { expected: usize, found: usize },

    #[error("desired attractor not found: no minimal Morse node contains an encoded successful final state")]
    DesiredAttractorNotFound,

    #[error("only {found} attractor(s) found, at least 2 required")]
    TooFewAttractors { found: usize },

    #[error("no acceptable model after {attempts} training attempt(s); last: {last}")]
    RestartsExhausted { attempts: usize, last: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
