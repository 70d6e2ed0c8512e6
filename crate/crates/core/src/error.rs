use thiserror::Error;

/// Crate-wide error type.
///
/// Variants carry enough context (layer names, client ids, step indices) for
/// callers to surface a one-line machine-parseable diagnostic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: String, reason: String },

    #[error("model spec invalid: {0}")]
    InvalidModel(String),

    #[error("shared layer {layer} shape mismatch")]
    SharedShapeMismatch { layer: String },

    #[error("non-finite value detected in {context}")]
    NonFinite { context: String },

    #[error("numerical failure: non-finite loss at client {client}, step {step} ({phase})")]
    NumericalFailure {
        client: usize,
        step: usize,
        phase: String,
    },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape_mismatch(
        context: impl Into<String>,
        expected: impl std::fmt::Debug,
        got: impl std::fmt::Debug,
    ) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }
}
