//! Error type shared by every module in the engine.

use thiserror::Error;

/// Errors produced by layout construction, state algebra, operator
/// construction, branch analysis, and experiment configs.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input structure: duplicate names, unknown labels,
    /// non-Hermitian kernels, non-bijective permutation rules.
    #[error("schema error: {0}")]
    Schema(String),

    /// A dimension exceeded its configured cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Two operands were built over different layouts.
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// A caller-supplied precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A conditioning constraint selected (numerically) nothing.
    #[error("empty conditional: projection weight {weight:.3e} below {threshold:.3e}")]
    EmptyConditional { weight: f64, threshold: f64 },

    /// An experiment config field failed validation.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
