use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A model was used before it was trained or loaded.
    #[error("model state error: {0}")]
    State(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("model file {path}: {diagnostic}")]
    ModelLoad { path: PathBuf, diagnostic: String },

    #[error("predictor `{predictor}` failed: {message}")]
    Predictor { predictor: String, message: String },

    /// Predictor failed while scoring the masked variant at `position`.
    #[error("predictor `{predictor}` failed at token position {position}: {message}")]
    PredictorAtPosition {
        predictor: String,
        position: usize,
        message: String,
    },

    #[error("handshake with {endpoint} failed: {message}")]
    Handshake { endpoint: String, message: String },

    /// The remote returned something that breaks the wire contract. Never retried.
    #[error("protocol violation from {endpoint}: {message}; payload: {payload}")]
    ProtocolViolation {
        endpoint: String,
        message: String,
        payload: String,
    },

    #[error("remote {endpoint} answered {status}: {message}")]
    Remote {
        endpoint: String,
        status: u16,
        message: String,
    },

    #[error("transport error talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },

    #[error("comparison incomplete, predictor `{predictor}` failed: {source}")]
    PartialComparison {
        predictor: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
