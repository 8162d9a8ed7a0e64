//! HTTP/JSON wire protocol: a client that turns a served model into a
//! [`Predictor`](crate::types::Predictor), a server for native models, and
//! conformance probes.

mod client;
mod conformance;
mod profile;
pub mod protocol;
mod server;

pub use client::{
    handshake, remote_predict, PredictionCache, RemoteEndpoint, RemotePredictor, DEFAULT_BACKOFF,
    DEFAULT_MAX_ATTEMPTS, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT,
};
pub use conformance::{conformance_check, ConformanceReport, ProbeResult, ORDER_TOLERANCE};
pub use profile::{HyperparameterProfile, DEFAULT_LEARNING_RATE, DEFAULT_WARMUP_PROPORTION};
pub use server::ModelServer;

/// Environment variable naming the default endpoint URL.
pub const ENDPOINT_ENV: &str = "MASKPROBE_ENDPOINT";
