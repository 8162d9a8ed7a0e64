//! Wire payloads.
//!
//! * `GET /v1/meta` answers [`MetaResponse`].
//! * `POST /v1/predict` takes [`PredictRequest`] and answers [`PredictResponse`],
//!   row `i` aligned with `texts[i]` and columns with the meta label order.
//! * Failures use a non-200 status with [`ErrorResponse`].

use serde::{Deserialize, Serialize};

pub const META_PATH: &str = "/v1/meta";
pub const PREDICT_PATH: &str = "/v1/predict";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub name: String,
    pub labels: Vec<String>,
    pub mask_token: String,
    pub max_batch: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}
