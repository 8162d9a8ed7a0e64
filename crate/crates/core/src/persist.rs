//! Versioned model container.
//!
//! A model file is a single JSON object:
//!
//! ```text
//! {
//!   "magic": "MASKPROBE-MODEL",
//!   "format_version": 1,
//!   "name": "<predictor name>",
//!   "labels": ["<label 0>", "<label 1>", ...],
//!   "mask_token": "[MASK]" | null,
//!   "body": { "kind": "naive-bayes" | "linear-tfidf" | "tiny-attention",
//!             "params": { ... } }
//!        | { "kind": "random-forest", "params": { ... } }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and read back exactly, so
//! a loaded model predicts bit-identically to the saved one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{LinearModel, NaiveBayesModel, NativeModel, TinyAttentionModel};
use crate::error::{Error, Result};
use crate::stacking::RandomForest;
use crate::types::LabelSet;

pub const MAGIC: &str = "MASKPROBE-MODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ModelBody {
    NaiveBayes(NaiveBayesModel),
    LinearTfidf(LinearModel),
    TinyAttention(TinyAttentionModel),
    RandomForest(RandomForest),
}

impl ModelBody {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelBody::NaiveBayes(_) => "naive-bayes",
            ModelBody::LinearTfidf(_) => "linear-tfidf",
            ModelBody::TinyAttention(_) => "tiny-attention",
            ModelBody::RandomForest(_) => "random-forest",
        }
    }

    /// The text classifier inside, if this is one.
    pub fn into_native(self) -> Option<NativeModel> {
        match self {
            ModelBody::NaiveBayes(m) => Some(NativeModel::NaiveBayes(m)),
            ModelBody::LinearTfidf(m) => Some(NativeModel::LinearTfidf(m)),
            ModelBody::TinyAttention(m) => Some(NativeModel::TinyAttention(m)),
            ModelBody::RandomForest(_) => None,
        }
    }
}

impl From<NativeModel> for ModelBody {
    fn from(m: NativeModel) -> Self {
        match m {
            NativeModel::NaiveBayes(m) => ModelBody::NaiveBayes(m),
            NativeModel::LinearTfidf(m) => ModelBody::LinearTfidf(m),
            NativeModel::TinyAttention(m) => ModelBody::TinyAttention(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub magic: String,
    pub format_version: u32,
    pub name: String,
    pub labels: LabelSet,
    pub mask_token: Option<String>,
    pub body: ModelBody,
}

#[derive(Deserialize)]
struct Header {
    magic: Option<String>,
    format_version: Option<u32>,
}

pub fn to_bytes(
    name: &str,
    labels: &LabelSet,
    mask_token: Option<&str>,
    body: ModelBody,
) -> Result<Vec<u8>> {
    let container = ModelContainer {
        magic: MAGIC.to_string(),
        format_version: FORMAT_VERSION,
        name: name.to_string(),
        labels: labels.clone(),
        mask_token: mask_token.map(str::to_string),
        body,
    };
    Ok(serde_json::to_vec(&container)?)
}

pub fn save(
    path: &Path,
    name: &str,
    labels: &LabelSet,
    mask_token: Option<&str>,
    body: ModelBody,
) -> Result<()> {
    let bytes = to_bytes(name, labels, mask_token, body)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<ModelContainer> {
    let fail = |diagnostic: String| Error::ModelLoad {
        path: path.to_path_buf(),
        diagnostic,
    };
    let header: Header =
        serde_json::from_slice(bytes).map_err(|e| fail(format!("corrupt model file ({e})")))?;
    if header.magic.as_deref() != Some(MAGIC) {
        return Err(fail(format!(
            "not a model file: magic {:?}, expected {MAGIC:?}",
            header.magic
        )));
    }
    match header.format_version {
        Some(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(fail(format!(
                "format version mismatch: file has {v}, this build reads {FORMAT_VERSION}"
            )))
        }
        None => return Err(fail("missing format_version".into())),
    }
    serde_json::from_slice(bytes).map_err(|e| fail(format!("corrupt model body ({e})")))
}

pub fn load(path: &Path) -> Result<ModelContainer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(path, &bytes)
}
