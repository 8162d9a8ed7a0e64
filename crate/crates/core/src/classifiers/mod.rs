//! Built-in desk-scale classifiers implementing [`Predictor`].

pub mod attention;
pub mod linear;
pub mod naive_bayes;
pub mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use attention::{train_tiny_attention, AttentionConfig, TinyAttentionModel};
pub use linear::{grid_search_linear, train_linear_tfidf, LinearConfig, LinearModel, LossKind};
pub use naive_bayes::{train_naive_bayes, NaiveBayesModel};
pub use vocab::{build_vocabulary, TfidfVector, Vocabulary};

use crate::error::{Error, Result};
use crate::persist;
use crate::types::{
    Corpus, Document, LabelSet, Predictor, PredictorHandle, PredictorKind, ProbabilityDistribution,
    Split, DEFAULT_MASK_TOKEN,
};

/// Train documents paired with their gold index. Every class must occur.
pub(crate) fn labeled_train(corpus: &Corpus) -> Result<Vec<(&Document, usize)>> {
    let mut out = Vec::new();
    let mut seen = vec![false; corpus.labels.len()];
    for doc in corpus.documents_in(Split::Train) {
        let gold = doc.gold.ok_or_else(|| {
            Error::invalid(format!("train document `{}` has no gold label", doc.id))
        })?;
        if gold >= seen.len() {
            return Err(Error::invalid(format!(
                "document `{}` has label index {gold} outside the label set",
                doc.id
            )));
        }
        seen[gold] = true;
        out.push((doc, gold));
    }
    if out.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!(
            "class `{}` is absent from the training split",
            corpus.labels.get(missing).map_or("?", |l| l.name.as_str())
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    NaiveBayes,
    LinearTfidf,
    TinyAttention,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive-bayes",
            ModelKind::LinearTfidf => "linear-tfidf",
            ModelKind::TinyAttention => "tiny-attention",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive-bayes" | "nb" => Ok(ModelKind::NaiveBayes),
            "linear-tfidf" | "linear" | "svc" => Ok(ModelKind::LinearTfidf),
            "tiny-attention" | "attention" => Ok(ModelKind::TinyAttention),
            other => Err(Error::invalid(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum NativeModel {
    NaiveBayes(NaiveBayesModel),
    LinearTfidf(LinearModel),
    TinyAttention(TinyAttentionModel),
}

impl NativeModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            NativeModel::NaiveBayes(_) => ModelKind::NaiveBayes,
            NativeModel::LinearTfidf(_) => ModelKind::LinearTfidf,
            NativeModel::TinyAttention(_) => ModelKind::TinyAttention,
        }
    }

    pub fn predict_one(&self, text: &str, mask_token: &str) -> ProbabilityDistribution {
        match self {
            NativeModel::NaiveBayes(m) => m.posterior(text, mask_token),
            NativeModel::LinearTfidf(m) => m.proba(text, mask_token),
            NativeModel::TinyAttention(m) => m.proba(text, mask_token),
        }
    }
}

/// Hyperparameters for training any built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub kind: ModelKind,
    pub alpha: f64,
    pub linear: LinearConfig,
    pub attention: AttentionConfig,
}

impl TrainSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            alpha: naive_bayes::DEFAULT_ALPHA,
            linear: LinearConfig::default(),
            attention: AttentionConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.linear.seed = seed;
        self.attention.seed = seed;
        self
    }
}

pub fn train(corpus: &Corpus, spec: &TrainSpec) -> Result<NativeModel> {
    Ok(match spec.kind {
        ModelKind::NaiveBayes => NativeModel::NaiveBayes(train_naive_bayes(corpus, spec.alpha)?),
        ModelKind::LinearTfidf => {
            NativeModel::LinearTfidf(train_linear_tfidf(corpus, &spec.linear)?)
        }
        ModelKind::TinyAttention => {
            NativeModel::TinyAttention(train_tiny_attention(corpus, &spec.attention)?)
        }
    })
}

/// A built-in model behind the [`Predictor`] contract.
#[derive(Debug, Clone)]
pub struct NativePredictor {
    handle: PredictorHandle,
    model: Option<NativeModel>,
}

impl NativePredictor {
    pub fn new(name: impl Into<String>, labels: LabelSet, model: NativeModel) -> Self {
        Self {
            handle: native_handle(name.into(), labels),
            model: Some(model),
        }
    }

    /// A predictor with no trained state; every prediction fails with a state error.
    pub fn untrained(name: impl Into<String>, labels: LabelSet) -> Self {
        Self {
            handle: native_handle(name.into(), labels),
            model: None,
        }
    }

    pub fn with_mask_token(mut self, mask_token: impl Into<String>) -> Result<Self> {
        let mask_token = mask_token.into();
        if mask_token.is_empty() {
            return Err(Error::invalid("mask token must be non-empty"));
        }
        self.handle.mask_token = mask_token;
        Ok(self)
    }

    pub fn model(&self) -> Option<&NativeModel> {
        self.model.as_ref()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::State("cannot save an untrained model".into()))?;
        persist::save(
            path,
            &self.handle.name,
            &self.handle.label_set,
            Some(&self.handle.mask_token),
            model.clone().into(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let container = persist::load(path)?;
        let kind = container.body.kind_name();
        let model = container
            .body
            .into_native()
            .ok_or_else(|| Error::ModelLoad {
                path: path.to_path_buf(),
                diagnostic: format!("holds a {kind} model, not a text classifier"),
            })?;
        let p = NativePredictor::new(container.name, container.labels, model);
        match container.mask_token {
            Some(mask) => p.with_mask_token(mask),
            None => Ok(p),
        }
    }
}

fn native_handle(name: String, label_set: LabelSet) -> PredictorHandle {
    PredictorHandle {
        name,
        mask_token: DEFAULT_MASK_TOKEN.to_string(),
        label_set,
        kind: PredictorKind::Native,
    }
}

impl Predictor for NativePredictor {
    fn handle(&self) -> &PredictorHandle {
        &self.handle
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        let model = self.model.as_ref().ok_or_else(|| {
            Error::State(format!(
                "predictor `{}` has not been trained",
                self.handle.name
            ))
        })?;
        Ok(texts
            .iter()
            .map(|t| model.predict_one(t, &self.handle.mask_token))
            .collect())
    }
}

/// `predict_batch` under its library name.
pub fn predict_proba(
    predictor: &dyn Predictor,
    texts: &[String],
) -> Result<Vec<ProbabilityDistribution>> {
    predictor.predict_batch(texts)
}
