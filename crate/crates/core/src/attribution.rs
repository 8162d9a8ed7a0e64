//! Mask-occlusion feature attribution.
//!
//! The reference prediction fixes a class `c*`. Each word position is then
//! replaced by the predictor's mask token and the drop in `P(c*)` is
//! recorded:
//!
//! ```text
//! importance_i = P_ref(c*) - P_masked_i(c*)
//! ```
//!
//! A positive importance means masking the word lowered the confidence, so
//! the word supports the prediction. A negative importance marks a
//! deteriorating word. Sorting by importance, descending, orders features
//! from most to least important.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, variants_all};
use crate::types::{
    validate_distribution, Concurrency, Corpus, Prediction, Predictor, ProbabilityDistribution,
    Split,
};

pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub doc_id: String,
    pub predictor: String,
    pub reference: Prediction,
    pub tokens: Vec<String>,
    /// Aligned with `tokens`.
    pub importances: Vec<f64>,
}

impl AttributionResult {
    pub fn reference_confidence(&self) -> f64 {
        self.reference.confidence()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFlag {
    Important,
    Deteriorating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub position: usize,
    pub token: String,
    pub importance: f64,
}

impl RankedFeature {
    pub fn flag(&self) -> FeatureFlag {
        if self.importance > 0.0 {
            FeatureFlag::Important
        } else {
            FeatureFlag::Deteriorating
        }
    }
}

/// All positions, descending by importance, ties by ascending position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures(pub Vec<RankedFeature>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub position: usize,
    pub token: String,
    pub importance: f64,
    pub flag: FeatureFlag,
}

/// How the masked variants are sent to the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Batching {
    /// All variants in one `predict_batch` call.
    #[default]
    Full,
    /// One call per variant.
    Single,
    /// Calls of at most this many variants.
    Chunked(usize),
}

/// One unmasked forward pass.
pub fn reference_prediction(predictor: &dyn Predictor, text: &str) -> Result<Prediction> {
    let handle = predictor.handle();
    let mut out = predictor.predict_batch(&[text.to_string()])?;
    if out.len() != 1 {
        return Err(Error::Predictor {
            predictor: handle.name.clone(),
            message: format!("returned {} distributions for 1 text", out.len()),
        });
    }
    let dist = out.pop().expect("length checked");
    validate_distribution(&dist, handle.label_set.len()).map_err(|r| Error::Predictor {
        predictor: handle.name.clone(),
        message: r.to_string(),
    })?;
    Prediction::from_distribution(dist, &handle.label_set)
}

pub fn occlusion_importances(
    predictor: &dyn Predictor,
    doc_id: &str,
    text: &str,
) -> Result<AttributionResult> {
    occlusion_importances_with(predictor, doc_id, text, Batching::Full)
}

pub fn occlusion_importances_with(
    predictor: &dyn Predictor,
    doc_id: &str,
    text: &str,
    batching: Batching,
) -> Result<AttributionResult> {
    let handle = predictor.handle();
    let tokens = tokenize(text);
    let variants = variants_all(&tokens, &handle.mask_token)?;
    let reference = reference_prediction(predictor, text)?;
    let target = reference.argmax.index;
    let p_ref = reference.confidence();

    let masked = evaluate_variants(predictor, &variants, batching)?;
    let mut importances = Vec::with_capacity(masked.len());
    for (position, dist) in masked.iter().enumerate() {
        validate_distribution(dist, handle.label_set.len()).map_err(|r| {
            Error::PredictorAtPosition {
                predictor: handle.name.clone(),
                position,
                message: r.to_string(),
            }
        })?;
        importances.push(p_ref - dist.get(target));
    }

    Ok(AttributionResult {
        doc_id: doc_id.to_string(),
        predictor: handle.name.clone(),
        reference,
        tokens: tokens.words().map(str::to_string).collect(),
        importances,
    })
}

fn evaluate_variants(
    predictor: &dyn Predictor,
    variants: &[String],
    batching: Batching,
) -> Result<Vec<ProbabilityDistribution>> {
    let chunk = match batching {
        Batching::Full => variants.len(),
        Batching::Single => 1,
        Batching::Chunked(n) => n.max(1),
    };
    let mut out = Vec::with_capacity(variants.len());
    for (c, batch) in variants.chunks(chunk).enumerate() {
        let first = c * chunk;
        let dists = predictor
            .predict_batch(batch)
            .map_err(|e| Error::PredictorAtPosition {
                predictor: predictor.name().to_string(),
                position: first,
                message: e.to_string(),
            })?;
        if dists.len() != batch.len() {
            return Err(Error::PredictorAtPosition {
                predictor: predictor.name().to_string(),
                position: first + dists.len().min(batch.len()),
                message: format!(
                    "returned {} distributions for {} masked variants",
                    dists.len(),
                    batch.len()
                ),
            });
        }
        out.extend(dists);
    }
    Ok(out)
}

pub fn rank_features(result: &AttributionResult) -> RankedFeatures {
    let mut ranked: Vec<RankedFeature> = result
        .tokens
        .iter()
        .zip(&result.importances)
        .enumerate()
        .map(|(position, (token, &importance))| RankedFeature {
            position,
            token: token.clone(),
            importance,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.position.cmp(&b.position))
    });
    RankedFeatures(ranked)
}

/// First `min(k, N)` ranked features, flagged important when the
/// importance is strictly positive.
pub fn top_k(ranked: &RankedFeatures, k: usize) -> Vec<TopFeature> {
    ranked
        .0
        .iter()
        .take(k.max(1))
        .map(|f| TopFeature {
            position: f.position,
            token: f.token.clone(),
            importance: f.importance,
            flag: f.flag(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonColumn {
    pub predictor: String,
    pub mask_token: String,
    pub reference: Prediction,
    pub top: Vec<TopFeature>,
}

/// Top-k features of one document under several predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub doc_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub k: usize,
    pub columns: Vec<ComparisonColumn>,
}

pub fn compare_models(
    predictors: &[&dyn Predictor],
    doc_id: &str,
    text: &str,
    k: usize,
) -> Result<ComparisonTable> {
    if predictors.len() < 2 {
        return Err(Error::invalid(format!(
            "comparison needs at least 2 predictors, got {}",
            predictors.len()
        )));
    }
    let mut names = BTreeSet::new();
    for p in predictors {
        if !names.insert(p.name()) {
            return Err(Error::invalid(format!(
                "predictor name `{}` used twice in one comparison",
                p.name()
            )));
        }
    }
    let k = k.max(1);
    let mut columns = Vec::with_capacity(predictors.len());
    for p in predictors {
        let result =
            occlusion_importances(*p, doc_id, text).map_err(|e| Error::PartialComparison {
                predictor: p.name().to_string(),
                source: Box::new(e),
            })?;
        columns.push(ComparisonColumn {
            predictor: p.name().to_string(),
            mask_token: p.handle().mask_token.clone(),
            reference: result.reference.clone(),
            top: top_k(&rank_features(&result), k),
        });
    }
    Ok(ComparisonTable {
        doc_id: doc_id.to_string(),
        text: text.to_string(),
        tokens: tokenize(text).words().map(str::to_string).collect(),
        k,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainedDocument {
    pub result: AttributionResult,
    pub top: Vec<TopFeature>,
    pub gold: Option<usize>,
    /// `None` when the document carries no gold label.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectnessSummary {
    pub correct: usize,
    pub incorrect: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusExplanation {
    pub documents: Vec<ExplainedDocument>,
    pub skipped: Vec<SkippedDocument>,
    /// Present only when every explained document has a gold label.
    pub summary: Option<CorrectnessSummary>,
}

impl CorpusExplanation {
    pub fn results(&self) -> impl Iterator<Item = &AttributionResult> {
        self.documents.iter().map(|d| &d.result)
    }

    pub fn incorrect(&self) -> impl Iterator<Item = &ExplainedDocument> {
        self.documents.iter().filter(|d| d.correct == Some(false))
    }
}

/// Explains every document of `split`. Per-document failures are collected
/// in `skipped` instead of aborting the run.
pub fn explain_corpus(
    predictor: &dyn Predictor,
    corpus: &Corpus,
    split: Split,
    k: usize,
) -> Result<CorpusExplanation> {
    let docs: Vec<_> = corpus.documents_in(split).collect();
    if docs.is_empty() {
        return Err(Error::invalid(format!("split `{split}` is empty")));
    }
    let explain = |doc: &&crate::types::Document| {
        occlusion_importances(predictor, &doc.id, &doc.text).map(|result| {
            let top = top_k(&rank_features(&result), k);
            let correct = doc.gold.map(|g| g == result.reference.argmax.index);
            ExplainedDocument {
                result,
                top,
                gold: doc.gold,
                correct,
            }
        })
    };
    let outcomes: Vec<Result<ExplainedDocument>> = match predictor.concurrency() {
        Concurrency::Concurrent => docs.par_iter().map(explain).collect(),
        Concurrency::Serial => docs.iter().map(explain).collect(),
    };

    let mut documents = Vec::new();
    let mut skipped = Vec::new();
    for (doc, outcome) in docs.iter().zip(outcomes) {
        match outcome {
            Ok(d) => documents.push(d),
            Err(e) => skipped.push(SkippedDocument {
                doc_id: doc.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let summary = documents
        .iter()
        .map(|d| d.correct)
        .collect::<Option<Vec<bool>>>()
        .filter(|_| !documents.is_empty())
        .map(|flags| {
            let correct = flags.iter().filter(|&&c| c).count();
            CorrectnessSummary {
                correct,
                incorrect: flags.len() - correct,
            }
        });
    Ok(CorpusExplanation {
        documents,
        skipped,
        summary,
    })
}
