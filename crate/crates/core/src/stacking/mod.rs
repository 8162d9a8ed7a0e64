//! Attribute injection: base-model log-probabilities concatenated with
//! user/product encodings, classified by a random forest.

pub mod encoder;
pub mod forest;
pub mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use encoder::{AttributeEncoder, AttributeRow, ATTRIBUTE_FEATURES};
pub use forest::{predict_forest, train_forest, ForestConfig, ForestFit, RandomForest};
pub use tree::{best_split, DecisionTree, FeaturesPerSplit, Node, SplitChoice, TreeConfig};

use crate::attribution::SkippedDocument;
use crate::error::{Error, Result};
use crate::evaluation::{confusion_matrix, macro_metrics, MetricsReport};
use crate::types::{
    validate_distribution, Corpus, Document, LabelSet, Predictor, Split, ATTR_PRODUCT_ID,
    ATTR_USER_ID,
};

/// Lower bound applied to probabilities before taking logs.
pub const LOGIT_FLOOR_PROB: f64 = 1e-12;

pub const DEFAULT_ENCODER_ALPHA: f64 = 10.0;

pub const DEFAULT_ENCODER_FOLDS: usize = 5;

pub fn floored_log(p: f64) -> f64 {
    p.max(LOGIT_FLOOR_PROB).ln()
}

/// Numeric value of a rating label: its name when numeric, else index + 1.
pub fn rating_value(labels: &LabelSet, index: usize) -> f64 {
    labels
        .get(index)
        .and_then(|l| l.name.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .unwrap_or(index as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedFeatureRow {
    pub doc_id: String,
    pub logits: Vec<f64>,
    pub user: [f64; 2],
    pub product: [f64; 2],
    pub gold: Option<usize>,
}

impl StackedFeatureRow {
    /// `logits ++ user ++ product`
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.logits.len() + ATTRIBUTE_FEATURES);
        v.extend_from_slice(&self.logits);
        v.extend_from_slice(&self.user);
        v.extend_from_slice(&self.product);
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssembledRows {
    pub rows: Vec<StackedFeatureRow>,
    pub skipped: Vec<SkippedDocument>,
}

fn ids(doc: &Document) -> std::result::Result<(&str, &str), String> {
    let user = doc
        .attribute(ATTR_USER_ID)
        .ok_or_else(|| format!("missing `{ATTR_USER_ID}` attribute"))?;
    let product = doc
        .attribute(ATTR_PRODUCT_ID)
        .ok_or_else(|| format!("missing `{ATTR_PRODUCT_ID}` attribute"))?;
    Ok((user, product))
}

/// Splits documents into those carrying both ids and skip records.
fn partition_by_ids<'a>(docs: &[&'a Document]) -> (Vec<&'a Document>, Vec<SkippedDocument>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for &doc in docs {
        match ids(doc) {
            Ok(_) => kept.push(doc),
            Err(reason) => skipped.push(SkippedDocument {
                doc_id: doc.id.clone(),
                reason,
            }),
        }
    }
    (kept, skipped)
}

fn logits_for(predictor: &dyn Predictor, docs: &[&Document]) -> Result<Vec<Vec<f64>>> {
    let n_labels = predictor.handle().label_set.len();
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let dists = predictor.predict_batch(&texts)?;
    if dists.len() != texts.len() {
        return Err(Error::Predictor {
            predictor: predictor.name().to_string(),
            message: format!(
                "returned {} distributions for {} texts",
                dists.len(),
                texts.len()
            ),
        });
    }
    dists
        .into_iter()
        .zip(docs)
        .map(|(dist, doc)| {
            validate_distribution(&dist, n_labels).map_err(|v| Error::Predictor {
                predictor: predictor.name().to_string(),
                message: format!("invalid distribution for `{}`: {v}", doc.id),
            })?;
            Ok(dist.probs().iter().map(|&p| floored_log(p)).collect())
        })
        .collect()
}

/// One row per document that carries both ids, in input order; documents
/// missing an id are reported in `skipped`.
pub fn assemble_rows(
    predictor: &dyn Predictor,
    docs: &[&Document],
    encoder: &AttributeEncoder,
) -> Result<AssembledRows> {
    let (kept, skipped) = partition_by_ids(docs);
    let logits = logits_for(predictor, &kept)?;
    let rows = kept
        .iter()
        .zip(logits)
        .map(|(doc, logits)| {
            let (user, product) = ids(doc).expect("filtered above");
            StackedFeatureRow {
                doc_id: doc.id.clone(),
                logits,
                user: encoder.user_features(user),
                product: encoder.product_features(product),
                gold: doc.gold,
            }
        })
        .collect();
    Ok(AssembledRows { rows, skipped })
}

fn encoder_rows<'a>(docs: &[&'a Document], labels: &LabelSet) -> Result<Vec<AttributeRow<'a>>> {
    docs.iter()
        .map(|doc| {
            let (user, product) = ids(doc).map_err(Error::InvalidInput)?;
            let gold = doc.gold.filter(|&g| g < labels.len()).ok_or_else(|| {
                Error::invalid(format!("document `{}` has no valid rating", doc.id))
            })?;
            Ok((user, product, rating_value(labels, gold)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackingConfig {
    pub forest: ForestConfig,
    pub encoder_alpha: f64,
    /// Folds for out-of-fold mean encoding of training rows; below 2 the
    /// full-train encoder is used for training rows as well.
    pub encoder_folds: usize,
}

impl Default for StackingConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            encoder_alpha: DEFAULT_ENCODER_ALPHA,
            encoder_folds: DEFAULT_ENCODER_FOLDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedReport {
    pub stacked: MetricsReport,
    /// The base predictor's own argmax on the same test rows.
    pub base: MetricsReport,
    pub n_train: usize,
    pub n_test: usize,
    pub skipped: Vec<SkippedDocument>,
    pub warnings: Vec<String>,
    pub encoder: AttributeEncoder,
    pub forest: RandomForest,
}

impl StackedReport {
    /// Stacked minus base accuracy, in percentage points.
    pub fn gain_points(&self) -> f64 {
        100.0 * (self.stacked.accuracy - self.base.accuracy)
    }
}

/// Training-row attribute features. Mean features come from an encoder that
/// never saw the row's own fold; count features come from `full`.
fn out_of_fold_features(
    rows: &[AttributeRow<'_>],
    full: &AttributeEncoder,
    config: &StackingConfig,
) -> Result<Vec<([f64; 2], [f64; 2])>> {
    let k = config.encoder_folds;
    if k < 2 || rows.len() < k {
        return Ok(rows
            .iter()
            .map(|&(u, p, _)| (full.user_features(u), full.product_features(p)))
            .collect());
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.forest.seed));
    let mut fold = vec![0usize; rows.len()];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    let mut out = vec![([0.0; 2], [0.0; 2]); rows.len()];
    for f in 0..k {
        let rest: Vec<AttributeRow<'_>> = rows
            .iter()
            .zip(&fold)
            .filter(|(_, &g)| g != f)
            .map(|(r, _)| *r)
            .collect();
        let enc = AttributeEncoder::fit(&rest, config.encoder_alpha)?;
        for (i, &(u, p, _)) in rows.iter().enumerate().filter(|(i, _)| fold[*i] == f) {
            let [um, _] = enc.user_features(u);
            let [pm, _] = enc.product_features(p);
            out[i] = (
                [um, full.user_features(u)[1]],
                [pm, full.product_features(p)[1]],
            );
        }
    }
    Ok(out)
}

fn labeled(corpus: &Corpus, split: Split) -> (Vec<&Document>, Vec<SkippedDocument>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for doc in corpus.documents_in(split) {
        if doc.gold.is_some() {
            kept.push(doc);
        } else {
            skipped.push(SkippedDocument {
                doc_id: doc.id.clone(),
                reason: "no gold rating".into(),
            });
        }
    }
    let (kept, missing) = partition_by_ids(&kept);
    skipped.extend(missing);
    (kept, skipped)
}

/// Fits the encoder and forest on the train split, evaluates on test, and
/// reports the base predictor's argmax metrics on the same test rows.
pub fn stacked_pipeline(
    predictor: &dyn Predictor,
    corpus: &Corpus,
    config: &StackingConfig,
) -> Result<StackedReport> {
    let labels = &corpus.labels;
    if predictor.handle().label_set != *labels {
        return Err(Error::invalid(format!(
            "predictor `{}` label set differs from corpus `{}`",
            predictor.name(),
            corpus.name
        )));
    }
    if corpus.splits.is_none() {
        return Err(Error::invalid(format!(
            "corpus `{}` has no split assignment",
            corpus.name
        )));
    }
    let (train_docs, mut skipped) = labeled(corpus, Split::Train);
    let (test_docs, test_skipped) = labeled(corpus, Split::Test);
    skipped.extend(test_skipped);
    if train_docs.is_empty() {
        return Err(Error::invalid("no usable training rows"));
    }
    if test_docs.is_empty() {
        return Err(Error::invalid("no usable test rows"));
    }

    let train_rows = encoder_rows(&train_docs, labels)?;
    let encoder = AttributeEncoder::fit(&train_rows, config.encoder_alpha)?;
    let train_attrs = out_of_fold_features(&train_rows, &encoder, config)?;
    let train_logits = logits_for(predictor, &train_docs)?;
    let x_train: Vec<Vec<f64>> = train_logits
        .into_iter()
        .zip(&train_attrs)
        .map(|(mut v, (u, p))| {
            v.extend_from_slice(u);
            v.extend_from_slice(p);
            v
        })
        .collect();
    let y_train: Vec<usize> = train_docs
        .iter()
        .map(|d| d.gold.expect("labeled"))
        .collect();
    let ForestFit { forest, warnings } = train_forest(&x_train, &y_train, labels, &config.forest)?;

    let test = assemble_rows(predictor, &test_docs, &encoder)?;
    let gold: Vec<usize> = test.rows.iter().map(|r| r.gold.expect("labeled")).collect();
    let x_test: Vec<Vec<f64>> = test.rows.iter().map(StackedFeatureRow::features).collect();
    let stacked_pred: Vec<usize> = predict_forest(&forest, &x_test)?
        .into_iter()
        .map(|p| p.argmax.index)
        .collect();
    let base_pred: Vec<usize> = test
        .rows
        .iter()
        .map(|r| crate::types::argmax_index(&r.logits).expect("non-empty logits"))
        .collect();

    Ok(StackedReport {
        stacked: macro_metrics(&confusion_matrix(&gold, &stacked_pred, labels.len())?),
        base: macro_metrics(&confusion_matrix(&gold, &base_pred, labels.len())?),
        n_train: x_train.len(),
        n_test: gold.len(),
        skipped,
        warnings,
        encoder,
        forest,
    })
}
