//! Shared domain types and the black-box predictor contract.
//!
//! Everything downstream (attribution, evaluation, stacking, the wire
//! gateway) talks to classifiers only through [`Predictor`]: a batch of
//! strings in, one [`ProbabilityDistribution`] per string out, in order.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum-to-one check of a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Mask placeholder used by BERT-style model families.
pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub index: usize,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Ordered set of at least two distinctly named labels, indexed from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<Label>,
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::invalid(format!(
                "a label set needs at least 2 labels, got {}",
                names.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::invalid("label names must be non-empty"));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate label name `{name}`")));
            }
        }
        let labels = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| Label { name, index })
            .collect();
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Label> {
        self.labels.get(index)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.labels.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelSet::new(names)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.labels.into_iter().map(|l| l.name).collect()
    }
}

/// Attribute key carrying the reviewer identity.
pub const ATTR_USER_ID: &str = "user_id";
/// Attribute key carrying the reviewed product or business.
pub const ATTR_PRODUCT_ID: &str = "product_id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Index into the owning corpus' [`LabelSet`].
    pub gold: Option<usize>,
    pub attributes: BTreeMap<String, String>,
    /// Set when the text has no tokens at all.
    pub degenerate: bool,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: Option<usize>) -> Self {
        let text = text.into();
        let degenerate = text.split_whitespace().next().is_none();
        Self {
            id: id.into(),
            text,
            gold,
            attributes: BTreeMap::new(),
            degenerate,
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        let key = key.into();
        assert!(!key.is_empty(), "attribute keys must be non-empty");
        self.attributes.insert(key, value.into());
        self
    }

    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

/// Per-document split tag, aligned with `Corpus::documents`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub tags: Vec<Split>,
    /// `None` for corpora distributed with fixed splits.
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn fixed(tags: Vec<Split>) -> Self {
        Self {
            tags,
            seed: None,
            warnings: Vec::new(),
        }
    }

    pub fn count(&self, split: Split) -> usize {
        self.tags.iter().filter(|&&t| t == split).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub labels: LabelSet,
    pub documents: Vec<Document>,
    pub splits: Option<SplitAssignment>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, labels: LabelSet, documents: Vec<Document>) -> Self {
        Self {
            name: name.into(),
            labels,
            documents,
            splits: None,
        }
    }

    pub fn with_splits(mut self, splits: SplitAssignment) -> Result<Self> {
        if splits.tags.len() != self.documents.len() {
            return Err(Error::invalid(format!(
                "split assignment covers {} documents, corpus has {}",
                splits.tags.len(),
                self.documents.len()
            )));
        }
        self.splits = Some(splits);
        Ok(self)
    }

    /// Documents tagged with `split`. A corpus without a split assignment
    /// is treated as all-train.
    pub fn documents_in(&self, split: Split) -> impl Iterator<Item = &Document> + '_ {
        self.documents
            .iter()
            .enumerate()
            .filter(move |(i, _)| match &self.splits {
                Some(s) => s.tags[*i] == split,
                None => split == Split::Train,
            })
            .map(|(_, d)| d)
    }

    pub fn label_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist: BTreeMap<String, usize> =
            self.labels.iter().map(|l| (l.name.clone(), 0)).collect();
        for doc in &self.documents {
            if let Some(label) = doc.gold.and_then(|g| self.labels.get(g)) {
                *hist.entry(label.name.clone()).or_default() += 1;
            }
        }
        hist
    }
}

/// Non-negative probability vector over a label set. Construction does not
/// validate; use [`validate_distribution`] at trust boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityDistribution(Vec<f64>);

impl ProbabilityDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        argmax_index(&self.0)
    }
}

pub(crate) fn argmax_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Length { expected: usize, actual: usize },
    NonFinite { index: usize },
    Range { index: usize, value: f64 },
    Sum { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { expected, actual } => {
                write!(f, "length {actual}, expected {expected}")
            }
            Violation::NonFinite { index } => write!(f, "non-finite entry at {index}"),
            Violation::Range { index, value } => {
                write!(f, "range: entry {index} = {value} outside [0, 1]")
            }
            Violation::Sum { sum } => write!(f, "sum {sum}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport(pub Vec<Violation>);

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "invalid distribution ({})", parts.join("; "))
    }
}

/// Checks range, finiteness, sum-to-one within [`PROB_SUM_TOLERANCE`] and
/// length against the label count.
pub fn validate_distribution(
    dist: &ProbabilityDistribution,
    label_count: usize,
) -> std::result::Result<(), ViolationReport> {
    let mut problems = Vec::new();
    if dist.len() != label_count {
        problems.push(Violation::Length {
            expected: label_count,
            actual: dist.len(),
        });
    }
    let mut sum = 0.0;
    let mut finite = true;
    for (index, &p) in dist.probs().iter().enumerate() {
        if !p.is_finite() {
            problems.push(Violation::NonFinite { index });
            finite = false;
            continue;
        }
        if !(0.0..=1.0).contains(&p) {
            problems.push(Violation::Range { index, value: p });
        }
        sum += p;
    }
    if finite && (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        problems.push(Violation::Sum { sum });
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ViolationReport(problems))
    }
}

/// Label of maximal probability, lowest index on exact ties.
pub fn argmax_label(dist: &ProbabilityDistribution, labels: &LabelSet) -> Result<Label> {
    let index = dist
        .argmax()
        .ok_or_else(|| Error::invalid("argmax of an empty distribution"))?;
    labels.get(index).cloned().ok_or_else(|| {
        Error::invalid(format!(
            "distribution has {} entries but the label set only {}",
            dist.len(),
            labels.len()
        ))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub dist: ProbabilityDistribution,
    pub argmax: Label,
}

impl Prediction {
    pub fn from_distribution(dist: ProbabilityDistribution, labels: &LabelSet) -> Result<Self> {
        let argmax = argmax_label(&dist, labels)?;
        Ok(Self { dist, argmax })
    }

    /// Probability of the argmax label.
    pub fn confidence(&self) -> f64 {
        self.dist.get(self.argmax.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Native,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorHandle {
    pub name: String,
    pub mask_token: String,
    pub label_set: LabelSet,
    pub kind: PredictorKind,
}

impl PredictorHandle {
    pub fn new(
        name: impl Into<String>,
        mask_token: impl Into<String>,
        label_set: LabelSet,
        kind: PredictorKind,
    ) -> Result<Self> {
        let mask_token = mask_token.into();
        if mask_token.is_empty() {
            return Err(Error::invalid("mask token must be non-empty"));
        }
        Ok(Self {
            name: name.into(),
            mask_token,
            label_set,
            kind,
        })
    }
}

/// Whether `predict_batch` may be invoked from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Concurrent,
    Serial,
}

/// Black-box text classifier.
///
/// `predict_batch` must be order-preserving and deterministic for a fixed
/// trained state. Implementations that cannot be called from several
/// threads at once report [`Concurrency::Serial`].
pub trait Predictor: Send + Sync {
    fn handle(&self) -> &PredictorHandle;

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn name(&self) -> &str {
        &self.handle().name
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn handle(&self) -> &PredictorHandle {
        (**self).handle()
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        (**self).predict_batch(texts)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn handle(&self) -> &PredictorHandle {
        (**self).handle()
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        (**self).predict_batch(texts)
    }

    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
}

/// Predictor that returns the same distribution for every input.
#[derive(Debug, Clone)]
pub struct ConstantPredictor {
    handle: PredictorHandle,
    dist: ProbabilityDistribution,
}

impl ConstantPredictor {
    pub fn new(name: &str, labels: LabelSet, probs: Vec<f64>) -> Result<Self> {
        let dist = ProbabilityDistribution::new(probs);
        validate_distribution(&dist, labels.len()).map_err(|r| Error::invalid(r.to_string()))?;
        Ok(Self {
            handle: PredictorHandle::new(name, DEFAULT_MASK_TOKEN, labels, PredictorKind::Native)?,
            dist,
        })
    }
}

impl Predictor for ConstantPredictor {
    fn handle(&self) -> &PredictorHandle {
        &self.handle
    }

    fn predict_batch(&self, texts: &[String]) -> Result<Vec<ProbabilityDistribution>> {
        Ok(vec![self.dist.clone(); texts.len()])
    }
}
