//! Multinomial naive Bayes over bag-of-words counts with Laplace smoothing.

use serde::{Deserialize, Serialize};

use super::labeled_train;
use super::vocab::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::types::{Corpus, ProbabilityDistribution};

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub vocab: Vocabulary,
    pub alpha: f64,
    pub log_priors: Vec<f64>,
    /// `log_likelihoods[class][term]`
    pub log_likelihoods: Vec<Vec<f64>>,
}

pub fn train_naive_bayes(corpus: &Corpus, alpha: f64) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing alpha must be > 0, got {alpha}"
        )));
    }
    let train = labeled_train(corpus)?;
    let vocab = build_vocabulary(corpus, 1)?;
    let n_classes = corpus.labels.len();

    let mut doc_counts = vec![0usize; n_classes];
    let mut term_counts = vec![vec![0.0f64; vocab.len()]; n_classes];
    for (doc, class) in &train {
        doc_counts[*class] += 1;
        for (term, count) in vocab.counts(&doc.text, "") {
            term_counts[*class][term] += count;
        }
    }

    let n = train.len() as f64;
    let log_priors = doc_counts.iter().map(|&c| (c as f64 / n).ln()).collect();
    let v = vocab.len() as f64;
    let log_likelihoods = term_counts
        .iter()
        .map(|counts| {
            let total: f64 = counts.iter().sum();
            let denom = (total + alpha * v).ln();
            counts.iter().map(|&c| (c + alpha).ln() - denom).collect()
        })
        .collect();

    Ok(NaiveBayesModel {
        vocab,
        alpha,
        log_priors,
        log_likelihoods,
    })
}

impl NaiveBayesModel {
    /// Unnormalised log joint `log P(c) + sum_t n_t log P(t | c)`.
    pub fn log_joint(&self, text: &str, mask_token: &str) -> Vec<f64> {
        let counts = self.vocab.counts(text, mask_token);
        self.log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(prior, lik)| prior + counts.iter().map(|&(t, n)| n * lik[t]).sum::<f64>())
            .collect()
    }

    pub fn posterior(&self, text: &str, mask_token: &str) -> ProbabilityDistribution {
        ProbabilityDistribution::new(normalize_log(&self.log_joint(text, mask_token)))
    }
}

/// exp-normalise a vector of log weights.
pub(crate) fn normalize_log(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
