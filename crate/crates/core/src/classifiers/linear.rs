//! One-vs-rest linear classifier on L2-normalised TF-IDF, trained by
//! stochastic subgradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labeled_train;
use super::naive_bayes::normalize_log;
use super::vocab::{build_vocabulary, TfidfVector, Vocabulary};
use crate::error::{Error, Result};
use crate::types::{argmax_index, Corpus, ProbabilityDistribution, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub loss: LossKind,
    pub epochs: usize,
    /// Initial step size; decays as `lr / (1 + lr * l2 * t)`.
    pub lr: f64,
    pub l2: f64,
    pub min_df: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Hinge,
            epochs: 15,
            lr: 1.0,
            l2: 1e-4,
            min_df: 1,
            seed: 0,
        }
    }
}

/// Regularisation strengths tried by [`grid_search_linear`].
pub const DEFAULT_L2_GRID: [f64; 4] = [1e-5, 3e-5, 1e-4, 3e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub vocab: Vocabulary,
    pub loss: LossKind,
    /// `weights[class][term]`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Regularised training objective after each epoch.
    pub loss_history: Vec<f64>,
}

pub fn train_linear_tfidf(corpus: &Corpus, config: &LinearConfig) -> Result<LinearModel> {
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    if !(config.lr > 0.0 && config.l2 >= 0.0) {
        return Err(Error::invalid("learning rate must be > 0 and l2 >= 0"));
    }
    let train = labeled_train(corpus)?;
    let vocab = build_vocabulary(corpus, config.min_df)?;
    if vocab.is_empty() {
        return Err(Error::degenerate("vocabulary is empty"));
    }
    let xs: Vec<TfidfVector> = train
        .iter()
        .map(|(d, _)| vocab.tfidf(&d.text, ""))
        .collect();
    let ys: Vec<usize> = train.iter().map(|(_, y)| *y).collect();

    let n_classes = corpus.labels.len();
    // w_c = scale_c * v_c so the L2 shrink is O(1) per step.
    let mut v = vec![vec![0.0; vocab.len()]; n_classes];
    let mut scale = vec![1.0f64; n_classes];
    let mut bias = vec![0.0; n_classes];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut step = 0u64;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = config.lr / (1.0 + config.lr * config.l2 * step as f64);
            step += 1;
            let x = &xs[i];
            for c in 0..n_classes {
                let y = if ys[i] == c { 1.0 } else { -1.0 };
                let margin = y * (scale[c] * x.dot(&v[c]) + bias[c]);
                let g = match config.loss {
                    LossKind::Hinge if margin < 1.0 => y,
                    LossKind::Hinge => 0.0,
                    LossKind::Logistic => y * sigmoid(-margin),
                };
                scale[c] *= 1.0 - eta * config.l2;
                if g != 0.0 {
                    let coef = eta * g / scale[c];
                    for &(t, w) in &x.0 {
                        v[c][t] += coef * w;
                    }
                    bias[c] += eta * g;
                }
                if scale[c] < 1e-9 {
                    v[c].iter_mut().for_each(|w| *w *= scale[c]);
                    scale[c] = 1.0;
                }
            }
        }
        let weights: Vec<Vec<f64>> = v
            .iter()
            .zip(&scale)
            .map(|(row, s)| row.iter().map(|w| w * s).collect())
            .collect();
        let objective = objective(&weights, &bias, &xs, &ys, config);
        if !objective.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "objective became {objective} after {step} steps"
            )));
        }
        loss_history.push(objective);
    }

    let weights = v
        .into_iter()
        .zip(scale)
        .map(|(row, s)| row.into_iter().map(|w| w * s).collect())
        .collect();
    Ok(LinearModel {
        vocab,
        loss: config.loss,
        weights,
        bias,
        loss_history,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn objective(
    weights: &[Vec<f64>],
    bias: &[f64],
    xs: &[TfidfVector],
    ys: &[usize],
    config: &LinearConfig,
) -> f64 {
    let mut total = 0.0;
    for (x, &label) in xs.iter().zip(ys) {
        for (c, (w, b)) in weights.iter().zip(bias).enumerate() {
            let y = if label == c { 1.0 } else { -1.0 };
            let m = y * (x.dot(w) + b);
            total += match config.loss {
                LossKind::Hinge => (1.0 - m).max(0.0),
                LossKind::Logistic => (1.0 + (-m).exp()).ln(),
            };
        }
    }
    let reg: f64 = weights.iter().flatten().map(|w| w * w).sum();
    total / xs.len().max(1) as f64 + 0.5 * config.l2 * reg
}

impl LinearModel {
    pub fn scores(&self, text: &str, mask_token: &str) -> Vec<f64> {
        let x = self.vocab.tfidf(text, mask_token);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| x.dot(w) + b)
            .collect()
    }

    /// Softmax over the per-class scores.
    pub fn proba(&self, text: &str, mask_token: &str) -> ProbabilityDistribution {
        ProbabilityDistribution::new(normalize_log(&self.scores(text, mask_token)))
    }

    pub fn predict_index(&self, text: &str) -> usize {
        argmax_index(&self.scores(text, "")).unwrap_or(0)
    }
}

/// Picks the `l2` value with the best validation accuracy (first wins on
/// ties). Without a validation split the base config is returned unchanged.
pub fn grid_search_linear(
    corpus: &Corpus,
    base: &LinearConfig,
    l2_grid: &[f64],
) -> Result<(LinearConfig, Option<f64>)> {
    let val: Vec<_> = corpus
        .documents_in(Split::Val)
        .filter_map(|d| d.gold.map(|g| (d.text.as_str(), g)))
        .collect();
    if val.is_empty() || l2_grid.is_empty() {
        return Ok((base.clone(), None));
    }
    let mut best: Option<(LinearConfig, f64)> = None;
    for &l2 in l2_grid {
        let config = LinearConfig { l2, ..base.clone() };
        let model = train_linear_tfidf(corpus, &config)?;
        let correct = val
            .iter()
            .filter(|(t, g)| model.predict_index(t) == *g)
            .count();
        let acc = correct as f64 / val.len() as f64;
        if best.as_ref().is_none_or(|(_, b)| acc > *b) {
            best = Some((config, acc));
        }
    }
    let (config, acc) = best.expect("grid is non-empty");
    Ok((config, Some(acc)))
}
