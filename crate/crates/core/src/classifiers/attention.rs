//! Single-head self-attention text classifier.
//!
//! Forward pass: embed → scaled dot-product attention → mean pool →
//! linear → softmax. Gradients are derived by hand; the test suite checks
//! them against central finite differences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labeled_train;
use super::naive_bayes::normalize_log;
use super::vocab::{build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::types::{Corpus, ProbabilityDistribution};

/// Token id reserved for out-of-vocabulary words and the mask token.
pub const UNK_ID: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Inputs are truncated to this many tokens.
    pub max_len: usize,
    pub min_df: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            epochs: 20,
            lr: 0.05,
            seed: 0,
            max_len: 256,
            min_df: 1,
        }
    }
}

/// All trainable tensors, row-major. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// `(vocab + 1) x dim`, row 0 is UNK.
    pub embeddings: Vec<f64>,
    pub query: Vec<f64>,
    pub key: Vec<f64>,
    pub value: Vec<f64>,
    /// `dim x labels`
    pub output: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl AttentionParams {
    fn zeros_like(other: &Self) -> Self {
        Self {
            embeddings: vec![0.0; other.embeddings.len()],
            query: vec![0.0; other.query.len()],
            key: vec![0.0; other.key.len()],
            value: vec![0.0; other.value.len()],
            output: vec![0.0; other.output.len()],
            output_bias: vec![0.0; other.output_bias.len()],
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 6] {
        [
            &self.embeddings,
            &self.query,
            &self.key,
            &self.value,
            &self.output,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.embeddings,
            &mut self.query,
            &mut self.key,
            &mut self.value,
            &mut self.output,
            &mut self.output_bias,
        ]
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyAttentionModel {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub n_labels: usize,
    pub max_len: usize,
    pub params: AttentionParams,
}

/// Intermediate activations kept for the backward pass.
struct Forward {
    x: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    attn: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    probs: Vec<f64>,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.random_range(-a..a)).collect()
}

/// `row · M` for a `rows x cols` matrix `m`.
fn vec_mat(row: &[f64], m: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (a, &x) in row.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(&m[a * cols..(a + 1) * cols]) {
            *o += x * w;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    normalize_log(row)
}

impl TinyAttentionModel {
    pub fn new(vocab: Vocabulary, n_labels: usize, config: &AttentionConfig) -> Result<Self> {
        if config.dim < 2 {
            return Err(Error::invalid(format!(
                "dim must be >= 2, got {}",
                config.dim
            )));
        }
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = AttentionParams {
            embeddings: xavier(&mut rng, vocab.len() + 1, d),
            query: xavier(&mut rng, d, d),
            key: xavier(&mut rng, d, d),
            value: xavier(&mut rng, d, d),
            output: xavier(&mut rng, d, n_labels),
            output_bias: vec![0.0; n_labels],
        };
        Ok(Self {
            vocab,
            dim: d,
            n_labels,
            max_len: config.max_len.max(1),
            params,
        })
    }

    /// Token ids for `text`; the mask token and unknown words map to [`UNK_ID`].
    pub fn encode(&self, text: &str, mask_token: &str) -> Vec<usize> {
        text.split_whitespace()
            .filter_map(|w| {
                if w == mask_token {
                    return Some(UNK_ID);
                }
                let t = w.trim_matches(|c: char| !c.is_alphanumeric());
                if t.is_empty() {
                    return None;
                }
                Some(self.vocab.get(&t.to_lowercase()).map_or(UNK_ID, |i| i + 1))
            })
            .take(self.max_len)
            .collect()
    }

    fn forward(&self, ids: &[usize]) -> Forward {
        let d = self.dim;
        let p = &self.params;
        let x: Vec<Vec<f64>> = ids
            .iter()
            .map(|&t| p.embeddings[t * d..(t + 1) * d].to_vec())
            .collect();
        let q: Vec<Vec<f64>> = x.iter().map(|r| vec_mat(r, &p.query, d)).collect();
        let k: Vec<Vec<f64>> = x.iter().map(|r| vec_mat(r, &p.key, d)).collect();
        let v: Vec<Vec<f64>> = x.iter().map(|r| vec_mat(r, &p.value, d)).collect();
        let scale = 1.0 / (d as f64).sqrt();
        let attn: Vec<Vec<f64>> = q
            .iter()
            .map(|qi| softmax(&k.iter().map(|kj| dot(qi, kj) * scale).collect::<Vec<_>>()))
            .collect();
        let n = ids.len();
        let mut pooled = vec![0.0; d];
        for row in &attn {
            for (a_ij, vj) in row.iter().zip(&v) {
                for (o, val) in pooled.iter_mut().zip(vj) {
                    *o += a_ij * val;
                }
            }
        }
        if n > 0 {
            pooled.iter_mut().for_each(|o| *o /= n as f64);
        }
        let mut logits = vec_mat(&pooled, &p.output, self.n_labels);
        for (l, b) in logits.iter_mut().zip(&p.output_bias) {
            *l += b;
        }
        let probs = softmax(&logits);
        Forward {
            x,
            q,
            k,
            v,
            attn,
            pooled,
            probs,
        }
    }

    pub fn proba_ids(&self, ids: &[usize]) -> ProbabilityDistribution {
        ProbabilityDistribution::new(self.forward(ids).probs)
    }

    pub fn proba(&self, text: &str, mask_token: &str) -> ProbabilityDistribution {
        self.proba_ids(&self.encode(text, mask_token))
    }

    /// Attention weight matrix for the given token ids.
    pub fn attention_weights(&self, ids: &[usize]) -> Vec<Vec<f64>> {
        self.forward(ids).attn
    }

    /// Cross-entropy of `label` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, ids: &[usize], label: usize) -> (f64, AttentionParams) {
        let d = self.dim;
        let nl = self.n_labels;
        let p = &self.params;
        let f = self.forward(ids);
        let n = ids.len();
        let loss = -f.probs[label].ln();

        let mut g = AttentionParams::zeros_like(p);
        let mut dlogits = f.probs.clone();
        dlogits[label] -= 1.0;
        for a in 0..d {
            for l in 0..nl {
                g.output[a * nl + l] = f.pooled[a] * dlogits[l];
            }
        }
        g.output_bias.copy_from_slice(&dlogits);
        if n == 0 {
            return (loss, g);
        }

        let dpooled: Vec<f64> = (0..d)
            .map(|a| dot(&p.output[a * nl..(a + 1) * nl], &dlogits))
            .collect();
        let dh: Vec<f64> = dpooled.iter().map(|v| v / n as f64).collect();
        // Every position receives the same upstream gradient from mean pooling.
        let da: Vec<f64> = f.v.iter().map(|vj| dot(&dh, vj)).collect();
        let mut dv = vec![vec![0.0; d]; n];
        for row in &f.attn {
            for (j, a_ij) in row.iter().enumerate() {
                for (o, h) in dv[j].iter_mut().zip(&dh) {
                    *o += a_ij * h;
                }
            }
        }
        let scale = 1.0 / (d as f64).sqrt();
        let mut dq = vec![vec![0.0; d]; n];
        let mut dk = vec![vec![0.0; d]; n];
        for i in 0..n {
            let row = &f.attn[i];
            let mean = dot(row, &da);
            for j in 0..n {
                let ds = row[j] * (da[j] - mean) * scale;
                if ds == 0.0 {
                    continue;
                }
                for b in 0..d {
                    dq[i][b] += ds * f.k[j][b];
                    dk[j][b] += ds * f.q[i][b];
                }
            }
        }

        for i in 0..n {
            for a in 0..d {
                let xa = f.x[i][a];
                for b in 0..d {
                    g.query[a * d + b] += xa * dq[i][b];
                    g.key[a * d + b] += xa * dk[i][b];
                    g.value[a * d + b] += xa * dv[i][b];
                }
            }
            let t = ids[i];
            for a in 0..d {
                let w = a * d..(a + 1) * d;
                let dx = dot(&p.query[w.clone()], &dq[i])
                    + dot(&p.key[w.clone()], &dk[i])
                    + dot(&p.value[w], &dv[i]);
                g.embeddings[t * d + a] += dx;
            }
        }
        (loss, g)
    }

    fn sgd_step(&mut self, grad: &AttentionParams, lr: f64) {
        for (param, g) in self.params.tensors_mut().into_iter().zip(grad.tensors()) {
            for (w, dw) in param.iter_mut().zip(g) {
                *w -= lr * dw;
            }
        }
    }

    /// Same model with vocabulary term `i` moved to index `perm[i]` and the
    /// embedding rows moved along with it.
    pub fn with_permuted_vocabulary(&self, perm: &[usize]) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        out.vocab = self.vocab.permuted(perm);
        for (old, &new) in perm.iter().enumerate() {
            let src = (old + 1) * d..(old + 2) * d;
            out.params.embeddings[(new + 1) * d..(new + 2) * d]
                .copy_from_slice(&self.params.embeddings[src]);
        }
        out
    }
}

pub fn train_tiny_attention(
    corpus: &Corpus,
    config: &AttentionConfig,
) -> Result<TinyAttentionModel> {
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    let train = labeled_train(corpus)?;
    let vocab = build_vocabulary(corpus, config.min_df)?;
    let mut model = TinyAttentionModel::new(vocab, corpus.labels.len(), config)?;
    let data: Vec<(Vec<usize>, usize)> = train
        .iter()
        .map(|(d, y)| (model.encode(&d.text, ""), *y))
        .collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_a77e);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (ids, y) = &data[i];
            let (loss, grad) = model.loss_and_gradient(ids, *y);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "loss {loss} in epoch {epoch} on training document {i}"
                )));
            }
            model.sgd_step(&grad, config.lr);
        }
        if !model.params.all_finite() {
            return Err(Error::TrainingDiverged(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
    }
    Ok(model)
}
