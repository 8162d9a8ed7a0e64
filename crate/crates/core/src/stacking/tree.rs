//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature; rows with `x <= threshold` go left. Split quality is compared
//! exactly in integer arithmetic, and a candidate replaces the current best
//! only on strict improvement. Features are scanned in ascending index order
//! and thresholds ascending, so ties resolve to the lowest feature and then
//! the lowest threshold.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "n")]
pub enum FeaturesPerSplit {
    All,
    /// `ceil(sqrt(F))`
    Sqrt,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            FeaturesPerSplit::Count(n) => n,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeaturesPerSplit::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Arena of nodes, root at index 0.
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

/// Exact split score `S_L / n_L + S_R / n_R` with `S = sum_k count_k^2`,
/// stored as a fraction. Larger is better; it equals `n * (1 - weighted Gini)`.
#[derive(Debug, Clone, Copy)]
pub struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn new(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Self {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for SplitScore {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SplitScore {}

impl PartialOrd for SplitScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SplitScore {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub score: SplitScore,
    /// Weighted Gini impurity of the two children.
    pub impurity: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a / 2.0 + b / 2.0;
    if a <= t && t < b {
        t
    } else {
        a
    }
}

fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Best Gini split of the rows `idx` (with integer weights) over `features`,
/// or `None` when no threshold leaves `min_leaf` weight on both sides.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    weights: &[u64],
    idx: &[usize],
    features: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let mut total_counts = vec![0u64; n_classes];
    for &i in idx {
        total_counts[y[i]] += weights[i];
    }
    let n_total: u64 = total_counts.iter().sum();
    let min_leaf = min_leaf.max(1) as u64;
    let mut best: Option<SplitChoice> = None;
    let mut sorted = idx.to_vec();

    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = vec![0u64; n_classes];
        let mut n_left = 0u64;
        for w in 0..sorted.len().saturating_sub(1) {
            let i = sorted[w];
            left[y[i]] += weights[i];
            n_left += weights[i];
            let (a, b) = (x[i][f], x[sorted[w + 1]][f]);
            if a == b {
                continue;
            }
            let n_right = n_total - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right: Vec<u64> = total_counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score = SplitScore::new(
                sum_sq(&left),
                n_left as u128,
                sum_sq(&right),
                n_right as u128,
            );
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(a, b),
                    score,
                    impurity: (n_total as f64 - score.value()) / n_total as f64,
                });
            }
        }
    }
    best
}

impl DecisionTree {
    /// Fits on the rows with non-zero weight. `rng` drives per-node feature
    /// sampling only.
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[usize],
        weights: &[u64],
        n_classes: usize,
        config: &TreeConfig,
        rng: &mut R,
    ) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_features,
            n_classes,
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf.max(1),
        };
        let idx: Vec<usize> = (0..x.len()).filter(|&i| weights[i] > 0).collect();
        tree.grow(x, y, weights, idx, 0, config, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng>(
        &mut self,
        x: &[Vec<f64>],
        y: &[usize],
        weights: &[u64],
        idx: Vec<usize>,
        depth: usize,
        config: &TreeConfig,
        rng: &mut R,
    ) -> usize {
        let mut counts = vec![0u64; self.n_classes];
        for &i in &idx {
            counts[y[i]] += weights[i];
        }
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = config.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || self.n_features == 0 {
            return node_id;
        }

        let m = config.features_per_split.resolve(self.n_features);
        let mut features: Vec<usize> = if m >= self.n_features {
            (0..self.n_features).collect()
        } else {
            sample(rng, self.n_features, m).into_vec()
        };
        features.sort_unstable();
        let mut choice = best_split(
            x,
            y,
            weights,
            &idx,
            &features,
            self.n_classes,
            self.min_samples_leaf,
        );
        if choice.is_none() && features.len() < self.n_features {
            // Every sampled feature was constant here; widen to all features.
            let all: Vec<usize> = (0..self.n_features).collect();
            choice = best_split(
                x,
                y,
                weights,
                &idx,
                &all,
                self.n_classes,
                self.min_samples_leaf,
            );
        }
        let Some(choice) = choice else {
            return node_id;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| x[i][choice.feature] <= choice.threshold);
        let left = self.grow(x, y, weights, left_idx, depth + 1, config, rng);
        let right = self.grow(x, y, weights, right_idx, depth + 1, config, rng);
        self.nodes[node_id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        node_id
    }

    pub fn leaf_counts(&self, row: &[f64]) -> &[u64] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Leaf histogram normalised to a distribution.
    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let counts = self.leaf_counts(row);
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}
