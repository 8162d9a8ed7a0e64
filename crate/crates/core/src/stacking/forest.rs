use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, FeaturesPerSplit, TreeConfig};
use crate::error::{Error, Result};
use crate::types::{LabelSet, Prediction, ProbabilityDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub labels: LabelSet,
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestFit {
    pub forest: RandomForest,
    pub warnings: Vec<String>,
}

/// RNG for tree `index`: independent of the order trees are scheduled in.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Trains a forest on `(features, label index)` rows.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[usize],
    labels: &LabelSet,
    config: &ForestConfig,
) -> Result<ForestFit> {
    if x.is_empty() {
        return Err(Error::invalid("cannot train a forest on zero rows"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let n_features = x[0].len();
    let n_classes = labels.len();
    for (i, (row, &label)) in x.iter().zip(y).enumerate() {
        if row.len() != n_features {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected {n_features}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("row {i} feature {j} is not finite")));
        }
        if label >= n_classes {
            return Err(Error::invalid(format!(
                "row {i} label index {label} outside {n_classes} classes"
            )));
        }
    }

    let mut warnings = Vec::new();
    let first = y[0];
    if y.iter().all(|&l| l == first) {
        warnings.push(format!(
            "all {} training rows have label `{}`; the forest predicts it constantly",
            y.len(),
            labels.get(first).map_or("?", |l| l.name.as_str())
        ));
    }

    let tree_config = config.tree_config();
    let n = x.len();
    let trees: Vec<DecisionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(config.seed, t);
            let mut weights = vec![0u64; n];
            if config.bootstrap {
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1;
                }
            } else {
                weights.fill(1);
            }
            DecisionTree::fit(x, y, &weights, n_classes, &tree_config, &mut rng)
        })
        .collect();

    Ok(ForestFit {
        forest: RandomForest {
            labels: labels.clone(),
            n_features,
            config: *config,
            trees,
        },
        warnings,
    })
}

impl RandomForest {
    /// Mean of the per-tree normalised leaf histograms.
    pub fn predict_proba(&self, row: &[f64]) -> Result<ProbabilityDistribution> {
        if row.len() != self.n_features {
            return Err(Error::invalid(format!(
                "row has {} features, forest was trained on {}",
                row.len(),
                self.n_features
            )));
        }
        let mut acc = vec![0.0; self.labels.len()];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.predict_proba(row)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        Ok(ProbabilityDistribution::new(
            acc.into_iter().map(|a| a / n).collect(),
        ))
    }
}

pub fn predict_forest(forest: &RandomForest, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
    rows.iter()
        .map(|row| Prediction::from_distribution(forest.predict_proba(row)?, &forest.labels))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stacking::tree::Node;
    use crate::types::validate_distribution;

    fn labels(n: usize) -> LabelSet {
        LabelSet::new((0..n).map(|i| format!("c{i}"))).unwrap()
    }

    fn single_tree() -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            ..Default::default()
        }
    }

    fn leaf(class: usize, n_classes: usize) -> DecisionTree {
        let mut counts = vec![0; n_classes];
        counts[class] = 1;
        DecisionTree {
            nodes: vec![Node::Leaf { counts }],
            n_features: 1,
            n_classes,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }

    #[test]
    fn three_pure_trees_average_votes() {
        let forest = RandomForest {
            labels: labels(2),
            n_features: 1,
            config: ForestConfig::default(),
            trees: vec![leaf(0, 2), leaf(0, 2), leaf(1, 2)],
        };
        let p = forest.predict_proba(&[0.0]).unwrap();
        assert!((p.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            predict_forest(&forest, &[vec![0.0]]).unwrap()[0]
                .argmax
                .index,
            0
        );
    }

    #[test]
    fn one_tree_forest_equals_its_histogram() {
        let x = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        let y = vec![0, 0, 1, 1];
        let fit = train_forest(&x, &y, &labels(2), &single_tree()).unwrap();
        let tree = &fit.forest.trees[0];
        let p = fit.forest.predict_proba(&[0.0]).unwrap();
        assert_eq!(p.probs(), tree.predict_proba(&[0.0]).as_slice());
        assert!((p.get(0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_gives_constant_forest_with_warning() {
        let x = vec![vec![0.0], vec![5.0]];
        let fit = train_forest(&x, &[1, 1], &labels(3), &ForestConfig::default()).unwrap();
        assert_eq!(fit.warnings.len(), 1);
        for v in [-1.0, 2.0, 9.0] {
            assert_eq!(
                fit.forest.predict_proba(&[v]).unwrap().probs(),
                &[0.0, 1.0, 0.0]
            );
        }
    }

    #[test]
    fn empty_batch_and_length_mismatch() {
        let fit =
            train_forest(&[vec![0.0], vec![1.0]], &[0, 1], &labels(2), &single_tree()).unwrap();
        assert!(predict_forest(&fit.forest, &[]).unwrap().is_empty());
        assert!(matches!(
            predict_forest(&fit.forest, &[vec![0.0, 1.0]]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn deterministic_and_valid() {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, (i * 13 % 11) as f64, (i % 3) as f64])
            .collect();
        let y: Vec<usize> = (0..60).map(|i| (i * 5 % 9) % 3).collect();
        let config = ForestConfig {
            n_trees: 12,
            ..Default::default()
        };
        let a = train_forest(&x, &y, &labels(3), &config).unwrap().forest;
        let b = train_forest(&x, &y, &labels(3), &config).unwrap().forest;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for row in &x {
            validate_distribution(&a.predict_proba(row).unwrap(), 3).unwrap();
        }
    }

    #[test]
    fn rejects_non_finite_features() {
        let err = train_forest(
            &[vec![f64::NAN], vec![1.0]],
            &[0, 1],
            &labels(2),
            &single_tree(),
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
