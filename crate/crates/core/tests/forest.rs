use maskprobe::stacking::{
    best_split, predict_forest, train_forest, DecisionTree, FeaturesPerSplit, ForestConfig,
    TreeConfig,
};
use maskprobe::types::LabelSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=200);
    let f = rng.random_range(1..=6);
    let n_classes = rng.random_range(2..=4);
    let coarse = rng.random_bool(0.5);
    let x = (0..n)
        .map(|_| {
            (0..f)
                .map(|_| {
                    if coarse {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.random_range(-10.0..10.0)
                    }
                })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.random_range(0..n_classes)).collect();
    Instance { x, y, n_classes }
}

/// Weighted Gini of every (feature, midpoint) pair, in f64.
fn exhaustive(inst: &Instance) -> Vec<(usize, f64, f64)> {
    let n = inst.x.len() as f64;
    let gini = |rows: &[usize]| {
        let mut counts = vec![0.0; inst.n_classes];
        for &i in rows {
            counts[inst.y[i]] += 1.0;
        }
        let m = rows.len() as f64;
        1.0 - counts.iter().map(|c| (c / m) * (c / m)).sum::<f64>()
    };
    let mut out = Vec::new();
    for f in 0..inst.x[0].len() {
        let mut values: Vec<f64> = inst.x.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) =
                (0..inst.x.len()).partition(|&i| inst.x[i][f] <= t);
            let g = (left.len() as f64 * gini(&left) + right.len() as f64 * gini(&right)) / n;
            out.push((f, t, g));
        }
    }
    out
}

#[test]
fn chosen_split_matches_exhaustive_search() {
    for seed in 0..50 {
        let inst = random_instance(seed);
        let idx: Vec<usize> = (0..inst.x.len()).collect();
        let features: Vec<usize> = (0..inst.x[0].len()).collect();
        let weights = vec![1; inst.x.len()];
        let chosen = best_split(
            &inst.x,
            &inst.y,
            &weights,
            &idx,
            &features,
            inst.n_classes,
            1,
        );
        let candidates = exhaustive(&inst);
        match chosen {
            None => assert!(candidates.is_empty(), "seed {seed}"),
            Some(c) => {
                let min = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                let first = candidates.iter().find(|c| c.2 - min <= 1e-12).unwrap();
                assert_eq!((c.feature, c.threshold), (first.0, first.1), "seed {seed}");
                assert!((c.impurity - min).abs() <= 1e-12, "seed {seed}");
            }
        }
    }
}

fn labels(n: usize) -> LabelSet {
    LabelSet::new((0..n).map(|i| i.to_string())).unwrap()
}

fn one_tree() -> ForestConfig {
    ForestConfig {
        n_trees: 1,
        bootstrap: false,
        features_per_split: FeaturesPerSplit::All,
        ..Default::default()
    }
}

#[test]
fn single_tree_fits_contradiction_free_data() {
    for seed in 0..20 {
        let inst = random_instance(seed + 100);
        // Drop rows whose feature vector already appeared with another label.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, &label) in inst.x.iter().zip(&inst.y) {
            match x.iter().position(|r: &Vec<f64>| r == row) {
                Some(j) if y[j] != label => {}
                Some(_) => {}
                None => {
                    x.push(row.clone());
                    y.push(label);
                }
            }
        }
        let forest = train_forest(&x, &y, &labels(inst.n_classes), &one_tree())
            .unwrap()
            .forest;
        let predicted = predict_forest(&forest, &x).unwrap();
        for (p, &label) in predicted.iter().zip(&y) {
            assert_eq!(p.argmax.index, label, "seed {seed}");
        }
    }
}

#[test]
fn xor_needs_depth_two_and_gets_it() {
    let x = vec![
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ];
    let y = vec![0, 1, 1, 0];
    // No single split separates XOR.
    let inst = Instance {
        x: x.clone(),
        y: y.clone(),
        n_classes: 2,
    };
    assert!(exhaustive(&inst).iter().all(|c| c.2 > 0.0));
    let config = ForestConfig {
        max_depth: Some(2),
        ..one_tree()
    };
    let forest = train_forest(&x, &y, &labels(2), &config).unwrap().forest;
    let predicted = predict_forest(&forest, &x).unwrap();
    assert!(predicted.iter().zip(&y).all(|(p, &l)| p.argmax.index == l));
}

#[test]
fn parallel_training_is_schedule_independent() {
    let inst = random_instance(7);
    let config = ForestConfig {
        n_trees: 16,
        ..Default::default()
    };
    let train_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_forest(&inst.x, &inst.y, &labels(inst.n_classes), &config).unwrap())
    };
    let a = train_with(1).forest;
    let b = train_with(4).forest;
    for (ta, tb) in a.trees.iter().zip(&b.trees) {
        assert_eq!(
            serde_json::to_vec(ta).unwrap(),
            serde_json::to_vec(tb).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn constant_feature_never_changes_tree(seed in 0u64..500, constant in -5.0f64..5.0) {
        let inst = random_instance(seed);
        let config = TreeConfig::default();
        let w = vec![1; inst.x.len()];
        let plain = DecisionTree::fit(&inst.x, &inst.y, &w, inst.n_classes, &config, &mut ChaCha8Rng::seed_from_u64(0));
        let padded: Vec<Vec<f64>> = inst.x.iter().map(|r| {
            let mut r = r.clone();
            r.insert(0, constant);
            r
        }).collect();
        let wide = DecisionTree::fit(&padded, &inst.y, &w, inst.n_classes, &config, &mut ChaCha8Rng::seed_from_u64(0));
        for (row, prow) in inst.x.iter().zip(&padded) {
            prop_assert_eq!(plain.predict_proba(row), wide.predict_proba(prow));
        }
    }

    #[test]
    fn forest_distributions_are_valid(seed in 0u64..200) {
        let inst = random_instance(seed);
        let config = ForestConfig { n_trees: 5, seed, ..Default::default() };
        let forest = train_forest(&inst.x, &inst.y, &labels(inst.n_classes), &config).unwrap().forest;
        for row in &inst.x {
            let d = forest.predict_proba(row).unwrap();
            prop_assert!(maskprobe::types::validate_distribution(&d, inst.n_classes).is_ok());
        }
    }
}
