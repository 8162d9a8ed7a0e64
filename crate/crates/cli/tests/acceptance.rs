//! Acceptance suite: one PASS / FAIL / BLOCKED line per criterion.
//!
//! Corpus-backed criteria read `MASKPROBE_DATA`, a directory holding
//! `bbc-news/`, `bbc-sport/`, `phrasebank/`, `yelp/` and `semeval/` in their
//! distributed layouts. Without it they report BLOCKED, which is not a pass.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use maskprobe::attribution::occlusion_importances;
use maskprobe::classifiers::{
    train, AttentionConfig, ModelKind, NativePredictor, TinyAttentionModel, TrainSpec, Vocabulary,
};
use maskprobe::evaluation::{confusion_matrix, macro_metrics, ConfusionMatrix};
use maskprobe::ingestion::{
    check_manifest, load_corpus, transform_entity_markers, AgreementTier, CorpusKind,
};
use maskprobe::stacking::{
    best_split, predict_forest, stacked_pipeline, train_forest, FeaturesPerSplit, ForestConfig,
    StackingConfig,
};
use maskprobe::synthetic::{fuzz_sentences, noisy_rater_corpus, topic_corpus, NoisyRaterConfig};
use maskprobe::types::{ConstantPredictor, Document, LabelSet, Predictor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ATTRIBUTION_TOL: f64 = 1e-12;
const ATTRIBUTION_BUDGET: Duration = Duration::from_secs(120);
const METRICS_TOL: f64 = 1e-12;
const GRADIENT_H: f64 = 1e-5;
const GRADIENT_MAX_REL: f64 = 1e-4;
const SPLIT_TIE_TOL: f64 = 1e-12;
const STACK_MIN_GAIN: f64 = 5.0;
const STACK_MAX_NEUTRAL_GAP: f64 = 2.0;
const STACK_MIN_LEAF: usize = 30;
const BASELINE_BUDGET: Duration = Duration::from_secs(15 * 60);
const DATA_ENV: &str = "MASKPROBE_DATA";

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

// ---------------------------------------------------------------------------
// Attribution

fn brute_force(p: &dyn Predictor, text: &str) -> Vec<f64> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let reference = p.predict_batch(&[text.to_string()]).unwrap().remove(0);
    let probs = reference.probs();
    let mut target = 0;
    for (i, &v) in probs.iter().enumerate() {
        if v > probs[target] {
            target = i;
        }
    }
    (0..words.len())
        .map(|i| {
            let mut masked = words.clone();
            masked[i] = &p.handle().mask_token;
            let d = p.predict_batch(&[masked.join(" ")]).unwrap().remove(0);
            probs[target] - d.probs()[target]
        })
        .collect()
}

fn attribution_oracle() -> Outcome {
    let start = Instant::now();
    let mut corpus = topic_corpus(11, 150, 3).unwrap();
    for (i, s) in fuzz_sentences(99, 30).into_iter().enumerate() {
        corpus
            .documents
            .push(Document::new(format!("f{i}"), s, Some(i % 3)));
    }
    let texts = fuzz_sentences(2024, 200);
    let mut worst: f64 = 0.0;
    let mut positions = 0;
    for kind in [
        ModelKind::NaiveBayes,
        ModelKind::LinearTfidf,
        ModelKind::TinyAttention,
    ] {
        let mut spec = TrainSpec::new(kind);
        spec.attention.epochs = 5;
        let p = NativePredictor::new(
            kind.as_str(),
            corpus.labels.clone(),
            train(&corpus, &spec).unwrap(),
        );
        for (i, text) in texts.iter().enumerate() {
            let got = occlusion_importances(&p, &i.to_string(), text).unwrap();
            let expected = brute_force(&p, text);
            if got.importances.len() != expected.len() {
                return Fail(format!(
                    "{} text {i}: {} positions, oracle {}",
                    kind.as_str(),
                    got.importances.len(),
                    expected.len()
                ));
            }
            for (a, b) in got.importances.iter().zip(&expected) {
                worst = worst.max((a - b).abs());
                positions += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= ATTRIBUTION_TOL && elapsed < ATTRIBUTION_BUDGET,
        format!("3 models x 200 texts, {positions} positions, max |diff| {worst:.1e} (tol {ATTRIBUTION_TOL:.0e}), {:.1}s", elapsed.as_secs_f64()),
    )
}

fn constant_zero_law() -> Outcome {
    let labels = LabelSet::new(["a", "b", "c"]).unwrap();
    let p = ConstantPredictor::new("const", labels, vec![0.2, 0.5, 0.3]).unwrap();
    let mut positions = 0;
    for (i, text) in fuzz_sentences(77, 1000).iter().enumerate() {
        let r = occlusion_importances(&p, &i.to_string(), text).unwrap();
        if let Some(v) = r.importances.iter().find(|&&v| v != 0.0) {
            return Fail(format!("text {i} has importance {v}"));
        }
        positions += r.importances.len();
    }
    Pass(format!("1000 texts, {positions} positions, all exactly 0"))
}

// ---------------------------------------------------------------------------
// Corpora

fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ENV)
        .map(PathBuf::from)
        .filter(|p| !p.as_os_str().is_empty())
}

fn corpus_manifests() -> Outcome {
    let Some(root) = data_root() else {
        return Blocked(format!(
            "{DATA_ENV} unset; the five corpora are not available offline"
        ));
    };
    let mut missing = Vec::new();
    let mut problems = Vec::new();
    for kind in CorpusKind::ALL {
        let dir = root.join(kind.as_str());
        if !dir.exists() {
            missing.push(kind.as_str());
            continue;
        }
        match load_corpus(kind, &dir, AgreementTier::default()) {
            Ok(loaded) => {
                for p in check_manifest(&loaded.corpus, kind.manifest()) {
                    problems.push(p);
                }
            }
            Err(e) => problems.push(format!("{kind}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Fail(problems.join("; "));
    }
    if !missing.is_empty() {
        return Blocked(format!(
            "missing under {}: {}",
            root.display(),
            missing.join(", ")
        ));
    }
    Pass("all five corpora match their document counts, histograms and splits".into())
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maskprobe"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = cli()
        .args(args)
        .env_remove("MASKPROBE_ENDPOINT")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "`maskprobe {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn linear_baselines() -> Outcome {
    let Some(root) = data_root() else {
        return Blocked(format!("{DATA_ENV} unset; BBC News, BBC Sport, Phrasebank and SemEval are not available offline"));
    };
    // (corpus, lower bound, upper bound) on mean test accuracy in percent.
    let targets = [
        (CorpusKind::BbcNews, 95.0, 100.0),
        (CorpusKind::BbcSport, 95.0, 100.0),
        (CorpusKind::Phrasebank, 72.7 - 5.0, 72.7 + 5.0),
        (CorpusKind::Semeval, 48.1 - 8.0, 48.1 + 8.0),
    ];
    let missing: Vec<&str> = targets
        .iter()
        .map(|t| t.0.as_str())
        .filter(|name| !root.join(name).exists())
        .collect();
    if !missing.is_empty() {
        return Blocked(format!(
            "missing under {}: {}",
            root.display(),
            missing.join(", ")
        ));
    }
    let scratch = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (kind, lo, hi) in targets {
        let dir = root.join(kind.as_str());
        let out = scratch.path().join(kind.as_str());
        let args = [
            "eval",
            "--corpus",
            kind.as_str(),
            "--root",
            dir.to_str().unwrap(),
            "--model",
            "linear-tfidf",
            "--seeds",
            "0,1,2",
            "--out",
            out.to_str().unwrap(),
        ];
        if let Err(e) = run_cli(&args) {
            return Fail(e);
        }
        let metrics: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
        let acc = 100.0 * metrics["mean"]["accuracy"].as_f64().unwrap();
        let pass = (lo..=hi).contains(&acc);
        ok &= pass;
        lines.push(format!(
            "{kind} {acc:.2} in [{lo:.1}, {hi:.1}]{}",
            if pass { "" } else { " NO" }
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < BASELINE_BUDGET;
    check(
        ok,
        format!(
            "{}; {:.0}s of {}s budget",
            lines.join(", "),
            elapsed.as_secs_f64(),
            BASELINE_BUDGET.as_secs()
        ),
    )
}

fn semeval_markers() -> Outcome {
    let tagged = "The <e1>student</e1> <e2>association</e2> is the voice of the undergraduate student population of the State University of New York at Buffalo.";
    let expected = "The #student# $association$ is the voice of the undergraduate student population of the State University of New York at Buffalo.";
    match transform_entity_markers(tagged) {
        Ok((text, _)) => check(
            text.as_bytes() == expected.as_bytes() && text.contains("#student# $association$"),
            format!("produced {:?}", &text[..text.len().min(40)]),
        ),
        Err(e) => Fail(e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Per-class counts by definition; F1 as 2TP / (2TP + FP + FN).
fn hand_metrics(counts: &[Vec<u64>]) -> [f64; 4] {
    let k = counts.len();
    let total: u64 = counts.iter().flatten().sum();
    let mut sums = [0.0; 3];
    let mut diag = 0;
    for c in 0..k {
        let tp = counts[c][c];
        diag += tp;
        let fp: u64 = (0..k).filter(|&g| g != c).map(|g| counts[g][c]).sum();
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| counts[c][p]).sum();
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        sums[0] += ratio(tp, tp + fp);
        sums[1] += ratio(tp, tp + fn_);
        sums[2] += ratio(2 * tp, 2 * tp + fp + fn_);
    }
    [
        diag as f64 / total as f64,
        sums[0] / k as f64,
        sums[1] / k as f64,
        sums[2] / k as f64,
    ]
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(1..=300);
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let predicted: Vec<usize> = gold
            .iter()
            .map(|&g| {
                if rng.random_bool(0.6) {
                    g
                } else {
                    rng.random_range(0..k)
                }
            })
            .collect();
        let cm = confusion_matrix(&gold, &predicted, k).unwrap();
        let r = macro_metrics(&cm);
        let h = hand_metrics(&cm.counts);
        for (a, b) in [r.accuracy, r.precision, r.recall, r.f1].iter().zip(h) {
            worst = worst.max((a - b).abs());
        }
    }
    let perfect = macro_metrics(&ConfusionMatrix {
        counts: vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]],
    });
    let all_one = [
        perfect.accuracy,
        perfect.precision,
        perfect.recall,
        perfect.f1,
    ] == [1.0; 4];
    check(
        worst <= METRICS_TOL && all_one,
        format!("10 random matrices, max |diff| {worst:.1e} (tol {METRICS_TOL:.0e}); perfect case all 1.0: {all_one}"),
    )
}

// ---------------------------------------------------------------------------
// Tiny attention

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let vocab = Vocabulary::from_texts(["alpha beta gamma delta epsilon zeta"], 1);
        let config = AttentionConfig {
            seed,
            ..Default::default()
        };
        let model = TinyAttentionModel::new(vocab, 3, &config).unwrap();
        let ids = [1, 3, 0, 3, 5, 2];
        let label = (seed % 3) as usize;
        let (_, grad) = model.loss_and_gradient(&ids, label);
        for t in 0..6 {
            for j in 0..grad.tensors()[t].len() {
                let mut plus = model.clone();
                plus.params.tensors_mut()[t][j] += GRADIENT_H;
                let mut minus = model.clone();
                minus.params.tensors_mut()[t][j] -= GRADIENT_H;
                let numeric = (plus.loss_and_gradient(&ids, label).0
                    - minus.loss_and_gradient(&ids, label).0)
                    / (2.0 * GRADIENT_H);
                let analytic = grad.tensors()[t][j];
                worst = worst
                    .max((analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6));
            }
        }
    }
    check(
        worst < GRADIENT_MAX_REL,
        format!("5 seeds, every parameter, worst relative error {worst:.1e} (limit {GRADIENT_MAX_REL:.0e})"),
    )
}

// ---------------------------------------------------------------------------
// Forest

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

/// Every (feature, midpoint) pair with its weighted Gini impurity.
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
            out.push((
                f,
                t,
                (left.len() as f64 * gini(&left) + right.len() as f64 * gini(&right)) / n,
            ));
        }
    }
    out
}

fn forest_oracle() -> Outcome {
    for seed in 0..50 {
        let inst = random_instance(seed);
        let idx: Vec<usize> = (0..inst.x.len()).collect();
        let features: Vec<usize> = (0..inst.x[0].len()).collect();
        let chosen = best_split(
            &inst.x,
            &inst.y,
            &vec![1; inst.x.len()],
            &idx,
            &features,
            inst.n_classes,
            1,
        );
        let candidates = exhaustive(&inst);
        match chosen {
            None if candidates.is_empty() => {}
            None => {
                return Fail(format!(
                    "instance {seed}: no split chosen, {} exist",
                    candidates.len()
                ))
            }
            Some(c) => {
                let min = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                let first = candidates
                    .iter()
                    .find(|c| c.2 - min <= SPLIT_TIE_TOL)
                    .unwrap();
                if (c.feature, c.threshold) != (first.0, first.1) {
                    return Fail(format!(
                        "instance {seed}: chose ({}, {}), exhaustive ({}, {})",
                        c.feature, c.threshold, first.0, first.1
                    ));
                }
            }
        }
    }
    let one_tree = ForestConfig {
        n_trees: 1,
        bootstrap: false,
        features_per_split: FeaturesPerSplit::All,
        ..Default::default()
    };
    let mut rows = 0;
    for seed in 100..120 {
        let inst = random_instance(seed);
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for (row, &label) in inst.x.iter().zip(&inst.y) {
            if !x.contains(row) {
                x.push(row.clone());
                y.push(label);
            }
        }
        let labels = LabelSet::new((0..inst.n_classes).map(|i| i.to_string())).unwrap();
        let forest = train_forest(&x, &y, &labels, &one_tree).unwrap().forest;
        let predicted = predict_forest(&forest, &x).unwrap();
        if let Some(i) = predicted
            .iter()
            .zip(&y)
            .position(|(p, &l)| p.argmax.index != l)
        {
            return Fail(format!("1-tree training error on instance {seed}, row {i}"));
        }
        rows += x.len();
    }
    Pass(format!(
        "50/50 splits equal exhaustive search; 1-tree accuracy 100% on 20 instances ({rows} rows)"
    ))
}

// ---------------------------------------------------------------------------
// Stacking

fn stack_gain(neutralize: bool, seed: u64) -> f64 {
    let corpus = noisy_rater_corpus(&NoisyRaterConfig {
        neutralize,
        seed,
        ..Default::default()
    })
    .unwrap();
    let model = train(&corpus, &TrainSpec::new(ModelKind::NaiveBayes)).unwrap();
    let predictor = NativePredictor::new("nb", corpus.labels.clone(), model);
    let mut config = StackingConfig::default();
    config.forest.min_samples_leaf = STACK_MIN_LEAF;
    stacked_pipeline(&predictor, &corpus, &config)
        .unwrap()
        .gain_points()
}

fn stacked_injection() -> Outcome {
    let gains: Vec<f64> = (0..3).map(|s| stack_gain(false, s)).collect();
    let gaps: Vec<f64> = (0..3).map(|s| stack_gain(true, s)).collect();
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|g| format!("{g:+.2}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    check(
        gains.iter().all(|&g| g >= STACK_MIN_GAIN) && gaps.iter().all(|g| g.abs() <= STACK_MAX_NEUTRAL_GAP),
        format!(
            "seeds 0-2, min leaf {STACK_MIN_LEAF}: gain {} pts (need >= {STACK_MIN_GAIN}), neutralized {} pts (need |gap| <= {STACK_MAX_NEUTRAL_GAP})",
            fmt(&gains),
            fmt(&gaps)
        ),
    )
}

// ---------------------------------------------------------------------------
// CLI determinism

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    let topics = p("topics/corpus");
    let reviews = p("reviews/corpus");
    let nb = p("nb/nb.model");
    let att = p("att/att.model");
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "topics",
            vec!["synth", "topics", "--docs", "250", "--seed", "3"]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        (
            "reviews",
            vec!["synth", "noisy-raters", "--docs", "1200", "--seed", "3"]
                .into_iter()
                .map(String::from)
                .collect(),
        ),
        (
            "nb",
            vec![
                "train",
                "--corpus",
                "bbc-news",
                "--root",
                &topics,
                "--model",
                "naive-bayes",
                "--name",
                "nb",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "att",
            vec![
                "train",
                "--corpus",
                "bbc-news",
                "--root",
                &topics,
                "--model",
                "tiny-attention",
                "--epochs",
                "4",
                "--seed",
                "5",
                "--name",
                "att",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "eval",
            vec![
                "eval",
                "--corpus",
                "bbc-news",
                "--root",
                &topics,
                "--model",
                "linear-tfidf",
                "--seeds",
                "0,1,2",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "explain-text",
            vec![
                "explain",
                "--model",
                &nb,
                "--text",
                "topic1w2 said the topic3w1 year",
                "--k",
                "2",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "explain-split",
            vec![
                "explain", "--model", &att, "--corpus", "bbc-news", "--root", &topics, "--split",
                "test", "--limit", "25",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "compare",
            vec![
                "compare",
                "--model",
                &nb,
                "--model",
                &att,
                "--text",
                "topic0w1 topic2w5 people said",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "stack",
            vec![
                "stack",
                "--corpus",
                "yelp",
                "--root",
                &reviews,
                "--trees",
                "20",
                "--min-leaf",
                "10",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
    ];
    for (name, args) in &runs {
        let out = p(name);
        let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
        full.extend(["--out", &out]);
        if let Err(e) = run_cli(&full) {
            return Fail(e);
        }
    }
    for (name, _) in &runs {
        let manifest = p(&format!("{name}/manifest.json"));
        let replay = p(&format!("replay/{name}"));
        if let Err(e) = run_cli(&["rerun", "--manifest", &manifest, "--out", &replay]) {
            return Fail(e);
        }
        let original = files_under(&tmp.path().join(name));
        let again = files_under(Path::new(&replay));
        if original != again {
            let names = |v: &[(String, Vec<u8>)]| v.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
            let differing: Vec<String> = original
                .iter()
                .filter(|f| !again.contains(f))
                .map(|f| f.0.clone())
                .collect();
            return Fail(format!(
                "`{name}` replay differs: {:?} (files {:?} vs {:?})",
                differing,
                names(&original),
                names(&again)
            ));
        }
    }
    Pass(format!(
        "{} runs (synth, train x2, eval, explain x2, compare, stack) replayed from manifests byte-identically, manifests included",
        runs.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "attribution oracle equivalence (NB, linear, attention)",
            attribution_oracle,
        ),
        ("constant-predictor zero law", constant_zero_law),
        ("linear TF-IDF baselines on four corpora", linear_baselines),
        ("corpus manifests", corpus_manifests),
        ("entity-marker transform example", semeval_markers),
        ("metrics oracle", metrics_oracle),
        ("tiny-attention gradient check", gradient_check),
        ("forest oracle", forest_oracle),
        ("stacked attribute injection", stacked_injection),
        ("CLI replay determinism", determinism),
    ];
    let mut failed = 0;
    let mut blocked = 0;
    println!("acceptance criteria");
    for (title, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Blocked(d) => {
                blocked += 1;
                ("BLOCKED", d)
            }
        };
        println!("{tag:<7} {title}: {detail} [{secs:.1}s]");
    }
    println!(
        "{} passed, {failed} failed, {blocked} blocked (blocked criteria are not passes)",
        criteria.len() - failed - blocked
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
