//! Stratified splits, confusion matrices, macro-averaged metrics and
//! multi-run aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, Split, SplitAssignment};

/// Seeds standing in for three training iterations; the split stays fixed.
pub const RUN_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    /// 20% test, the remaining 80% split 80/20 into train and validation.
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.64,
        val: 0.16,
        test: 0.20,
    };

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::invalid(format!(
                "split ratios out of range: {self:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split ratios must sum to 1: {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::DEFAULT
    }
}

fn floor_count(n: usize, ratio: f64) -> usize {
    (n as f64 * ratio + 1e-9).floor() as usize
}

/// Hamilton (largest remainder) apportionment of `total` over `sizes`
/// proportionally; ties go to the lower stratum index.
fn apportion(sizes: &[usize], ratio: f64, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * ratio).collect();
    let mut alloc: Vec<usize> = exact
        .iter()
        .zip(sizes)
        .map(|(e, &n)| ((e + 1e-9).floor() as usize).min(n))
        .collect();
    let mut rest = total.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - alloc[a] as f64;
        let rb = exact[b] - alloc[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while rest > 0 {
        let before = rest;
        for &s in &order {
            if rest == 0 {
                break;
            }
            if alloc[s] < sizes[s] {
                alloc[s] += 1;
                rest -= 1;
            }
        }
        if rest == before {
            break;
        }
    }
    alloc
}

/// Stratified train/val/test assignment. Global test and validation counts
/// are `floor(N * ratio)`; the remainder goes to train. Classes with fewer
/// documents than there are splits stay entirely in train.
pub fn split_corpus(corpus: &Corpus, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    if corpus.documents.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    // Stratum per gold label; unlabeled documents form their own stratum.
    let mut strata: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, doc) in corpus.documents.iter().enumerate() {
        strata.entry(doc.gold).or_default().push(i);
    }
    let mut tags = vec![Split::Train; corpus.documents.len()];
    let mut warnings = Vec::new();
    let mut eligible: Vec<Vec<usize>> = Vec::new();
    for (gold, members) in strata {
        if members.len() < Split::ALL.len() {
            let name = gold
                .and_then(|g| corpus.labels.get(g))
                .map_or("<unlabeled>".to_string(), |l| l.name.clone());
            warnings.push(format!(
                "class `{name}` has {} document(s), fewer than 3 splits; kept in train",
                members.len()
            ));
            continue;
        }
        eligible.push(members);
    }

    let sizes: Vec<usize> = eligible.iter().map(Vec::len).collect();
    let n: usize = sizes.iter().sum();
    let test_alloc = apportion(&sizes, ratios.test, floor_count(n, ratios.test));
    let remaining: Vec<usize> = sizes.iter().zip(&test_alloc).map(|(s, t)| s - t).collect();
    // Validation quotas are still proportional to the full stratum sizes.
    let val_alloc = {
        let target = floor_count(n, ratios.val);
        let mut alloc = apportion(&sizes, ratios.val, target);
        for (a, r) in alloc.iter_mut().zip(&remaining) {
            *a = (*a).min(*r);
        }
        alloc
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (s, members) in eligible.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (j, &doc) in shuffled.iter().enumerate() {
            tags[doc] = if j < test_alloc[s] {
                Split::Test
            } else if j < test_alloc[s] + val_alloc[s] {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    Ok(SplitAssignment {
        tags,
        seed: Some(seed),
        warnings,
    })
}

/// `counts[gold][predicted]`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(
    gold: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if gold.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::invalid("confusion matrix over zero documents"));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!(
                "label index ({g}, {p}) outside {n_classes} classes"
            )));
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of runs averaged into this report.
    pub runs: usize,
}

/// Macro averages over every class of the matrix. A zero denominator yields
/// 0 for that class's precision or recall, and the class still counts.
pub fn macro_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.n_classes();
    let total = cm.total();
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for c in 0..k {
        let tp = cm.counts[c][c] as f64;
        let predicted: u64 = (0..k).map(|g| cm.counts[g][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        let precision = if predicted == 0 {
            0.0
        } else {
            tp / predicted as f64
        };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let kf = k.max(1) as f64;
    MetricsReport {
        accuracy: if total == 0 {
            0.0
        } else {
            cm.trace() as f64 / total as f64
        },
        precision: p_sum / kf,
        recall: r_sum / kf,
        f1: f_sum / kf,
        runs: 1,
    }
}

/// Arithmetic mean per metric; `runs` is the number of reports averaged.
pub fn aggregate_runs(reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to aggregate"));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        accuracy: mean(|r| r.accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        runs: reports.len(),
    })
}

/// Plain-text table in Accuracy / Precision / Recall / F1-Score column
/// order, values in percent.
pub fn format_metrics_table(rows: &[(&str, MetricsReport)], decimals: usize) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>9}  {:>9}  {:>9}  {:>9}",
        "Model", "Accuracy", "Precision", "Recall", "F1-Score"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>9.d$}  {:>9.d$}  {:>9.d$}  {:>9.d$}",
            name,
            r.accuracy * 100.0,
            r.precision * 100.0,
            r.recall * 100.0,
            r.f1 * 100.0,
            d = decimals
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Document, LabelSet};
    use proptest::prelude::*;

    fn corpus_with_histogram(hist: &[usize]) -> Corpus {
        let labels = LabelSet::new((0..hist.len()).map(|i| format!("c{i}"))).unwrap();
        let mut docs = Vec::new();
        for (c, &n) in hist.iter().enumerate() {
            for j in 0..n {
                docs.push(Document::new(
                    format!("{c}-{j}"),
                    format!("doc {j}"),
                    Some(c),
                ));
            }
        }
        Corpus::new("h", labels, docs)
    }

    #[test]
    fn split_counts_match_percentages() {
        // 2225 * 0.2 = 445 test; 1780 left, 20% of it = 356 val; 1424 train.
        let corpus = corpus_with_histogram(&[510, 386, 417, 511, 401]);
        let s = split_corpus(&corpus, SplitRatios::DEFAULT, 0).unwrap();
        assert_eq!(s.count(Split::Test), 445);
        assert_eq!(s.count(Split::Val), 356);
        assert_eq!(s.count(Split::Train), 1424);
    }

    #[test]
    fn split_is_stratified_and_reproducible() {
        let hist = [510, 386, 417, 511, 401];
        let corpus = corpus_with_histogram(&hist);
        let a = split_corpus(&corpus, SplitRatios::DEFAULT, 7).unwrap();
        let b = split_corpus(&corpus, SplitRatios::DEFAULT, 7).unwrap();
        assert_eq!(a, b);
        let c = split_corpus(&corpus, SplitRatios::DEFAULT, 8).unwrap();
        assert_ne!(a.tags, c.tags);
        for (class, &n) in hist.iter().enumerate() {
            let test = corpus
                .documents
                .iter()
                .zip(&a.tags)
                .filter(|(d, t)| d.gold == Some(class) && **t == Split::Test)
                .count();
            assert!(
                (test as f64 - n as f64 * 0.2).abs() <= 1.0,
                "class {class}: {test}"
            );
        }
    }

    #[test]
    fn tiny_class_stays_in_train_with_warning() {
        let corpus = corpus_with_histogram(&[50, 2]);
        let s = split_corpus(&corpus, SplitRatios::DEFAULT, 0).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(corpus
            .documents
            .iter()
            .zip(&s.tags)
            .filter(|(d, _)| d.gold == Some(1))
            .all(|(_, t)| *t == Split::Train));
    }

    #[test]
    fn bad_ratios_rejected() {
        let corpus = corpus_with_histogram(&[5, 5]);
        let r = SplitRatios {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        assert!(split_corpus(&corpus, r, 0).is_err());
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion_matrix(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![1, 1]]);
        assert!(confusion_matrix(&[], &[], 2).is_err());
        assert!(confusion_matrix(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn metric_examples() {
        let perfect = confusion_matrix(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        let r = macro_metrics(&perfect);
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let ones = ConfusionMatrix {
            counts: vec![vec![1, 1], vec![1, 1]],
        };
        let r = macro_metrics(&ones);
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1),
            (0.5, 0.5, 0.5, 0.5)
        );
    }

    #[test]
    fn never_predicted_class_counts_as_zero() {
        // class 2 never predicted and never present: P = R = F1 = 0 for it.
        let cm = confusion_matrix(&[0, 1], &[0, 1], 3).unwrap();
        let r = macro_metrics(&cm);
        assert_eq!(r.accuracy, 1.0);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        let mk = |a| MetricsReport {
            accuracy: a,
            precision: a,
            recall: a,
            f1: a,
            runs: 1,
        };
        let r = aggregate_runs(&[mk(0.6), mk(0.7), mk(0.8)]).unwrap();
        assert!((r.accuracy - 0.7).abs() < 1e-15);
        assert_eq!(r.runs, 3);
        let same = aggregate_runs(&[mk(0.5); 3]).unwrap();
        assert_eq!(same.f1, 0.5);
        assert_eq!(aggregate_runs(&[mk(0.9)]).unwrap(), mk(0.9));
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn table_layout() {
        let r = MetricsReport {
            accuracy: 0.727,
            precision: 0.671,
            recall: 0.675,
            f1: 0.672,
            runs: 3,
        };
        let t = format_metrics_table(&[("SVC", r)], 1);
        assert!(t
            .lines()
            .next()
            .unwrap()
            .contains("Accuracy  Precision     Recall   F1-Score"));
        assert!(
            t.contains("72.7") && t.contains("67.1") && t.contains("67.5") && t.contains("67.2")
        );
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_label_permutation(
            cells in prop::collection::vec(0u64..20, 16),
            shift in 1usize..4,
        ) {
            let k = 4;
            let counts: Vec<Vec<u64>> = cells.chunks(k).map(|r| r.to_vec()).collect();
            let cm = ConfusionMatrix { counts: counts.clone() };
            prop_assume!(cm.total() > 0);
            let perm = |i: usize| (i + shift) % k;
            let mut permuted = vec![vec![0; k]; k];
            for g in 0..k {
                for p in 0..k {
                    permuted[perm(g)][perm(p)] = counts[g][p];
                }
            }
            let a = macro_metrics(&cm);
            let b = macro_metrics(&ConfusionMatrix { counts: permuted });
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        }

        #[test]
        fn accuracy_equals_direct_match_fraction(
            pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200),
        ) {
            let (gold, pred): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let cm = confusion_matrix(&gold, &pred, 5).unwrap();
            let direct = pairs.iter().filter(|(g, p)| g == p).count() as f64 / pairs.len() as f64;
            prop_assert!((macro_metrics(&cm).accuracy - direct).abs() < 1e-15);
        }
    }
}
