//! Readers for the benchmark corpora in their distributed layouts.

mod bbc;
mod phrasebank;
mod semeval;
mod yelp;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bbc::load_bbc;
pub use phrasebank::{load_phrasebank, AgreementTier, PHRASEBANK_LABELS};
pub use semeval::{
    load_semeval, semeval_labels, transform_entity_markers, EntitySpan, SEMEVAL_RELATIONS,
};
pub use yelp::{load_yelp, YELP_LABELS};

use crate::error::{Error, Result};
use crate::types::{Corpus, Split};

/// A record that was not loaded, with where and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub skipped: Vec<SkippedRecord>,
    pub warnings: Vec<String>,
    /// Files that were not valid UTF-8 and were decoded as Latin-1.
    pub latin1_files: Vec<PathBuf>,
}

impl LoadReport {
    pub(crate) fn skip(&mut self, location: impl Into<String>, reason: impl Into<String>) {
        self.skipped.push(SkippedRecord {
            location: location.into(),
            reason: reason.into(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub report: LoadReport,
}

/// Reads a text file as UTF-8, falling back to Latin-1, with `\r\n` and
/// lone `\r` normalised to `\n`.
pub fn read_text(path: &Path, report: &mut LoadReport) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => {
            report.latin1_files.push(path.to_path_buf());
            e.into_bytes().iter().map(|&b| b as char).collect()
        }
    };
    Ok(normalize_line_endings(&text))
}

fn normalize_line_endings(text: &str) -> String {
    if text.contains('\r') {
        text.replace("\r\n", "\n").replace('\r', "\n")
    } else {
        text.to_string()
    }
}

/// Expected size and class histogram of a pristine corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusManifest {
    pub name: &'static str,
    pub documents: usize,
    pub histogram: &'static [(&'static str, usize)],
    /// Per-split document counts for corpora with fixed splits.
    pub splits: &'static [(Split, usize)],
    pub n_labels: usize,
}

pub const BBC_NEWS_MANIFEST: CorpusManifest = CorpusManifest {
    name: "bbc-news",
    documents: 2225,
    histogram: &[
        ("business", 510),
        ("entertainment", 386),
        ("politics", 417),
        ("sport", 511),
        ("tech", 401),
    ],
    splits: &[],
    n_labels: 5,
};

pub const BBC_SPORT_MANIFEST: CorpusManifest = CorpusManifest {
    name: "bbc-sport",
    documents: 737,
    histogram: &[
        ("athletics", 101),
        ("cricket", 124),
        ("football", 265),
        ("rugby", 147),
        ("tennis", 100),
    ],
    splits: &[],
    n_labels: 5,
};

pub const PHRASEBANK_MANIFEST: CorpusManifest = CorpusManifest {
    name: "phrasebank",
    documents: 4845,
    histogram: &[],
    splits: &[],
    n_labels: 3,
};

pub const YELP_MANIFEST: CorpusManifest = CorpusManifest {
    name: "yelp",
    documents: 62522 + 7773 + 8671,
    histogram: &[],
    splits: &[
        (Split::Train, 62522),
        (Split::Val, 7773),
        (Split::Test, 8671),
    ],
    n_labels: 5,
};

pub const SEMEVAL_MANIFEST: CorpusManifest = CorpusManifest {
    name: "semeval",
    documents: 8000 + 2717,
    histogram: &[],
    splits: &[(Split::Train, 8000), (Split::Test, 2717)],
    n_labels: 19,
};

/// Every difference between `corpus` and `manifest`; empty when they agree.
pub fn check_manifest(corpus: &Corpus, manifest: &CorpusManifest) -> Vec<String> {
    let mut problems = Vec::new();
    if corpus.documents.len() != manifest.documents {
        problems.push(format!(
            "{}: {} documents, expected {}",
            manifest.name,
            corpus.documents.len(),
            manifest.documents
        ));
    }
    if corpus.labels.len() != manifest.n_labels {
        problems.push(format!(
            "{}: {} labels, expected {}",
            manifest.name,
            corpus.labels.len(),
            manifest.n_labels
        ));
    }
    let histogram = corpus.label_histogram();
    for &(label, expected) in manifest.histogram {
        let actual = histogram.get(label).copied().unwrap_or(0);
        if actual != expected {
            problems.push(format!(
                "{}: class `{label}` has {actual}, expected {expected}",
                manifest.name
            ));
        }
    }
    for &(split, expected) in manifest.splits {
        let actual = corpus.documents_in(split).count();
        if corpus.splits.is_none() || actual != expected {
            problems.push(format!(
                "{}: {split} split has {actual}, expected {expected}",
                manifest.name
            ));
        }
    }
    problems
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    BbcNews,
    BbcSport,
    Phrasebank,
    Yelp,
    Semeval,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 5] = [
        CorpusKind::BbcNews,
        CorpusKind::BbcSport,
        CorpusKind::Phrasebank,
        CorpusKind::Yelp,
        CorpusKind::Semeval,
    ];

    pub fn as_str(self) -> &'static str {
        self.manifest().name
    }

    pub fn manifest(self) -> &'static CorpusManifest {
        match self {
            CorpusKind::BbcNews => &BBC_NEWS_MANIFEST,
            CorpusKind::BbcSport => &BBC_SPORT_MANIFEST,
            CorpusKind::Phrasebank => &PHRASEBANK_MANIFEST,
            CorpusKind::Yelp => &YELP_MANIFEST,
            CorpusKind::Semeval => &SEMEVAL_MANIFEST,
        }
    }
}

impl std::fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorpusKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = CorpusKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::invalid(format!(
                    "unknown corpus `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// All regular files under `root`, sorted by path.
fn files_under(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.is_file() {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// The single file under `root` whose lowercase name satisfies `pred`.
fn find_file(root: &Path, what: &str, pred: impl Fn(&str) -> bool) -> Result<PathBuf> {
    let matches: Vec<PathBuf> = files_under(root)?
        .into_iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| pred(&n.to_lowercase()))
        })
        .collect();
    match matches.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Error::invalid(format!(
            "no {what} file under {}",
            root.display()
        ))),
        many => Err(Error::invalid(format!(
            "{} candidate {what} files under {}: {}",
            many.len(),
            root.display(),
            many.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

/// Loads a corpus by name from its distributed layout under `root`.
///
/// * `bbc-news`, `bbc-sport`: one directory per class.
/// * `phrasebank`: a `Sentences_*.txt` file, or the directory holding them.
/// * `yelp`: a directory with exactly one file each containing `train`,
///   `dev` (or `val`) and `test` in its name.
/// * `semeval`: a directory containing `TRAIN_FILE.TXT` and
///   `TEST_FILE_FULL.TXT` at any depth.
pub fn load_corpus(kind: CorpusKind, root: &Path, tier: AgreementTier) -> Result<LoadedCorpus> {
    match kind {
        CorpusKind::BbcNews | CorpusKind::BbcSport => load_bbc(root, kind.as_str()),
        CorpusKind::Phrasebank => load_phrasebank(root, tier),
        CorpusKind::Yelp => {
            let train = find_file(root, "train", |n| n.contains("train"))?;
            let val = find_file(root, "dev/val", |n| n.contains("dev") || n.contains("val"))?;
            let test = find_file(root, "test", |n| n.contains("test"))?;
            load_yelp(&train, &val, &test)
        }
        CorpusKind::Semeval => {
            let train = find_file(root, "SemEval train", |n| n == "train_file.txt")?;
            let test = find_file(root, "SemEval test", |n| n == "test_file_full.txt")?;
            load_semeval(&train, &test)
        }
    }
}
