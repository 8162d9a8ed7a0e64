use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, Split};

/// Bag-of-words terms of `text`: whitespace words, lowercased, with leading
/// and trailing punctuation stripped. Occurrences of `mask_token` are removed.
pub fn terms(text: &str, mask_token: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| *w != mask_token)
        .filter_map(|w| {
            let trimmed = w.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
        })
        .collect()
}

/// Term to index map plus per-term document frequency over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms: r.terms,
            doc_freq: r.doc_freq,
            n_docs: r.n_docs,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            terms: v.terms,
            doc_freq: v.doc_freq,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    /// Terms with document frequency `>= min_df`, indexed in lexicographic order.
    pub fn from_texts<'a, I>(texts: I, min_df: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let mut n_docs = 0;
        for text in texts {
            n_docs += 1;
            let unique: HashSet<String> = terms(text, "").into_iter().collect();
            for term in unique {
                *df.entry(term).or_default() += 1;
            }
        }
        let (terms, doc_freq): (Vec<_>, Vec<_>) =
            df.into_iter().filter(|(_, n)| *n >= min_df.max(1)).unzip();
        VocabularyRepr {
            terms,
            doc_freq,
            n_docs,
        }
        .into()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn doc_freq_of(&self, term: &str) -> Option<usize> {
        self.get(term).map(|i| self.doc_freq[i])
    }

    /// Sparse term counts of a text, indices ascending; out-of-vocabulary dropped.
    pub fn counts(&self, text: &str, mask_token: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for term in terms(text, mask_token) {
            if let Some(i) = self.get(&term) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        counts.into_iter().collect()
    }

    /// `ln((1 + N) / (1 + df)) + 1`
    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[index] as f64)).ln() + 1.0
    }

    pub fn tfidf(&self, text: &str, mask_token: &str) -> TfidfVector {
        let mut entries: Vec<(usize, f64)> = self
            .counts(text, mask_token)
            .into_iter()
            .map(|(i, c)| (i, c * self.idf(i)))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        TfidfVector(entries)
    }

    /// Same vocabulary with term `i` moved to index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut terms = vec![String::new(); self.len()];
        let mut doc_freq = vec![0; self.len()];
        for (old, &new) in perm.iter().enumerate() {
            terms[new] = self.terms[old].clone();
            doc_freq[new] = self.doc_freq[old];
        }
        VocabularyRepr {
            terms,
            doc_freq,
            n_docs: self.n_docs,
        }
        .into()
    }
}

/// Builds the vocabulary from the training split only.
pub fn build_vocabulary(corpus: &Corpus, min_df: usize) -> Result<Vocabulary> {
    let mut train = corpus.documents_in(Split::Train).peekable();
    if train.peek().is_none() {
        return Err(Error::invalid("training split is empty"));
    }
    Ok(Vocabulary::from_texts(
        train.map(|d| d.text.as_str()),
        min_df,
    ))
}

/// Sparse L2-normalised TF-IDF weights, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfidfVector(pub Vec<(usize, f64)>);

impl TfidfVector {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|&(i, w)| w * dense[i]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
}
