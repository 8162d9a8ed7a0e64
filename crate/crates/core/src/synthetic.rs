//! Seeded generators for fixtures: fuzz sentences, a keyword topic corpus,
//! and a review corpus whose raters carry a per-user rating bias.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::evaluation::{split_corpus, SplitRatios};
use crate::types::{Corpus, Document, LabelSet, ATTR_PRODUCT_ID, ATTR_USER_ID};

const FUZZ_WORDS: &[&str] = &[
    "the",
    "a",
    "profit",
    "rose",
    "fell",
    "to",
    "EUR",
    "5.5",
    "mn",
    "%",
    "loss",
    "net",
    "sales",
    "good",
    "bad",
    "not",
    "very",
    "UPM-Kymmene",
    "Oyj",
    "(",
    ")",
    ",",
    ".",
    "naïve",
    "café",
    "日本",
    "über",
    "🙂",
    "x",
    "it's",
    "won't",
    "Q3",
    "2009",
    "--",
    "[MASK]",
    "<mask>",
    "#student#",
    "$association$",
    "refund",
    "great",
    "tacos",
    "slow",
    "service",
];

const SEPARATORS: &[&str] = &[" ", " ", " ", "  ", "\t", "\n", " \u{a0}"];

/// `n` non-empty sentences of 1 to 20 words with mixed whitespace, unicode,
/// punctuation and mask-like tokens.
pub fn fuzz_sentences(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=20);
            let mut s = String::new();
            if rng.random_bool(0.2) {
                s.push_str(SEPARATORS.choose(&mut rng).unwrap());
            }
            for i in 0..len {
                if i > 0 {
                    s.push_str(SEPARATORS.choose(&mut rng).unwrap());
                }
                s.push_str(FUZZ_WORDS.choose(&mut rng).unwrap());
            }
            if rng.random_bool(0.2) {
                s.push_str(SEPARATORS.choose(&mut rng).unwrap());
            }
            s
        })
        .collect()
}

/// Fuzz text drawn from a small alphabet, including empty and
/// whitespace-only strings.
pub fn fuzz_texts(seed: u64, n: usize) -> Vec<String> {
    let alphabet: Vec<char> = "ab é日 \t\n.,!🙂".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..40);
            (0..len)
                .map(|_| *alphabet.choose(&mut rng).unwrap())
                .collect()
        })
        .collect()
}

fn topic_words(class: usize) -> Vec<String> {
    (0..8).map(|w| format!("topic{class}w{w}")).collect()
}

const FILLER: &[&str] = &[
    "the", "and", "of", "to", "in", "on", "with", "for", "said", "was", "this", "that", "from",
    "year", "new", "people", "time", "after", "also", "more",
];

/// Documents of 6 to 14 words: roughly 40% class keywords, a few keywords
/// from other classes, the rest shared filler. Unsplit.
pub fn topic_corpus(seed: u64, n_docs: usize, n_classes: usize) -> Result<Corpus> {
    let labels = LabelSet::new((0..n_classes).map(|c| format!("class{c}")))?;
    let vocab: Vec<Vec<String>> = (0..n_classes).map(topic_words).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n_docs)
        .map(|i| {
            let class = i % n_classes;
            let len = rng.random_range(6..=14);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u < 0.4 {
                        vocab[class].choose(&mut rng).unwrap().as_str()
                    } else if u < 0.5 {
                        let other = rng.random_range(0..n_classes);
                        vocab[other].choose(&mut rng).unwrap().as_str()
                    } else {
                        FILLER.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            Document::new(format!("doc{i:05}"), words.join(" "), Some(class))
        })
        .collect();
    Ok(Corpus::new("topics", labels, docs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyRaterConfig {
    pub n_docs: usize,
    pub n_users: usize,
    pub n_products: usize,
    pub seed: u64,
    /// Replace every user and product id with one shared value.
    pub neutralize: bool,
}

impl Default for NoisyRaterConfig {
    fn default() -> Self {
        Self {
            n_docs: 4000,
            n_users: 40,
            n_products: 30,
            seed: 0,
            neutralize: false,
        }
    }
}

/// Rating shift applied by user `u`: half the users are unbiased, a quarter
/// rate one star higher and a quarter one star lower.
pub fn user_bias(u: usize) -> i64 {
    [0, 0, 1, -1][u % 4]
}

/// Five-star reviews where the text reveals a latent sentiment `s` and the
/// rating is `clamp(s + user_bias, 1, 5)`. The bias is visible only through
/// the user id. Split 64/16/20 stratified with the same seed.
pub fn noisy_rater_corpus(config: &NoisyRaterConfig) -> Result<Corpus> {
    let labels = LabelSet::new(["1", "2", "3", "4", "5"])?;
    let vocab: Vec<Vec<String>> = (1..=5)
        .map(|s| (0..6).map(|w| format!("tone{s}w{w}")).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let docs: Vec<Document> = (0..config.n_docs)
        .map(|i| {
            let user = rng.random_range(0..config.n_users);
            let product = rng.random_range(0..config.n_products);
            let s = rng.random_range(1..=5i64);
            let len = rng.random_range(6..=10);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.75) {
                        vocab[(s - 1) as usize].choose(&mut rng).unwrap().as_str()
                    } else {
                        FILLER.choose(&mut rng).unwrap()
                    }
                })
                .collect();
            let rating = (s + user_bias(user)).clamp(1, 5);
            let (uid, pid) = if config.neutralize {
                ("user".to_string(), "product".to_string())
            } else {
                (format!("user{user}"), format!("product{product}"))
            };
            Document::new(
                format!("review{i:05}"),
                words.join(" "),
                Some((rating - 1) as usize),
            )
            .with_attribute(ATTR_USER_ID, uid)
            .with_attribute(ATTR_PRODUCT_ID, pid)
        })
        .collect();
    let corpus = Corpus::new("noisy-raters", labels, docs);
    let splits = split_corpus(&corpus, SplitRatios::DEFAULT, config.seed)?;
    corpus.with_splits(splits)
}
