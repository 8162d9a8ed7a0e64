use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, LoadReport, LoadedCorpus};
use crate::error::{Error, Result};
use crate::types::{Corpus, Document, LabelSet};

pub const PHRASEBANK_LABELS: [&str; 3] = ["positive", "negative", "neutral"];

/// Annotator-agreement subsets shipped with the corpus. Each file contains
/// every sentence with at least that level of agreement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementTier {
    All,
    P75,
    P66,
    #[default]
    P50,
}

impl AgreementTier {
    pub fn file_name(self) -> &'static str {
        match self {
            AgreementTier::All => "Sentences_AllAgree.txt",
            AgreementTier::P75 => "Sentences_75Agree.txt",
            AgreementTier::P66 => "Sentences_66Agree.txt",
            AgreementTier::P50 => "Sentences_50Agree.txt",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgreementTier::All => "all",
            AgreementTier::P75 => "75",
            AgreementTier::P66 => "66",
            AgreementTier::P50 => "50",
        }
    }
}

impl std::str::FromStr for AgreementTier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_end_matches("agree") {
            "all" | "100" => Ok(AgreementTier::All),
            "75" => Ok(AgreementTier::P75),
            "66" => Ok(AgreementTier::P66),
            "50" => Ok(AgreementTier::P50),
            _ => Err(Error::invalid(format!(
                "unknown agreement tier `{s}` (all, 75, 66, 50)"
            ))),
        }
    }
}

/// Lines of `sentence@label`, split on the last `@`. `path` is a sentences
/// file, or a directory from which the tier's file is picked.
pub fn load_phrasebank(path: &Path, tier: AgreementTier) -> Result<LoadedCorpus> {
    let file = if path.is_dir() {
        path.join(tier.file_name())
    } else {
        path.to_path_buf()
    };
    let mut report = LoadReport::default();
    let text = read_text(&file, &mut report)?;
    let labels = LabelSet::new(PHRASEBANK_LABELS)?;
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{line_no}", file.display());
        let Some((sentence, label)) = line.rsplit_once('@') else {
            report.skip(location, "missing `@` separator");
            continue;
        };
        let Some(gold) = labels.index_of(label.trim()) else {
            report.skip(location, format!("unknown label `{}`", label.trim()));
            continue;
        };
        if sentence.trim().is_empty() {
            report.skip(location, "empty sentence");
            continue;
        }
        documents.push(Document::new(
            format!("line{line_no}"),
            sentence,
            Some(gold),
        ));
    }
    if documents.is_empty() {
        return Err(Error::invalid(format!(
            "{} holds no sentences",
            file.display()
        )));
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new("phrasebank", labels, documents),
        report,
    })
}
