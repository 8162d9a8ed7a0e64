use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, LoadReport, LoadedCorpus};
use crate::error::{Error, Result};
use crate::types::{Corpus, Document, LabelSet, Split, SplitAssignment};

pub const SEMEVAL_RELATIONS: [&str; 9] = [
    "Cause-Effect",
    "Component-Whole",
    "Content-Container",
    "Entity-Destination",
    "Entity-Origin",
    "Instrument-Agency",
    "Member-Collection",
    "Message-Topic",
    "Product-Producer",
];

/// Each relation in both directions, then `Other`: 19 labels.
pub fn semeval_labels() -> LabelSet {
    let mut names: Vec<String> = SEMEVAL_RELATIONS
        .iter()
        .flat_map(|r| [format!("{r}(e1,e2)"), format!("{r}(e2,e1)")])
        .collect();
    names.push("Other".into());
    LabelSet::new(names).expect("static label set is valid")
}

/// Byte ranges of the two entity strings in the marked text, markers
/// excluded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub e1: Range<usize>,
    pub e2: Range<usize>,
}

const TAGS: [(&str, char); 4] = [("<e1>", '#'), ("</e1>", '#'), ("<e2>", '$'), ("</e2>", '$')];

fn locate(sentence: &str, tag: &str) -> Result<usize> {
    let mut hits = sentence.match_indices(tag).map(|(i, _)| i);
    let first = hits
        .next()
        .ok_or_else(|| Error::invalid(format!("missing `{tag}` in sentence")))?;
    if let Some(second) = hits.next() {
        return Err(Error::invalid(format!(
            "duplicate `{tag}` at byte {second}"
        )));
    }
    Ok(first)
}

/// Rewrites `<e1>x</e1>` as `#x#` and `<e2>y</e2>` as `$y$`, processing tags
/// in textual order.
pub fn transform_entity_markers(sentence: &str) -> Result<(String, EntitySpan)> {
    let mut pos = [0usize; 4];
    for (slot, (tag, _)) in pos.iter_mut().zip(TAGS) {
        *slot = locate(sentence, tag)?;
    }
    for (open, close) in [(0, 1), (2, 3)] {
        if pos[close] < pos[open] {
            return Err(Error::invalid(format!(
                "`{}` at byte {} precedes `{}` at byte {}",
                TAGS[close].0, pos[close], TAGS[open].0, pos[open]
            )));
        }
    }
    let e1 = pos[0]..pos[1] + TAGS[1].0.len();
    let e2 = pos[2]..pos[3] + TAGS[3].0.len();
    if e1.start < e2.end && e2.start < e1.end {
        return Err(Error::invalid(format!(
            "entity tags overlap or nest at byte {}",
            e1.start.max(e2.start)
        )));
    }

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by_key(|&t| pos[t]);
    let mut out = String::with_capacity(sentence.len());
    let mut starts = [0usize; 2];
    let mut spans = [0..0, 0..0];
    let mut cursor = 0;
    for t in order {
        out.push_str(&sentence[cursor..pos[t]]);
        let (tag, marker) = TAGS[t];
        let entity = t / 2;
        if t % 2 == 0 {
            out.push(marker);
            starts[entity] = out.len();
        } else {
            spans[entity] = starts[entity]..out.len();
            out.push(marker);
        }
        cursor = pos[t] + tag.len();
    }
    out.push_str(&sentence[cursor..]);
    let [e1, e2] = spans;
    Ok((out, EntitySpan { e1, e2 }))
}

/// `(id, sentence)` from a line like `12\t"The <e1>...</e1> ..."`.
fn parse_sentence_line(line: &str) -> Option<(&str, &str)> {
    let (id, quoted) = line.split_once('\t')?;
    let id = id.trim();
    if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let quoted = quoted.trim();
    let inner = quoted.strip_prefix('"')?.strip_suffix('"')?;
    Some((id, inner))
}

fn parse_file(
    path: &Path,
    split: Split,
    labels: &LabelSet,
    report: &mut LoadReport,
    out: &mut Vec<Document>,
) -> Result<()> {
    let text = read_text(path, report)?;
    let mut record = 0;
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        record += 1;
        let location = format!("{}: record {record}", path.display());
        let relation = lines.next().map(str::trim);
        // Swallow the rest of the record (comment lines) up to the blank line.
        while lines.peek().is_some_and(|l| !l.trim().is_empty()) {
            lines.next();
        }
        let Some((id, sentence)) = parse_sentence_line(line) else {
            report.skip(location, "expected `<id>\\t\"<sentence>\"`");
            continue;
        };
        let Some(relation) = relation.filter(|r| !r.is_empty()) else {
            report.skip(location, "missing relation line");
            continue;
        };
        let Some(gold) = labels.index_of(relation) else {
            report.skip(location, format!("unknown relation `{relation}`"));
            continue;
        };
        match transform_entity_markers(sentence) {
            Ok((marked, _)) => out.push(Document::new(format!("{split}:{id}"), marked, Some(gold))),
            Err(e) => report.skip(location, e.to_string()),
        }
    }
    Ok(())
}

/// Official record format: numbered quoted sentence, relation line, comment
/// line, blank line. Train file maps to the train split, test to test.
pub fn load_semeval(train: &Path, test: &Path) -> Result<LoadedCorpus> {
    let labels = semeval_labels();
    let mut report = LoadReport::default();
    let mut documents = Vec::new();
    parse_file(train, Split::Train, &labels, &mut report, &mut documents)?;
    let n_train = documents.len();
    parse_file(test, Split::Test, &labels, &mut report, &mut documents)?;
    if documents.is_empty() {
        return Err(Error::invalid("no SemEval records loaded"));
    }
    let mut tags = vec![Split::Train; n_train];
    tags.resize(documents.len(), Split::Test);
    let corpus =
        Corpus::new("semeval", labels, documents).with_splits(SplitAssignment::fixed(tags))?;
    Ok(LoadedCorpus { corpus, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_entities_in_textual_order() {
        let (text, span) =
            transform_entity_markers("<e2>cause</e2> of the <e1>effect</e1>").unwrap();
        assert_eq!(text, "$cause$ of the #effect#");
        assert_eq!(&text[span.e1], "effect");
        assert_eq!(&text[span.e2], "cause");
    }

    #[test]
    fn malformed_tags_are_invalid() {
        for bad in [
            "<e1>a</e1> <e2>b",
            "<e1>a <e2>b</e2></e1>",
            "</e1>a<e1> <e2>b</e2>",
            "<e1>a</e1> <e1>c</e1> <e2>b</e2>",
        ] {
            assert!(
                matches!(transform_entity_markers(bad), Err(Error::InvalidInput(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn label_set_has_nineteen_directed_labels() {
        let labels = semeval_labels();
        assert_eq!(labels.len(), 19);
        assert_ne!(
            labels.index_of("Entity-Origin(e1,e2)"),
            labels.index_of("Entity-Origin(e2,e1)")
        );
        assert_eq!(labels.index_of("Other"), Some(18));
    }

    #[test]
    fn parses_records_and_skips_broken_ones() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("TRAIN_FILE.TXT");
        let test = dir.path().join("TEST_FILE_FULL.TXT");
        std::fs::write(
            &train,
            "1\t\"The <e1>student</e1> <e2>association</e2> is here.\"\r\nMember-Collection(e2,e1)\r\nComment:\r\n\r\n\
             2\t\"No tags at all.\"\r\nOther\r\nComment:\r\n\r\n\
             3\t\"A <e1>cup</e1> of <e2>tea</e2>.\"\r\nContent-Container(e2,e1)\r\nComment: note\r\n\r\n",
        )
        .unwrap();
        std::fs::write(
            &test,
            "8001\t\"<e1>Rain</e1> caused <e2>floods</e2>.\"\nCause-Effect(e1,e2)\nComment:\n",
        )
        .unwrap();
        let loaded = load_semeval(&train, &test).unwrap();
        let docs = &loaded.corpus.documents;
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].text, "The #student# $association$ is here.");
        assert_eq!(docs[2].id, "test:8001");
        assert_eq!(loaded.report.skipped.len(), 1);
        assert!(loaded.report.skipped[0].location.ends_with("record 2"));
    }
}
