use std::path::Path;

use super::{read_text, LoadReport, LoadedCorpus};
use crate::error::{Error, Result};
use crate::types::{
    Corpus, Document, LabelSet, Split, SplitAssignment, ATTR_PRODUCT_ID, ATTR_USER_ID,
};

pub const YELP_LABELS: [&str; 5] = ["1", "2", "3", "4", "5"];

/// `(user, product, rating, text)` from one line. Fields are separated by
/// one or more tabs; the text is everything after the rating's separator.
fn parse_line(line: &str) -> std::result::Result<(&str, &str, &str, &str), String> {
    let mut rest = line;
    let mut fields = [""; 3];
    for (i, slot) in fields.iter_mut().enumerate() {
        rest = rest.trim_start_matches('\t');
        let end = rest
            .find('\t')
            .ok_or_else(|| format!("expected 4 tab-separated fields, found {}", i + 1))?;
        *slot = &rest[..end];
        rest = &rest[end..];
    }
    let text = rest.trim_start_matches('\t');
    if text.trim().is_empty() {
        return Err("empty review text".into());
    }
    Ok((fields[0], fields[1], fields[2], text))
}

/// Tab-separated `user_id, product_id, rating, text` files with fixed
/// train/val/test roles.
pub fn load_yelp(train: &Path, val: &Path, test: &Path) -> Result<LoadedCorpus> {
    let labels = LabelSet::new(YELP_LABELS)?;
    let mut report = LoadReport::default();
    let mut documents = Vec::new();
    let mut tags = Vec::new();
    for (split, path) in [
        (Split::Train, train),
        (Split::Val, val),
        (Split::Test, test),
    ] {
        let text = read_text(path, &mut report)?;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let location = format!("{}:{line_no}", path.display());
            let (user, product, rating, review) = match parse_line(line) {
                Ok(fields) => fields,
                Err(reason) => {
                    report.skip(location, reason);
                    continue;
                }
            };
            let Some(gold) = labels.index_of(rating.trim()) else {
                report.skip(location, format!("rating `{rating}` outside 1-5"));
                continue;
            };
            documents.push(
                Document::new(format!("{split}:{line_no}"), review, Some(gold))
                    .with_attribute(ATTR_USER_ID, user)
                    .with_attribute(ATTR_PRODUCT_ID, product),
            );
            tags.push(split);
        }
    }
    if documents.is_empty() {
        return Err(Error::invalid("no Yelp reviews loaded"));
    }
    let corpus =
        Corpus::new("yelp", labels, documents).with_splits(SplitAssignment::fixed(tags))?;
    Ok(LoadedCorpus { corpus, report })
}
