use std::fs;
use std::path::Path;

use super::{read_text, LoadReport, LoadedCorpus};
use crate::error::{Error, Result};
use crate::types::{Corpus, Document, LabelSet};

/// One subdirectory per class, one document per file. Labels and documents
/// follow lexicographic order; hidden entries are ignored silently and other
/// stray files with a warning.
pub fn load_bbc(root: &Path, name: &str) -> Result<LoadedCorpus> {
    let mut report = LoadReport::default();
    let mut classes = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        let file_name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if file_name.starts_with('.') {
            continue;
        }
        if path.is_dir() {
            classes.push((file_name, path));
        } else {
            report
                .warnings
                .push(format!("ignoring non-class entry {}", path.display()));
        }
    }
    if classes.is_empty() {
        return Err(Error::invalid(format!(
            "{} contains no class directories",
            root.display()
        )));
    }
    classes.sort();
    report.warnings.sort();
    let labels = LabelSet::new(classes.iter().map(|(c, _)| c.clone()))?;

    let mut documents = Vec::new();
    for (index, (class, dir)) in classes.iter().enumerate() {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let file_name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            if file_name.starts_with('.') {
                continue;
            }
            if path.is_file() {
                files.push((file_name, path));
            } else {
                report
                    .warnings
                    .push(format!("ignoring non-file entry {}", path.display()));
            }
        }
        files.sort();
        for (file_name, path) in files {
            match read_text(&path, &mut report) {
                Ok(text) => documents.push(Document::new(
                    format!("{class}/{file_name}"),
                    text,
                    Some(index),
                )),
                Err(e) => report.skip(path.display().to_string(), e.to_string()),
            }
        }
    }
    Ok(LoadedCorpus {
        corpus: Corpus::new(name, labels, documents),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stray_file_is_ignored_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        for (class, file, text) in [
            ("tech", "001.txt", "chips"),
            ("sport", "002.txt", "goal"),
            ("sport", "001.txt", "run"),
        ] {
            fs::create_dir_all(dir.path().join(class)).unwrap();
            fs::write(dir.path().join(class).join(file), text).unwrap();
        }
        fs::write(dir.path().join("README.TXT"), "about").unwrap();
        let loaded = load_bbc(dir.path(), "bbc").unwrap();
        let ids: Vec<&str> = loaded
            .corpus
            .documents
            .iter()
            .map(|d| d.id.as_str())
            .collect();
        assert_eq!(ids, ["sport/001.txt", "sport/002.txt", "tech/001.txt"]);
        assert_eq!(loaded.corpus.labels.names(), ["sport", "tech"]);
        assert_eq!(loaded.report.warnings.len(), 1);
    }

    #[test]
    fn empty_root_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_bbc(dir.path(), "bbc"),
            Err(Error::InvalidInput(_))
        ));
    }
}
