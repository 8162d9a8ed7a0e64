use std::fs;
use std::path::Path;

use maskprobe::ingestion::{
    check_manifest, load_corpus, transform_entity_markers, AgreementTier, CorpusKind,
    BBC_SPORT_MANIFEST,
};
use maskprobe::types::{Split, ATTR_USER_ID};
use proptest::prelude::*;

fn write(path: &Path, bytes: &[u8]) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, bytes).unwrap();
}

#[test]
fn bbc_layout_with_latin1_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("football/001.txt"),
        b"Arsenal win\r\n\r\nA late goal.",
    );
    write(&dir.path().join("tennis/001.txt"), b"Caf\xe9 champion");
    write(&dir.path().join("tennis/002.txt"), b"Final set");
    let loaded = load_corpus(CorpusKind::BbcSport, dir.path(), AgreementTier::default()).unwrap();
    let c = &loaded.corpus;
    assert_eq!(c.name, "bbc-sport");
    assert_eq!(c.documents[0].text, "Arsenal win\n\nA late goal.");
    assert_eq!(c.documents[1].text, "Café champion");
    assert_eq!(loaded.report.latin1_files.len(), 1);
    let problems = check_manifest(c, &BBC_SPORT_MANIFEST);
    assert!(problems.iter().any(|p| p.contains("737")));
    assert!(problems.iter().any(|p| p.contains("football")));
    // Identical bytes in, identical corpus out.
    assert_eq!(
        load_corpus(CorpusKind::BbcSport, dir.path(), AgreementTier::default()).unwrap(),
        loaded
    );
}

#[test]
fn phrasebank_directory_picks_tier_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("Sentences_50Agree.txt"),
        b"Profit rose.@positive\nSales fell.@negative\nOk.@neutral\n",
    );
    write(
        &dir.path().join("Sentences_AllAgree.txt"),
        b"Profit rose.@positive\n",
    );
    let all = load_corpus(CorpusKind::Phrasebank, dir.path(), AgreementTier::All).unwrap();
    let default =
        load_corpus(CorpusKind::Phrasebank, dir.path(), AgreementTier::default()).unwrap();
    assert_eq!(all.corpus.documents.len(), 1);
    assert_eq!(default.corpus.documents.len(), 3);
    assert_eq!(
        default
            .corpus
            .labels
            .get(default.corpus.documents[0].gold.unwrap())
            .unwrap()
            .name,
        "positive"
    );
}

#[test]
fn yelp_directory_resolves_split_files() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("yelp-2013-seg-20-20.train.ss"),
        b"u1\t\tp9\t\t4\t\tgreat tacos <sssss> cheap\n",
    );
    write(
        &dir.path().join("yelp-2013-seg-20-20.dev.ss"),
        b"u2\t\tp9\t\t2\t\tmeh\n",
    );
    write(
        &dir.path().join("yelp-2013-seg-20-20.test.ss"),
        b"u3\t\tp1\t\t5\t\tyum\nu4\t\tp1\t\t7\t\tbad\n",
    );
    let loaded = load_corpus(CorpusKind::Yelp, dir.path(), AgreementTier::default()).unwrap();
    let c = &loaded.corpus;
    assert_eq!(
        [Split::Train, Split::Val, Split::Test].map(|s| c.documents_in(s).count()),
        [1, 1, 1]
    );
    assert_eq!(c.documents[0].attribute(ATTR_USER_ID), Some("u1"));
    assert_eq!(loaded.report.skipped.len(), 1);
}

#[test]
fn semeval_official_layout() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("SemEval2010_task8_training/TRAIN_FILE.TXT"),
        b"3\t\"The <e1>student</e1> <e2>association</e2> is the voice of the undergraduate student population of the State University of New York at Buffalo.\"\r\nMember-Collection(e2,e1)\r\nComment:\r\n\r\n",
    );
    write(
        &dir.path().join("SemEval2010_task8_testing_keys/TEST_FILE_FULL.TXT"),
        b"8001\t\"The most common <e1>audits</e1> were about <e2>waste</e2> and recycling.\"\r\nMessage-Topic(e1,e2)\r\nComment:\r\n\r\n",
    );
    let loaded = load_corpus(CorpusKind::Semeval, dir.path(), AgreementTier::default()).unwrap();
    let c = &loaded.corpus;
    assert_eq!(c.labels.len(), 19);
    assert!(c.documents[0]
        .text
        .starts_with("The #student# $association$ is the voice"));
    assert_eq!(c.documents_in(Split::Test).count(), 1);
}

#[test]
fn missing_split_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("a.train"), b"u\tp\t1\tx\n");
    let err = load_corpus(CorpusKind::Yelp, dir.path(), AgreementTier::default()).unwrap_err();
    assert!(err.to_string().contains("dev/val"), "{err}");
}

proptest! {
    #[test]
    fn marker_spans_recover_entities(
        pre in "[a-z ,.]{0,12}",
        mid in "[a-z ,.]{1,12}",
        post in "[a-z ,.]{0,12}",
        a in "[a-zé ]{1,10}",
        b in "[a-z日 ]{1,10}",
        swapped: bool,
    ) {
        let (first, second) = if swapped {
            (format!("<e2>{b}</e2>"), format!("<e1>{a}</e1>"))
        } else {
            (format!("<e1>{a}</e1>"), format!("<e2>{b}</e2>"))
        };
        let tagged = format!("{pre}{first}{mid}{second}{post}");
        let (text, span) = transform_entity_markers(&tagged).unwrap();
        prop_assert_eq!(&text[span.e1.clone()], a.as_str());
        prop_assert_eq!(&text[span.e2.clone()], b.as_str());
        prop_assert_eq!(&text[span.e1.start - 1..span.e1.start], "#");
        prop_assert_eq!(&text[span.e2.end..span.e2.end + 1], "$");
        prop_assert_eq!(text.len(), tagged.len() - 18 + 4);
    }
}
