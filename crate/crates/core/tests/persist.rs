use maskprobe::classifiers::{train, ModelKind, NativePredictor, TrainSpec};
use maskprobe::persist::{self, ModelBody};
use maskprobe::stacking::{train_forest, ForestConfig};
use maskprobe::synthetic::topic_corpus;
use maskprobe::types::Predictor;
use maskprobe::Error;

#[test]
fn every_model_kind_round_trips() {
    let corpus = topic_corpus(1, 60, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let probe: Vec<String> = corpus
        .documents
        .iter()
        .take(10)
        .map(|d| d.text.clone())
        .collect();
    for kind in [
        ModelKind::NaiveBayes,
        ModelKind::LinearTfidf,
        ModelKind::TinyAttention,
    ] {
        let mut spec = TrainSpec::new(kind);
        spec.attention.epochs = 2;
        let model = train(&corpus, &spec).unwrap();
        let p = NativePredictor::new(kind.as_str(), corpus.labels.clone(), model)
            .with_mask_token("<mask>")
            .unwrap();
        let path = dir.path().join(format!("{}.model", kind.as_str()));
        p.save(&path).unwrap();
        let loaded = NativePredictor::load(&path).unwrap();
        assert_eq!(loaded.handle(), p.handle());
        assert_eq!(
            loaded.predict_batch(&probe).unwrap(),
            p.predict_batch(&probe).unwrap()
        );
        // Saving the loaded model reproduces the file byte for byte.
        let again = dir.path().join("again.model");
        loaded.save(&again).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }
}

#[test]
fn forest_round_trips_and_is_not_a_text_model() {
    let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let labels = maskprobe::types::LabelSet::new(["a", "b"]).unwrap();
    let forest = train_forest(
        &x,
        &[0, 1, 1],
        &labels,
        &ForestConfig {
            n_trees: 3,
            ..Default::default()
        },
    )
    .unwrap()
    .forest;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rf.model");
    persist::save(
        &path,
        "rf",
        &labels,
        None,
        ModelBody::RandomForest(forest.clone()),
    )
    .unwrap();
    match persist::load(&path).unwrap().body {
        ModelBody::RandomForest(f) => assert_eq!(f, forest),
        other => panic!("unexpected body {}", other.kind_name()),
    }
    assert!(matches!(
        NativePredictor::load(&path),
        Err(Error::ModelLoad { .. })
    ));
}

#[test]
fn damaged_files_get_diagnostics() {
    let corpus = topic_corpus(1, 30, 2).unwrap();
    let model = train(&corpus, &TrainSpec::new(ModelKind::NaiveBayes)).unwrap();
    let bytes = persist::to_bytes("nb", &corpus.labels, None, model.into()).unwrap();
    let path = std::path::Path::new("x.model");
    let diag = |b: &[u8]| match persist::from_bytes(path, b) {
        Err(Error::ModelLoad { diagnostic, .. }) => diagnostic,
        other => panic!("expected load error, got {:?}", other.map(|c| c.name)),
    };
    assert!(diag(&bytes[..bytes.len() / 2]).contains("corrupt"));
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert!(diag(text.replace("MASKPROBE-MODEL", "OTHER").as_bytes()).contains("magic"));
    assert!(diag(
        text.replace("\"format_version\":1", "\"format_version\":9")
            .as_bytes()
    )
    .contains("version"));
}
