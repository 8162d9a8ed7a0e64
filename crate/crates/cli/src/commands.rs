//! Execution of resolved run configs.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use maskprobe::attribution::{
    compare_models, explain_corpus, occlusion_importances, AttributionResult, TopFeature,
};
use maskprobe::classifiers::{grid_search_linear, train, ModelKind, NativePredictor};
use maskprobe::evaluation::{
    aggregate_runs, confusion_matrix, format_metrics_table, macro_metrics, split_corpus,
    MetricsReport, SplitRatios,
};
use maskprobe::gateway::{conformance_check, handshake, ModelServer, RemoteEndpoint};
use maskprobe::ingestion::{load_corpus, LoadReport};
use maskprobe::persist::{self, ModelBody};
use maskprobe::report::{
    export_json, render_ansi, render_comparison_html, render_html, RenderSpec,
};
use maskprobe::stacking::stacked_pipeline;
use maskprobe::synthetic::{noisy_rater_corpus, topic_corpus, NoisyRaterConfig};
use maskprobe::types::{Corpus, Predictor, Split, SplitAssignment, ATTR_PRODUCT_ID, ATTR_USER_ID};
use serde::Serialize;
use serde_json::json;

use crate::args::ServeArgs;
use crate::config::*;
use crate::manifest::{digest_input, InputDigest, Manifest, OutDir};
use crate::UserError;

/// Progress on stdout, warnings on stderr.
pub struct Console;

impl Console {
    pub fn say(&self, text: impl AsRef<str>) {
        println!("{}", text.as_ref().trim_end_matches('\n'));
    }

    pub fn warn(&self, text: impl AsRef<str>) {
        eprintln!("warning: {}", text.as_ref());
    }
}

fn pretty(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Checksums of every file or directory the run reads.
pub fn inputs_of(config: &RunConfig) -> Result<Vec<InputDigest>> {
    let mut inputs = Vec::new();
    let corpus = |spec: &CorpusSpec| digest_input("corpus", &spec.root);
    let model = |src: &PredictorSource, role: &str| match src {
        PredictorSource::Model(p) => digest_input(role, p).map(Some),
        PredictorSource::Endpoint(_) => Ok(None),
    };
    match config {
        RunConfig::Train(c) => inputs.push(corpus(&c.corpus)?),
        RunConfig::Eval(c) => inputs.push(corpus(&c.corpus)?),
        RunConfig::Explain(c) => {
            inputs.extend(model(&c.source, "model")?);
            if let ExplainInput::Corpus { corpus: spec, .. } = &c.input {
                inputs.push(corpus(spec)?);
            }
        }
        RunConfig::Compare(c) => {
            for s in &c.sources {
                inputs.extend(model(s, "model")?);
            }
        }
        RunConfig::Stack(c) => {
            if let StackBase::Source(s) = &c.base {
                inputs.extend(model(s, "base-model")?);
            }
            inputs.push(corpus(&c.corpus)?);
        }
        RunConfig::Probe(_) | RunConfig::Synth(_) => {}
    }
    Ok(inputs)
}

/// Runs `config`, writing artifacts and the manifest under `out`.
pub fn execute(config: &RunConfig, out: &Path, console: &Console) -> Result<Manifest> {
    let inputs = inputs_of(config)?;
    let mut dir = OutDir::create(out)?;
    match config {
        RunConfig::Train(c) => run_train(c, &mut dir, console)?,
        RunConfig::Eval(c) => run_eval(c, &mut dir, console)?,
        RunConfig::Explain(c) => run_explain(c, &mut dir, console)?,
        RunConfig::Compare(c) => run_compare(c, &mut dir, console)?,
        RunConfig::Stack(c) => run_stack(c, &mut dir, console)?,
        RunConfig::Probe(c) => run_probe(c, &mut dir, console)?,
        RunConfig::Synth(c) => run_synth(c, &mut dir, console)?,
    }
    dir.finish(config.clone(), inputs)
}

/// Loads a corpus and gives it a stratified split when it has no fixed one.
fn load(spec: &CorpusSpec, dir: &mut OutDir, console: &Console) -> Result<Corpus> {
    if !spec.root.exists() {
        return Err(UserError(format!(
            "corpus root {} does not exist",
            spec.root.display()
        ))
        .into());
    }
    let loaded = load_corpus(spec.kind, &spec.root, spec.tier)?;
    report_load(&loaded.report, console);
    dir.write("load-report.json", pretty(&loaded.report)?)?;
    let corpus = loaded.corpus;
    if corpus.splits.is_some() {
        return Ok(corpus);
    }
    let splits = split_corpus(&corpus, SplitRatios::DEFAULT, spec.split_seed)?;
    for w in &splits.warnings {
        console.warn(w);
    }
    Ok(corpus.with_splits(splits)?)
}

fn report_load(report: &LoadReport, console: &Console) {
    for w in &report.warnings {
        console.warn(w);
    }
    if !report.skipped.is_empty() {
        console.warn(format!(
            "skipped {} malformed record(s); first: {}: {}",
            report.skipped.len(),
            report.skipped[0].location,
            report.skipped[0].reason
        ));
    }
    for f in &report.latin1_files {
        console.warn(format!("{} is not UTF-8; decoded as Latin-1", f.display()));
    }
}

fn split_sizes(corpus: &Corpus) -> serde_json::Value {
    let s = corpus.splits.as_ref().expect("split assigned");
    json!({
        "train": s.count(Split::Train),
        "val": s.count(Split::Val),
        "test": s.count(Split::Test),
    })
}

/// Trains on the train split, choosing the linear L2 strength on the
/// validation split when a grid is configured.
fn fit(
    corpus: &Corpus,
    model: &ModelConfig,
) -> Result<(maskprobe::classifiers::NativeModel, serde_json::Value)> {
    let mut spec = model.spec.clone();
    let mut selection = serde_json::Value::Null;
    if spec.kind == ModelKind::LinearTfidf && !model.l2_grid.is_empty() {
        let (best, val_acc) = grid_search_linear(corpus, &spec.linear, &model.l2_grid)?;
        if let Some(acc) = val_acc {
            selection = json!({ "l2": best.l2, "val_accuracy": acc });
        }
        spec.linear = best;
    }
    Ok((train(corpus, &spec)?, selection))
}

fn test_metrics(predictor: &dyn Predictor, corpus: &Corpus) -> Result<MetricsReport> {
    let docs: Vec<_> = corpus
        .documents_in(Split::Test)
        .filter(|d| d.gold.is_some())
        .collect();
    if docs.is_empty() {
        return Err(UserError(format!(
            "corpus `{}` has no labelled test documents",
            corpus.name
        ))
        .into());
    }
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let dists = predictor.predict_batch(&texts)?;
    let gold: Vec<usize> = docs.iter().map(|d| d.gold.expect("filtered")).collect();
    let predicted = dists
        .iter()
        .map(|d| {
            d.argmax()
                .context("predictor returned an empty distribution")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(macro_metrics(&confusion_matrix(
        &gold,
        &predicted,
        corpus.labels.len(),
    )?))
}

fn run_train(c: &TrainConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let corpus = load(&c.corpus, dir, console)?;
    let (model, selection) = fit(&corpus, &c.model)?;
    let mut predictor = NativePredictor::new(&c.name, corpus.labels.clone(), model);
    if let Some(mask) = &c.mask_token {
        predictor = predictor.with_mask_token(mask)?;
    }
    let metrics = test_metrics(&predictor, &corpus)?;
    let file = format!("{}.model", c.name);
    predictor.save(&dir.path(&file))?;
    dir.record(&file)?;
    dir.write(
        "train.json",
        pretty(&json!({
            "name": c.name,
            "kind": c.model.spec.kind,
            "corpus": c.corpus.kind,
            "splits": split_sizes(&corpus),
            "selection": selection,
            "test": metrics,
        }))?,
    )?;
    console.say(format_metrics_table(&[(c.name.as_str(), metrics)], 2));
    console.say(format!("model written to {}", dir.path(&file).display()));
    Ok(())
}

fn run_eval(c: &EvalConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let corpus = load(&c.corpus, dir, console)?;
    let mut runs = Vec::new();
    for &seed in &c.seeds {
        let model = ModelConfig {
            spec: c.model.spec.clone().with_seed(seed),
            l2_grid: c.model.l2_grid.clone(),
        };
        let (trained, selection) = fit(&corpus, &model)?;
        let predictor =
            NativePredictor::new(c.model.spec.kind.as_str(), corpus.labels.clone(), trained);
        let metrics = test_metrics(&predictor, &corpus)?;
        runs.push((seed, metrics, selection));
    }
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.1).collect();
    let mean = aggregate_runs(&reports)?;
    let names: Vec<String> = runs.iter().map(|r| format!("seed {}", r.0)).collect();
    let mut rows: Vec<(&str, MetricsReport)> =
        names.iter().map(String::as_str).zip(reports).collect();
    let mean_name = format!("{} (mean)", c.model.spec.kind.as_str());
    rows.push((&mean_name, mean));
    let table = format_metrics_table(&rows, 2);
    dir.write("metrics.txt", &table)?;
    dir.write(
        "metrics.json",
        pretty(&json!({
            "corpus": c.corpus.kind,
            "model": c.model.spec.kind,
            "splits": split_sizes(&corpus),
            "runs": runs.iter().map(|(seed, m, sel)| json!({ "seed": seed, "metrics": m, "selection": sel })).collect::<Vec<_>>(),
            "mean": mean,
        }))?,
    )?;
    console.say(table);
    Ok(())
}

fn open(source: &PredictorSource, remote: &RemoteConfig) -> Result<Box<dyn Predictor>> {
    match source {
        PredictorSource::Model(path) => {
            if !path.exists() {
                return Err(
                    UserError(format!("model file {} does not exist", path.display())).into(),
                );
            }
            Ok(Box::new(NativePredictor::load(path)?))
        }
        PredictorSource::Endpoint(url) => {
            let mut endpoint =
                RemoteEndpoint::new(url).with_timeout(Duration::from_secs_f64(remote.timeout_s));
            if let Some(b) = remote.max_batch {
                endpoint = endpoint.with_max_batch(b);
            }
            Ok(Box::new(handshake(&endpoint)?))
        }
    }
}

fn limited(corpus: &Corpus, split: Split, limit: Option<usize>) -> Result<Corpus> {
    let docs: Vec<_> = corpus
        .documents_in(split)
        .take(limit.unwrap_or(usize::MAX))
        .cloned()
        .collect();
    let n = docs.len();
    Ok(
        Corpus::new(corpus.name.clone(), corpus.labels.clone(), docs)
            .with_splits(SplitAssignment::fixed(vec![split; n]))?,
    )
}

fn run_explain(c: &ExplainConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let predictor = open(&c.source, &c.remote)?;
    let spec = RenderSpec {
        k: c.k,
        show_deteriorating: c.show_deteriorating,
        color: c.color,
    };
    let results: Vec<AttributionResult> = match &c.input {
        ExplainInput::Texts(texts) => texts
            .iter()
            .enumerate()
            .map(|(i, t)| occlusion_importances(predictor.as_ref(), &format!("text-{}", i + 1), t))
            .collect::<maskprobe::Result<_>>()?,
        ExplainInput::Corpus {
            corpus,
            split,
            limit,
        } => {
            let full = load(corpus, dir, console)?;
            let subset = limited(&full, *split, *limit)?;
            let explained = explain_corpus(predictor.as_ref(), &subset, *split, c.k)?;
            for s in &explained.skipped {
                console.warn(format!("skipped {}: {}", s.doc_id, s.reason));
            }
            dir.write(
                "explain-summary.json",
                pretty(&json!({
                    "split": split,
                    "explained": explained.documents.len(),
                    "correct": explained.summary.map(|s| s.correct),
                    "incorrect": explained.summary.map(|s| s.incorrect),
                    "skipped": explained.skipped.iter().map(|s| json!({ "doc_id": s.doc_id, "reason": s.reason })).collect::<Vec<_>>(),
                }))?,
            )?;
            if let Some(s) = explained.summary {
                console.say(format!("{} correct, {} incorrect", s.correct, s.incorrect));
            }
            explained.documents.into_iter().map(|d| d.result).collect()
        }
    };
    let plain = RenderSpec {
        color: false,
        ..spec
    };
    let mut heatmaps = String::new();
    for r in &results {
        console.say(format!("{}:", r.doc_id));
        console.say(render_ansi(r, &spec));
        let _ = writeln!(
            heatmaps,
            "{}:\n{}",
            r.doc_id,
            render_ansi(r, &plain).trim_end()
        );
    }
    dir.write("heatmaps.txt", heatmaps)?;
    dir.write("explain.json", export_json(&results))?;
    dir.write("explain.html", render_html(&results, &spec))?;
    Ok(())
}

#[derive(Serialize)]
struct ComparedColumn<'a> {
    predictor: &'a str,
    mask_token: &'a str,
    prediction: &'a str,
    confidence: f64,
    top: &'a [TopFeature],
}

fn run_compare(c: &CompareConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let predictors = c
        .sources
        .iter()
        .map(|s| open(s, &c.remote))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p.as_ref()).collect();
    let table = compare_models(&refs, "text-1", &c.text, c.k)?;
    let columns: Vec<ComparedColumn<'_>> = table
        .columns
        .iter()
        .map(|col| ComparedColumn {
            predictor: &col.predictor,
            mask_token: &col.mask_token,
            prediction: &col.reference.argmax.name,
            confidence: col.reference.confidence(),
            top: &col.top,
        })
        .collect();
    dir.write(
        "compare.json",
        pretty(&json!({ "text": c.text, "k": table.k, "columns": columns }))?,
    )?;
    dir.write("compare.html", render_comparison_html(&table))?;
    let mut text = String::new();
    for col in &table.columns {
        let words: Vec<&str> = col.top.iter().map(|t| t.token.as_str()).collect();
        let _ = writeln!(
            text,
            "{}: {} ({:.3}) top {}: {}",
            col.predictor,
            col.reference.argmax.name,
            col.reference.confidence(),
            table.k,
            words.join(", ")
        );
    }
    console.say(text);
    Ok(())
}

fn run_stack(c: &StackConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let corpus = load(&c.corpus, dir, console)?;
    let has_attributes = corpus
        .documents
        .iter()
        .any(|d| d.attribute(ATTR_USER_ID).is_some() && d.attribute(ATTR_PRODUCT_ID).is_some());
    if !has_attributes {
        return Err(UserError(format!(
            "corpus `{}` carries no user/product attributes",
            corpus.name
        ))
        .into());
    }
    let predictor: Box<dyn Predictor> = match &c.base {
        StackBase::Source(s) => open(s, &c.remote)?,
        StackBase::Train(model) => {
            let (trained, _) = fit(&corpus, model)?;
            let p = NativePredictor::new(
                format!("{}-base", model.spec.kind.as_str()),
                corpus.labels.clone(),
                trained,
            );
            p.save(&dir.path("base.model"))?;
            dir.record("base.model")?;
            Box::new(p)
        }
    };
    let report = stacked_pipeline(predictor.as_ref(), &corpus, &c.stacking)?;
    for w in &report.warnings {
        console.warn(w);
    }
    if !report.skipped.is_empty() {
        console.warn(format!("{} document(s) skipped", report.skipped.len()));
    }
    persist::save(
        &dir.path("forest.model"),
        "stacked-forest",
        &corpus.labels,
        None,
        ModelBody::RandomForest(report.forest.clone()),
    )?;
    dir.record("forest.model")?;
    let base_name = format!("{} (base)", predictor.name());
    let table = format_metrics_table(&[(&base_name, report.base), ("stacked", report.stacked)], 2);
    dir.write("metrics.txt", &table)?;
    dir.write(
        "stack.json",
        pretty(&json!({
            "corpus": c.corpus.kind,
            "base_predictor": predictor.name(),
            "n_train": report.n_train,
            "n_test": report.n_test,
            "base": report.base,
            "stacked": report.stacked,
            "gain_points": report.gain_points(),
            "warnings": report.warnings,
            "skipped": report.skipped.iter().map(|s| json!({ "doc_id": s.doc_id, "reason": s.reason })).collect::<Vec<_>>(),
        }))?,
    )?;
    console.say(table);
    console.say(format!("gain: {:+.2} points", report.gain_points()));
    Ok(())
}

fn run_probe(c: &ProbeConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    let mut endpoint =
        RemoteEndpoint::new(&c.endpoint).with_timeout(Duration::from_secs_f64(c.remote.timeout_s));
    if let Some(b) = c.remote.max_batch {
        endpoint = endpoint.with_max_batch(b);
    }
    let predictor = handshake(&endpoint)?;
    let report = conformance_check(&predictor, &c.texts);
    dir.write("probe.json", pretty(&report)?)?;
    console.say(report.to_string());
    if !report.all_passed() {
        let failed = report.probes.iter().filter(|p| !p.passed).count();
        return Err(UserError(format!("{failed} conformance probe(s) failed")).into());
    }
    Ok(())
}

fn run_synth(c: &SynthConfig, dir: &mut OutDir, console: &Console) -> Result<()> {
    match *c {
        SynthConfig::Topics {
            docs,
            classes,
            seed,
        } => {
            let corpus = topic_corpus(seed, docs, classes)?;
            for doc in &corpus.documents {
                let label = &corpus
                    .labels
                    .get(doc.gold.expect("synthetic docs are labelled"))
                    .expect("in range")
                    .name;
                dir.write(
                    &format!("corpus/{label}/{}.txt", doc.id),
                    format!("{}\n", doc.text),
                )?;
            }
            console.say(format!(
                "wrote {docs} documents in {classes} class directories under {}",
                dir.path("corpus").display()
            ));
        }
        SynthConfig::NoisyRaters {
            docs,
            users,
            products,
            neutralize,
            seed,
        } => {
            let corpus = noisy_rater_corpus(&NoisyRaterConfig {
                n_docs: docs,
                n_users: users,
                n_products: products,
                seed,
                neutralize,
            })?;
            let tags = &corpus.splits.as_ref().expect("generator splits").tags;
            for (split, file) in [
                (Split::Train, "train.txt"),
                (Split::Val, "dev.txt"),
                (Split::Test, "test.txt"),
            ] {
                let mut text = String::new();
                for (doc, _) in corpus
                    .documents
                    .iter()
                    .zip(tags)
                    .filter(|(_, &t)| t == split)
                {
                    let rating = &corpus
                        .labels
                        .get(doc.gold.expect("labelled"))
                        .expect("in range")
                        .name;
                    let _ = writeln!(
                        text,
                        "{}\t{}\t{rating}\t{}",
                        doc.attribute(ATTR_USER_ID).unwrap_or_default(),
                        doc.attribute(ATTR_PRODUCT_ID).unwrap_or_default(),
                        doc.text
                    );
                }
                dir.write(&format!("corpus/{file}"), text)?;
            }
            console.say(format!(
                "wrote {docs} reviews under {}",
                dir.path("corpus").display()
            ));
        }
    }
    Ok(())
}

/// Serves a saved model until the process is killed.
pub fn serve(args: &ServeArgs) -> Result<()> {
    if !args.model.exists() {
        bail!(UserError(format!(
            "model file {} does not exist",
            args.model.display()
        )));
    }
    let predictor = NativePredictor::load(&args.model)?;
    let name = predictor.name().to_string();
    let server = ModelServer::bind(
        &args.addr,
        Arc::new(predictor),
        args.max_batch,
        args.workers,
    )?;
    println!("serving `{name}` at {}", server.url());
    server.join();
    Ok(())
}
