//! Fully resolved run configuration: flags over environment over defaults.

use std::path::PathBuf;

use maskprobe::classifiers::linear::DEFAULT_L2_GRID;
use maskprobe::classifiers::{LossKind, ModelKind, TrainSpec};
use maskprobe::gateway::ENDPOINT_ENV;
use maskprobe::ingestion::{AgreementTier, CorpusKind};
use maskprobe::stacking::{FeaturesPerSplit, ForestConfig, StackingConfig};
use maskprobe::types::Split;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::UserError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub kind: CorpusKind,
    pub root: PathBuf,
    pub tier: AgreementTier,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorSource {
    Model(PathBuf),
    Endpoint(String),
}

impl PredictorSource {
    pub fn is_remote(&self) -> bool {
        matches!(self, PredictorSource::Endpoint(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub timeout_s: f64,
    pub max_batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub spec: TrainSpec,
    /// Searched on the validation split when present; empty means fixed.
    pub l2_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub corpus: CorpusSpec,
    pub model: ModelConfig,
    pub name: String,
    pub mask_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub corpus: CorpusSpec,
    pub model: ModelConfig,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainInput {
    Texts(Vec<String>),
    Corpus {
        corpus: CorpusSpec,
        split: Split,
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub source: PredictorSource,
    pub input: ExplainInput,
    pub k: usize,
    pub show_deteriorating: bool,
    pub color: bool,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub sources: Vec<PredictorSource>,
    pub text: String,
    pub k: usize,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackBase {
    Source(PredictorSource),
    Train(ModelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub corpus: CorpusSpec,
    pub base: StackBase,
    pub stacking: StackingConfig,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub endpoint: String,
    pub texts: Vec<String>,
    pub remote: RemoteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthConfig {
    Topics {
        docs: usize,
        classes: usize,
        seed: u64,
    },
    NoisyRaters {
        docs: usize,
        users: usize,
        products: usize,
        neutralize: bool,
        seed: u64,
    },
}

/// Everything a run needs except the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Train(TrainConfig),
    Eval(EvalConfig),
    Explain(ExplainConfig),
    Compare(CompareConfig),
    Stack(StackConfig),
    Probe(ProbeConfig),
    Synth(SynthConfig),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Train(_) => "train",
            RunConfig::Eval(_) => "eval",
            RunConfig::Explain(_) => "explain",
            RunConfig::Compare(_) => "compare",
            RunConfig::Stack(_) => "stack",
            RunConfig::Probe(_) => "probe",
            RunConfig::Synth(_) => "synth",
        }
    }

    /// True when outputs depend on a remote service.
    pub fn uses_remote(&self) -> bool {
        match self {
            RunConfig::Explain(c) => c.source.is_remote(),
            RunConfig::Compare(c) => c.sources.iter().any(PredictorSource::is_remote),
            RunConfig::Stack(c) => matches!(&c.base, StackBase::Source(s) if s.is_remote()),
            RunConfig::Probe(_) => true,
            _ => false,
        }
    }
}

/// Process environment consulted during resolution.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub endpoint: Option<String>,
    pub no_color: bool,
}

impl Env {
    pub fn from_process() -> Self {
        Self {
            endpoint: std::env::var(ENDPOINT_ENV)
                .ok()
                .filter(|v| !v.trim().is_empty()),
            no_color: std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()),
        }
    }
}

/// A resolved config and the warnings produced while resolving it.
#[derive(Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

type Res<T> = Result<T, UserError>;

fn parse<T: std::str::FromStr<Err = maskprobe::Error>>(value: &str) -> Res<T> {
    value
        .parse()
        .map_err(|e: maskprobe::Error| UserError(e.to_string()))
}

fn corpus_spec(kind: &str, root: PathBuf, tier: Option<&str>, split_seed: u64) -> Res<CorpusSpec> {
    let kind: CorpusKind = parse(kind)?;
    if tier.is_some() && kind != CorpusKind::Phrasebank {
        return Err(UserError(format!(
            "--tier applies only to phrasebank, not {kind}"
        )));
    }
    Ok(CorpusSpec {
        kind,
        root,
        tier: tier.map(parse).transpose()?.unwrap_or_default(),
        split_seed,
    })
}

fn remote(args: &RemoteArgs) -> Res<RemoteConfig> {
    if !(args.timeout_s.is_finite() && args.timeout_s > 0.0) {
        return Err(UserError(format!(
            "--timeout-s must be positive, got {}",
            args.timeout_s
        )));
    }
    if args.max_batch == Some(0) {
        return Err(UserError("--max-batch must be at least 1".into()));
    }
    Ok(RemoteConfig {
        timeout_s: args.timeout_s,
        max_batch: args.max_batch,
    })
}

fn model_config(args: &ModelArgs, seed: u64) -> Res<ModelConfig> {
    let mut spec = TrainSpec::new(parse::<ModelKind>(&args.kind)?).with_seed(seed);
    if let Some(a) = args.alpha {
        spec.alpha = a;
    }
    if let Some(e) = args.epochs {
        spec.linear.epochs = e;
        spec.attention.epochs = e;
    }
    if let Some(lr) = args.lr {
        spec.linear.lr = lr;
        spec.attention.lr = lr;
    }
    if let Some(l2) = args.l2 {
        spec.linear.l2 = l2;
    }
    if let Some(loss) = args.loss {
        spec.linear.loss = match loss {
            LossArg::Hinge => LossKind::Hinge,
            LossArg::Logistic => LossKind::Logistic,
        };
    }
    if let Some(d) = args.dim {
        spec.attention.dim = d;
    }
    if let Some(m) = args.max_len {
        spec.attention.max_len = m;
    }
    if let Some(m) = args.min_df {
        spec.linear.min_df = m;
        spec.attention.min_df = m;
    }
    let l2_grid = match (&args.l2_grid, args.l2, spec.kind) {
        (_, _, kind) if kind != ModelKind::LinearTfidf => Vec::new(),
        (Some(grid), _, _) => grid.clone(),
        (None, Some(_), _) => Vec::new(),
        (None, None, _) => DEFAULT_L2_GRID.to_vec(),
    };
    Ok(ModelConfig { spec, l2_grid })
}

fn dedupe_seeds(seeds: &[u64], warnings: &mut Vec<String>) -> Res<Vec<u64>> {
    if seeds.is_empty() {
        return Err(UserError("--seeds must name at least one seed".into()));
    }
    let mut out = Vec::new();
    for &s in seeds {
        if out.contains(&s) {
            warnings.push(format!("seed {s} listed more than once; running it once"));
        } else {
            out.push(s);
        }
    }
    Ok(out)
}

fn source(model: Option<PathBuf>, endpoint: Option<String>, env: &Env) -> Res<PredictorSource> {
    match (model, endpoint) {
        (Some(_), Some(_)) => Err(UserError(
            "--model and --endpoint are mutually exclusive".into(),
        )),
        (Some(m), None) => Ok(PredictorSource::Model(m)),
        (None, Some(e)) => Ok(PredictorSource::Endpoint(e)),
        (None, None) => env
            .endpoint
            .clone()
            .map(PredictorSource::Endpoint)
            .ok_or_else(|| {
                UserError(format!(
                    "no predictor: pass --model or --endpoint, or set {ENDPOINT_ENV}"
                ))
            }),
    }
}

fn features_per_split(value: &str) -> Res<FeaturesPerSplit> {
    match value {
        "sqrt" => Ok(FeaturesPerSplit::Sqrt),
        "all" => Ok(FeaturesPerSplit::All),
        n => match n.parse::<usize>() {
            Ok(n) if n > 0 => Ok(FeaturesPerSplit::Count(n)),
            _ => Err(UserError(format!(
                "--features must be sqrt, all or a positive count, got `{n}`"
            ))),
        },
    }
}

/// Resolves parsed flags against the environment. `Serve` and `Rerun` are
/// not run configs and yield `None`.
pub fn resolve(command: CommandArgs, env: &Env) -> Res<Option<Resolved>> {
    let mut warnings = Vec::new();
    let config = match command {
        CommandArgs::Train(a) => {
            let corpus = corpus_spec(
                &a.corpus.corpus,
                a.corpus.root,
                a.corpus.tier.as_deref(),
                a.corpus.split_seed,
            )?;
            let model = model_config(&a.model, a.seed)?;
            if a.mask_token.as_deref() == Some("") {
                return Err(UserError("--mask-token must be non-empty".into()));
            }
            let name = a
                .name
                .unwrap_or_else(|| format!("{}-{}", model.spec.kind.as_str(), corpus.kind));
            RunConfig::Train(TrainConfig {
                corpus,
                model,
                name,
                mask_token: a.mask_token,
            })
        }
        CommandArgs::Eval(a) => {
            let seeds = dedupe_seeds(&a.seeds, &mut warnings)?;
            RunConfig::Eval(EvalConfig {
                corpus: corpus_spec(
                    &a.corpus.corpus,
                    a.corpus.root,
                    a.corpus.tier.as_deref(),
                    a.corpus.split_seed,
                )?,
                model: model_config(&a.model, seeds[0])?,
                seeds,
            })
        }
        CommandArgs::Explain(a) => {
            let input = match (a.corpus, a.root) {
                (Some(kind), Some(root)) => ExplainInput::Corpus {
                    corpus: corpus_spec(&kind, root, a.tier.as_deref(), a.split_seed)?,
                    split: parse(&a.split)?,
                    limit: a.limit,
                },
                _ if a.text.is_empty() => {
                    return Err(UserError(
                        "explain needs --text or --corpus with --root".into(),
                    ))
                }
                _ => ExplainInput::Texts(a.text),
            };
            RunConfig::Explain(ExplainConfig {
                source: source(a.source.model, a.source.endpoint, env)?,
                input,
                k: a.k.max(1),
                show_deteriorating: a.show_deteriorating,
                color: !(a.no_color || env.no_color),
                remote: remote(&a.remote)?,
            })
        }
        CommandArgs::Compare(a) => {
            let mut sources: Vec<PredictorSource> =
                a.models.into_iter().map(PredictorSource::Model).collect();
            let n_endpoints = a.endpoints.len();
            sources.extend(a.endpoints.into_iter().map(PredictorSource::Endpoint));
            if n_endpoints == 0 && sources.len() < 2 {
                if let Some(e) = &env.endpoint {
                    sources.push(PredictorSource::Endpoint(e.clone()));
                }
            }
            if sources.len() < 2 {
                return Err(UserError(format!(
                    "compare needs at least 2 predictors (--model/--endpoint), got {}",
                    sources.len()
                )));
            }
            RunConfig::Compare(CompareConfig {
                sources,
                text: a.text,
                k: a.k.max(1),
                remote: remote(&a.remote)?,
            })
        }
        CommandArgs::Stack(a) => {
            let base = match (a.base_model, a.endpoint.or_else(|| env.endpoint.clone())) {
                (Some(m), _) => StackBase::Source(PredictorSource::Model(m)),
                (None, Some(e)) => StackBase::Source(PredictorSource::Endpoint(e)),
                (None, None) => StackBase::Train(model_config(
                    &ModelArgs {
                        kind: a.base_kind,
                        alpha: None,
                        epochs: None,
                        lr: None,
                        l2: None,
                        l2_grid: None,
                        loss: None,
                        dim: None,
                        max_len: None,
                        min_df: None,
                    },
                    a.seed,
                )?),
            };
            if a.trees == 0 {
                return Err(UserError("--trees must be at least 1".into()));
            }
            if a.min_leaf == 0 {
                return Err(UserError("--min-leaf must be at least 1".into()));
            }
            RunConfig::Stack(StackConfig {
                corpus: corpus_spec(
                    &a.corpus.corpus,
                    a.corpus.root,
                    a.corpus.tier.as_deref(),
                    a.corpus.split_seed,
                )?,
                base,
                stacking: StackingConfig {
                    forest: ForestConfig {
                        n_trees: a.trees,
                        max_depth: a.max_depth,
                        min_samples_leaf: a.min_leaf,
                        features_per_split: features_per_split(&a.features)?,
                        bootstrap: !a.no_bootstrap,
                        seed: a.seed,
                    },
                    encoder_alpha: a.encoder_alpha,
                    encoder_folds: a.folds,
                },
                remote: remote(&a.remote)?,
            })
        }
        CommandArgs::Probe(a) => {
            let endpoint = a
                .endpoint
                .or_else(|| env.endpoint.clone())
                .ok_or_else(|| UserError(format!("probe needs --endpoint or {ENDPOINT_ENV}")))?;
            RunConfig::Probe(ProbeConfig {
                endpoint,
                texts: a.text,
                remote: remote(&a.remote)?,
            })
        }
        CommandArgs::Synth(a) => RunConfig::Synth(match a.kind {
            SynthKind::Topics => {
                if a.classes < 2 {
                    return Err(UserError("--classes must be at least 2".into()));
                }
                SynthConfig::Topics {
                    docs: a.docs.unwrap_or(500),
                    classes: a.classes,
                    seed: a.seed,
                }
            }
            SynthKind::NoisyRaters => {
                if a.users == 0 || a.products == 0 {
                    return Err(UserError(
                        "--users and --products must be at least 1".into(),
                    ));
                }
                SynthConfig::NoisyRaters {
                    docs: a.docs.unwrap_or(4000),
                    users: a.users,
                    products: a.products,
                    neutralize: a.neutralize,
                    seed: a.seed,
                }
            }
        }),
        CommandArgs::Serve(_) | CommandArgs::Rerun(_) => return Ok(None),
    };
    Ok(Some(Resolved { config, warnings }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn resolve_argv(argv: &[&str], env: &Env) -> Res<Resolved> {
        let cli =
            Cli::try_parse_from(std::iter::once("maskprobe").chain(argv.iter().copied())).unwrap();
        resolve(cli.command, env).map(|r| r.expect("run command"))
    }

    #[test]
    fn documented_defaults() {
        let r = resolve_argv(
            &["explain", "--model", "m.model", "--text", "hi"],
            &Env::default(),
        )
        .unwrap();
        let RunConfig::Explain(c) = r.config else {
            panic!()
        };
        assert_eq!(c.k, 3);
        assert!(c.color);
        let r = resolve_argv(
            &["train", "--corpus", "bbc-news", "--root", "d"],
            &Env::default(),
        )
        .unwrap();
        let RunConfig::Train(c) = r.config else {
            panic!()
        };
        assert_eq!(c.model.spec.linear.seed, 0);
        assert_eq!(c.model.l2_grid, DEFAULT_L2_GRID.to_vec());
        assert_eq!(c.corpus.tier, AgreementTier::P50);
    }

    #[test]
    fn flag_endpoint_beats_env() {
        let env = Env {
            endpoint: Some("http://env".into()),
            no_color: false,
        };
        let r = resolve_argv(
            &["explain", "--endpoint", "http://flag", "--text", "x"],
            &env,
        )
        .unwrap();
        let RunConfig::Explain(c) = r.config else {
            panic!()
        };
        assert_eq!(c.source, PredictorSource::Endpoint("http://flag".into()));
        let r = resolve_argv(&["explain", "--model", "a.model", "--text", "x"], &env).unwrap();
        let RunConfig::Explain(c) = r.config else {
            panic!()
        };
        assert_eq!(c.source, PredictorSource::Model("a.model".into()));
        let r = resolve_argv(&["explain", "--text", "x"], &env).unwrap();
        let RunConfig::Explain(c) = r.config else {
            panic!()
        };
        assert_eq!(c.source, PredictorSource::Endpoint("http://env".into()));
    }

    #[test]
    fn duplicate_seeds_warn() {
        let r = resolve_argv(
            &[
                "eval", "--corpus", "bbc-news", "--root", "d", "--seeds", "0,0,2",
            ],
            &Env::default(),
        )
        .unwrap();
        let RunConfig::Eval(c) = r.config else {
            panic!()
        };
        assert_eq!(c.seeds, vec![0, 2]);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn user_errors() {
        let env = Env::default();
        assert!(resolve_argv(&["explain", "--text", "x"], &env).is_err());
        assert!(resolve_argv(&["compare", "--model", "a", "--text", "x"], &env).is_err());
        assert!(resolve_argv(&["train", "--corpus", "bbc", "--root", "d"], &env).is_err());
        assert!(resolve_argv(
            &["train", "--corpus", "yelp", "--root", "d", "--tier", "75"],
            &env
        )
        .is_err());
        assert!(resolve_argv(
            &[
                "stack",
                "--corpus",
                "yelp",
                "--root",
                "d",
                "--features",
                "0"
            ],
            &env
        )
        .is_err());
    }

    #[test]
    fn contradictory_flags_are_rejected_by_the_parser() {
        let err = Cli::try_parse_from([
            "maskprobe",
            "explain",
            "--model",
            "a",
            "--endpoint",
            "b",
            "--text",
            "x",
        ])
        .unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::ArgumentConflict);
        let err = Cli::try_parse_from([
            "maskprobe",
            "train",
            "--corpus",
            "yelp",
            "--root",
            "d",
            "--l2",
            "1e-4",
            "--l2-grid",
            "1e-5",
        ])
        .unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::ArgumentConflict);
    }

    #[test]
    fn config_round_trips_through_json() {
        let r = resolve_argv(
            &[
                "stack",
                "--corpus",
                "yelp",
                "--root",
                "d",
                "--min-leaf",
                "30",
                "--features",
                "all",
            ],
            &Env::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&r.config).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), r.config);
    }
}
