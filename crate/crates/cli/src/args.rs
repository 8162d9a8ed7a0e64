use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "maskprobe",
    version,
    about = "Occlusion attribution, baselines and stacking for text classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Train a built-in model on a corpus's training split.
    Train(TrainArgs),
    /// Train and test a built-in model once per seed and average the metrics.
    Eval(EvalArgs),
    /// Occlusion heatmaps for texts or a corpus split.
    Explain(ExplainArgs),
    /// Top-k words of one text under two or more predictors.
    Compare(CompareArgs),
    /// Stack a base predictor with user/product attributes in a random forest.
    Stack(StackArgs),
    /// Run the conformance probes against a served model.
    Probe(ProbeArgs),
    /// Serve a saved model over the HTTP/JSON protocol.
    Serve(ServeArgs),
    /// Write a synthetic corpus in one of the on-disk layouts.
    Synth(SynthArgs),
    /// Re-execute a run from its manifest and verify the outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory receiving every artifact of the run.
    #[arg(long, default_value = "maskprobe-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// bbc-news, bbc-sport, phrasebank, yelp or semeval.
    #[arg(long)]
    pub corpus: String,
    /// Corpus location in its distributed layout.
    #[arg(long)]
    pub root: PathBuf,
    /// Phrasebank agreement tier: all, 75, 66 or 50.
    #[arg(long)]
    pub tier: Option<String>,
    /// Seed of the stratified split for corpora without fixed splits.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Hinge,
    Logistic,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// naive-bayes, linear-tfidf or tiny-attention.
    #[arg(long = "model", default_value = "linear-tfidf")]
    pub kind: String,
    /// Naive Bayes smoothing.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Fixed L2 strength for the linear model; disables the grid search.
    #[arg(long, conflicts_with = "l2_grid")]
    pub l2: Option<f64>,
    /// L2 values searched on the validation split (linear model).
    #[arg(long, value_delimiter = ',')]
    pub l2_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// Embedding width of the attention model.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Attention model input truncation, in tokens.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub min_df: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RemoteArgs {
    /// Per-request timeout for remote endpoints, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout_s: f64,
    /// Caps the batch size below the server's advertised limit.
    #[arg(long)]
    pub max_batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Name stored in the model file; defaults to `<model>-<corpus>`.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub mask_token: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
#[group(id = "source", multiple = false)]
pub struct SourceArgs {
    /// Saved model file.
    #[arg(long = "model", group = "source")]
    pub model: Option<PathBuf>,
    /// Served model URL; falls back to MASKPROBE_ENDPOINT.
    #[arg(long, group = "source")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Text to explain; repeat for several.
    #[arg(long, conflicts_with = "corpus")]
    pub text: Vec<String>,
    #[arg(long, requires = "root")]
    pub corpus: Option<String>,
    #[arg(long, requires = "corpus")]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub tier: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Explain at most this many documents of the split.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Also colour words whose masking raised the confidence.
    #[arg(long)]
    pub show_deteriorating: bool,
    /// Plain bracketed output instead of ANSI colour (also NO_COLOR).
    #[arg(long)]
    pub no_color: bool,
    #[command(flatten)]
    pub remote: RemoteArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Saved model file; repeatable. Columns list models before endpoints.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Served model URL; repeatable. MASKPROBE_ENDPOINT is used when absent.
    #[arg(long = "endpoint")]
    pub endpoints: Vec<String>,
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    pub remote: RemoteArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Saved base model; otherwise one is trained on the training split.
    #[arg(long = "base-model", conflicts_with = "endpoint")]
    pub base_model: Option<PathBuf>,
    /// Served base model URL; falls back to MASKPROBE_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Kind of base model trained when none is given.
    #[arg(long = "base-kind", default_value = "naive-bayes")]
    pub base_kind: String,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// Features tried per split: sqrt, all or a count.
    #[arg(long, default_value = "sqrt")]
    pub features: String,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = maskprobe::stacking::DEFAULT_ENCODER_ALPHA)]
    pub encoder_alpha: f64,
    #[arg(long, default_value_t = maskprobe::stacking::DEFAULT_ENCODER_FOLDS)]
    pub folds: usize,
    #[command(flatten)]
    pub remote: RemoteArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Served model URL; falls back to MASKPROBE_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Extra probe text; repeatable.
    #[arg(long)]
    pub text: Vec<String>,
    #[command(flatten)]
    pub remote: RemoteArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long = "model")]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    #[arg(long, default_value_t = 64)]
    pub max_batch: usize,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Keyword topics in the per-class directory layout.
    Topics,
    /// Biased-rater reviews in the review file layout.
    NoisyRaters,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub docs: Option<usize>,
    /// Topic classes.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 40)]
    pub users: usize,
    #[arg(long, default_value_t = 30)]
    pub products: usize,
    /// Give every review the same user and product.
    #[arg(long)]
    pub neutralize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// A manifest.json written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}
