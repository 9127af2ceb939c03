use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Meta-path similarity search on heterogeneous information networks.
#[derive(Debug, Parser)]
#[command(name = "hinsim", version, about)]
pub struct Cli {
    /// Worker threads for read-only parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic graph.
    Synth(SynthArgs),
    /// Exact PathSim rows and top-k lists.
    Exact(ExactArgs),
    /// Sample train/validation pairs and exact test rows.
    MakeDataset(MakeDatasetArgs),
    /// Train the approximator on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a checkpoint, the exact engine or a baseline on test rows.
    Eval(EvalArgs),
    /// Top-k search with a trained checkpoint.
    Search(SearchArgs),
    /// Finite-difference check of the model gradients.
    Gradcheck(GradcheckArgs),
    /// Inference wall-clock against graph size.
    Bench(BenchArgs),
    /// Collect evaluation reports into sweep tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Directory holding nodes.tsv, edges.tsv and schema.json.
    #[arg(long, conflicts_with_all = ["nodes", "edges", "schema"])]
    pub graph: Option<PathBuf>,
    #[arg(long, requires_all = ["edges", "schema"])]
    pub nodes: Option<PathBuf>,
    #[arg(long, requires_all = ["nodes", "schema"])]
    pub edges: Option<PathBuf>,
    #[arg(long, requires_all = ["nodes", "edges"])]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Schema file; without it the built-in author-paper-venue preset is used.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Total node count for the preset.
    #[arg(long, default_value_t = 300)]
    pub size: usize,
    /// Nodes per type, in schema order (with --schema).
    #[arg(long, value_delimiter = ',')]
    pub node_counts: Vec<usize>,
    /// Edges per edge type, in schema order (with --schema).
    #[arg(long, value_delimiter = ',')]
    pub edge_counts: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub metapath: String,
    /// Query node id (repeatable).
    #[arg(long)]
    pub query: Vec<String>,
    /// `all`, or a file with one node id per line.
    #[arg(long)]
    pub queries: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub include_self: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub metapath: String,
    #[arg(long, default_value_t = 400)]
    pub train: usize,
    #[arg(long, default_value_t = 100)]
    pub val: usize,
    #[arg(long, default_value_t = 400)]
    pub test: usize,
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Hidden width (default 32, or 256 with --paper-scale).
    #[arg(long)]
    pub d: Option<usize>,
    /// Path instances per node (default 3 for five-node meta-paths, else 2).
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Encoder layers.
    #[arg(long = "L", default_value_t = 2)]
    pub l: usize,
    /// topt, topt-vector (whole-vector selection), mean, max or sum.
    #[arg(long, default_value = "topt")]
    pub aggregator: String,
    #[arg(long)]
    pub no_node_type: bool,
    #[arg(long)]
    pub no_edge_type: bool,
    /// Let every slot copy compete in pooling, even identical ones.
    #[arg(long)]
    pub literal_slots: bool,
    #[arg(long)]
    pub bias: bool,
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_max: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub lr_min: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, conflicts_with_all = ["exact", "baseline"])]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, conflicts_with = "baseline")]
    pub exact: bool,
    /// `mean` (mean train label), `zero`, or `random`.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Seeds averaged by the random baseline.
    #[arg(long, default_value_t = 100)]
    pub random_seeds: u64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub include_self: bool,
    #[arg(long)]
    pub allow_schema_mismatch: bool,
    /// Clip predicted scores to [0, 1] before ranking and scoring.
    #[arg(long)]
    pub clamp: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, required = true)]
    pub query: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub include_self: bool,
    #[arg(long)]
    pub allow_schema_mismatch: bool,
    /// Clip predicted scores to [0, 1] before ranking and scoring.
    #[arg(long)]
    pub clamp: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long = "T", default_value_t = 2)]
    pub t: usize,
    #[arg(long = "L", default_value_t = 2)]
    pub l: usize,
    /// Synthetic graph size.
    #[arg(long, default_value_t = 30)]
    pub nodes: usize,
    #[arg(long, default_value = "topt")]
    pub aggregator: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    pub queries: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Name of the swept variable (e.g. T, train_fraction).
    #[arg(long)]
    pub variable: String,
    /// `VALUE=path/to/report.json`, one per sweep point.
    #[arg(long = "point", required = true)]
    pub points: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}
