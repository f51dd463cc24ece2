use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gastimate::DEFAULT_LOOKBACK;

#[derive(Debug, Parser)]
#[command(name = "gastimate", version, about = "Estimate transaction processing times from gas prices")]
pub struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads for parallel steps.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic chain.
    Synth(SynthArgs),
    /// Validate a chain file and optionally a predictions file.
    Ingest(IngestArgs),
    /// Per-category price statistics and processing-time comparisons.
    Categorize(CategorizeArgs),
    /// Fit the estimator on a time range of a chain.
    Train(TrainArgs),
    /// Sliding-window bootstrap validation.
    Validate(ValidateArgs),
    /// Rank predictors from per-transaction absolute-error files.
    Rank(RankArgs),
    /// Paired comparison of our errors against another predictor.
    Compare(CompareArgs),
    /// Retrospective cheaper-price experiment.
    Savings(SavingsArgs),
    /// Lookup table at a head block.
    Lookup(LookupArgs),
    /// Cheapest prices predicted to meet a deadline.
    Recommend(RecommendArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub blocks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds between blocks.
    #[arg(long, default_value_t = 15.0)]
    pub interval: f64,
    /// Transactions per block.
    #[arg(long, default_value_t = 10)]
    pub capacity: usize,
    /// Expected arrivals per block interval.
    #[arg(long, default_value_t = 8.0)]
    pub arrival_rate: f64,
    /// Median of the lognormal price law, in GWEI.
    #[arg(long, default_value_t = 10.0)]
    pub price_median: f64,
    #[arg(long, default_value_t = 0.8)]
    pub price_sigma: f64,
    /// Price rounding step in GWEI; 0 disables rounding.
    #[arg(long, default_value_t = 1.0)]
    pub price_tick: f64,
    #[arg(long, default_value_t = 500)]
    pub senders: usize,
    /// Ignore sender nonce order when mining.
    #[arg(long)]
    pub no_nonce_ordering: bool,
    /// Timestamp of block 0 (Unix seconds).
    #[arg(long)]
    pub start_ts: Option<i64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub chain: PathBuf,
    /// External predictions to join against the chain.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CategorizeArgs {
    pub chain: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
    pub lookback: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub chain: PathBuf,
    /// First pending timestamp included; defaults to the first block.
    #[arg(long)]
    pub from_ts: Option<i64>,
    /// Pending timestamps strictly before this are included; defaults to
    /// just after the last block.
    #[arg(long)]
    pub to_ts: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
    pub lookback: u64,
    /// Model output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub chain: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub window_days: i64,
    #[arg(long, default_value_t = 4)]
    pub train_days: i64,
    #[arg(long, default_value_t = 1)]
    pub slide_days: i64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
    pub lookback: u64,
    /// Per-transaction absolute errors of the model.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Per-transaction absolute errors of the training-median baseline.
    #[arg(long)]
    pub baseline_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Absolute-error files, one per predictor; the file stem names it.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Our per-transaction absolute-error file.
    pub ours: PathBuf,
    /// Another absolute-error file, paired by transaction hash.
    #[arg(long, conflicts_with_all = ["predictions", "chain"])]
    pub other: Option<PathBuf>,
    /// External predictions routed through the two-source ensemble.
    #[arg(long, requires = "chain")]
    pub predictions: Option<PathBuf>,
    #[arg(long, requires = "predictions")]
    pub chain: Option<PathBuf>,
    /// Source used for very cheap and cheap transactions.
    #[arg(long, default_value = "A")]
    pub cheap_source: String,
    /// Source used for every other category.
    #[arg(long, default_value = "B")]
    pub other_source: String,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    pub chain: PathBuf,
    /// Model file written by `train`.
    #[arg(long, short)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct SavingsArgs {
    #[command(flatten)]
    pub input: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Defaults to the model's lookback.
    #[arg(long)]
    pub lookback: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    #[arg(long, default_value_t = 1.0)]
    pub min: f64,
    #[arg(long, default_value_t = 60.0)]
    pub max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct LookupArgs {
    #[command(flatten)]
    pub input: ModelArgs,
    /// Head block; defaults to the last block.
    #[arg(long)]
    pub head: Option<u64>,
    #[command(flatten)]
    pub prices: PriceArgs,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub input: ModelArgs,
    #[arg(long)]
    pub deadline: f64,
    #[arg(long, default_value_t = 1)]
    pub kth: usize,
    #[arg(long)]
    pub head: Option<u64>,
    #[command(flatten)]
    pub prices: PriceArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, env = "GASTIMATE_PORT", default_value_t = gastimate_service::DEFAULT_PORT)]
    pub port: u16,
    /// Chain to load at startup.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Model to load at startup; without one a loaded chain is trained on.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
    pub lookback: u64,
}
