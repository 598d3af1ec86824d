use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "laac", version, about = "Offline actor-critic recommenders regularised by an LLM reference policy")]
pub struct Cli {
    /// Run data-parallel work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a MovieLens corpus into a transitions file and a catalog.
    Ingest(IngestArgs),
    /// Generate a synthetic MDP, its logged data and its reference cache.
    Synth(SynthArgs),
    /// Query a provider for every training state and write the cache.
    BuildCache(BuildCacheArgs),
    /// Train LAAC or the supervised baseline.
    Train(TrainArgs),
    /// Score checkpoints on the evaluation split.
    Eval(EvalArgs),
    /// Train and score one model per (value, seed).
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long)]
    pub movies: PathBuf,
    #[arg(long)]
    pub users: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub min_item_interactions: usize,
    #[arg(long, default_value_t = 3)]
    pub min_user_interactions: usize,
    /// Keep a seeded random subset of this many users.
    #[arg(long)]
    pub user_sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep training transitions only for users of this gender (needs --users).
    #[arg(long)]
    pub keep_gender: Option<char>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `synthetic.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Live,
    Cache,
    Stub,
}

#[derive(Debug, Args)]
pub struct BuildCacheArgs {
    #[arg(long)]
    pub transitions: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, value_enum)]
    pub provider: ProviderKind,
    /// Cache file to write or resume.
    #[arg(long)]
    pub cache: PathBuf,
    /// Earlier cache to replay from (provider `cache`).
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n_c: usize,
    #[arg(long, default_value_t = 10)]
    pub n_r: usize,
    /// Candidate sampling seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub requests_per_second: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Laac,
    Baseline,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub transitions: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Ground-truth MDP (from `laac synth`) used to score rewards.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "laac")]
    pub variant: VariantArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One or more checkpoints; several produce a comparison table.
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Alpha,
    Beta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values, e.g. `0,1,3,5,10`.
    #[arg(long)]
    pub values: String,
    /// Comma-separated seeds or an inclusive range such as `1..10`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
