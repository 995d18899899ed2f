use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Bayesian change-point detection for discrete time series.
///
/// Every flag can also be set through an environment variable named
/// `BCTSEG_<FLAG>`, e.g. `BCTSEG_DEPTH=10`.
#[derive(Debug, Parser)]
#[command(name = "bctseg", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Sample the posterior over change-point count and locations.
    Segment(SegmentArgs),
    /// Exact posterior of a single change-point location.
    Exact(ExactArgs),
    /// MAP context tree of the whole series or of each segment.
    Maptree(MapTreeArgs),
    /// Generate a piece-wise chain from a JSON spec.
    Generate(GenerateArgs),
    /// Stationary symbol marginals of MAP trees or of a given tree model.
    Stationary(StationaryArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Auto,
    Fasta,
    Plain,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Input series (FASTA, plain text or CSV).
    #[arg(long, short, env = "BCTSEG_INPUT")]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value_t = InputFormat::Auto, env = "BCTSEG_FORMAT")]
    pub format: InputFormat,

    /// `dna`, a string of single-character symbols such as `01`, or a
    /// comma-separated label list. Defaults to `dna` for FASTA and to the
    /// smallest numeric alphabet covering the data otherwise.
    #[arg(long, env = "BCTSEG_ALPHABET")]
    pub alphabet: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Maximum context depth D. The first D symbols of the input are the
    /// initial context.
    #[arg(long, short = 'D', env = "BCTSEG_DEPTH")]
    pub depth: usize,

    /// Prior parameter beta in (0, 1); defaults to 1 - 2^(1-m).
    #[arg(long, env = "BCTSEG_BETA")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,

    /// Sample the number of change-points up to this maximum.
    #[arg(
        long,
        env = "BCTSEG_LMAX",
        conflicts_with = "num_changes",
        required_unless_present = "num_changes"
    )]
    pub lmax: Option<usize>,

    /// Fix the number of change-points.
    #[arg(long, env = "BCTSEG_NUM_CHANGES")]
    pub num_changes: Option<usize>,

    #[arg(long, env = "BCTSEG_ITERS")]
    pub iters: usize,

    #[arg(long, env = "BCTSEG_BURNIN", default_value_t = 0)]
    pub burnin: usize,

    #[arg(long, env = "BCTSEG_THIN", default_value_t = 1)]
    pub thin: usize,

    #[arg(long, env = "BCTSEG_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Independent chains, seeded `seed, seed + 1, ...`, run concurrently.
    #[arg(long, env = "BCTSEG_CHAINS", default_value_t = 1)]
    pub chains: usize,

    /// Segment-evidence cache capacity (0 disables caching).
    #[arg(long, env = "BCTSEG_CACHE", default_value_t = bctseg::changepoint::DEFAULT_CACHE_CAPACITY)]
    pub cache: usize,

    #[arg(long, short, env = "BCTSEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long, value_enum, default_value_t = TableFormat::Csv, env = "BCTSEG_EMIT")]
    pub emit: TableFormat,

    #[arg(long, short, env = "BCTSEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MapTreeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,

    /// Fixed change-points, e.g. `2500,3500,4000`.
    #[arg(long, value_delimiter = ',', env = "BCTSEG_SEGMENTS")]
    pub segments: Vec<usize>,

    #[arg(long, short, env = "BCTSEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Generator spec (JSON).
    #[arg(long, env = "BCTSEG_SPEC")]
    pub spec: PathBuf,

    /// Overrides the seed in the spec.
    #[arg(long, env = "BCTSEG_SEED")]
    pub seed: Option<u64>,

    #[arg(long, short, env = "BCTSEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StationaryArgs {
    /// Input series; MAP trees are fitted per segment.
    #[arg(
        long,
        short,
        env = "BCTSEG_INPUT",
        required_unless_present = "model",
        conflicts_with = "model"
    )]
    pub input: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = InputFormat::Auto, env = "BCTSEG_FORMAT")]
    pub format: InputFormat,

    #[arg(long, env = "BCTSEG_ALPHABET")]
    pub alphabet: Option<String>,

    /// Tree model JSON with parameters, used instead of fitting.
    #[arg(long, env = "BCTSEG_MODEL")]
    pub model: Option<PathBuf>,

    #[arg(long, short = 'D', env = "BCTSEG_DEPTH", required_unless_present = "model")]
    pub depth: Option<usize>,

    #[arg(long, env = "BCTSEG_BETA")]
    pub beta: Option<f64>,

    #[arg(long, value_delimiter = ',', env = "BCTSEG_SEGMENTS")]
    pub segments: Vec<usize>,

    #[arg(long, short, env = "BCTSEG_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `manifest.json` written by an earlier run.
    pub manifest: PathBuf,

    /// Write into this directory instead of the recorded one.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment(_) => "segment",
            Command::Exact(_) => "exact",
            Command::Maptree(_) => "maptree",
            Command::Generate(_) => "generate",
            Command::Stationary(_) => "stationary",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Segment(a) => Some(&a.out),
            Command::Exact(a) => Some(&a.out),
            Command::Maptree(a) => Some(&a.out),
            Command::Generate(a) => Some(&a.out),
            Command::Stationary(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Segment(a) => a.out = dir,
            Command::Exact(a) => a.out = dir,
            Command::Maptree(a) => a.out = dir,
            Command::Generate(a) => a.out = dir,
            Command::Stationary(a) => a.out = dir,
            Command::Replay(_) => {}
        }
    }
}
