//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use raylign::datagen::CropKind;

use crate::config::Method;

#[derive(Debug, Parser)]
#[command(
    name = "raylign",
    version,
    about = "Rigid point-cloud registration with random-line intersections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register a source cloud onto a target cloud.
    Register(RegisterArgs),
    /// Generate a benchmark of cropped, moved pairs with ground truth.
    Genbench(GenbenchArgs),
    /// Run methods over every pair of a benchmark and summarize.
    Bench(BenchArgs),
    /// Compare analytic and finite-difference gradients on random states.
    Gradcheck(GradcheckArgs),
    /// Dump sampled chords and their intersection points for plotting.
    LinesDebug(LinesDebugArgs),
}

/// Solver settings that can be overridden from the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lines: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Intersection cylinder radius; derived from the target when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground truth: a 4×4 transform file, or a benchmark manifest.json with --pair.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Pair id inside the manifest given to --gt.
    #[arg(long)]
    pub pair: Option<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct GenbenchArgs {
    /// Base cloud file (XYZ or PLY).
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub base: Option<PathBuf>,
    /// Use the built-in synthetic shape as the base.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 1024)]
    pub base_points: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 45.0)]
    pub rotation_max_deg: f64,
    #[arg(long, default_value_t = 0.2)]
    pub translation_range: f64,
    #[arg(long, value_enum, default_value_t = CropArg::HalfSpace)]
    pub crop: CropArg,
    #[arg(long, default_value_t = 0.7)]
    pub overlap: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    /// Points per generated cloud.
    #[arg(long, default_value_t = 1024)]
    pub points: usize,
    /// Seed of the first pair; pair `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CropArg {
    None,
    HalfSpace,
    Cone,
}

impl From<CropArg> for CropKind {
    fn from(c: CropArg) -> Self {
        match c {
            CropArg::None => CropKind::None,
            CropArg::HalfSpace => CropKind::HalfSpace,
            CropArg::Cone => CropKind::Cone,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub bench_dir: PathBuf,
    /// Comma-separated methods.
    #[arg(long, default_value = "line-loss,cd,cd-w,icp,svd-surrogate")]
    pub methods: String,
    /// Comma-separated ν₀ values to sweep; the config value when omitted.
    #[arg(long = "nu0-sweep", value_delimiter = ',')]
    pub nu0_sweep: Vec<f64>,
    /// Comma-separated recall thresholds.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Pairs solved concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory; defaults to the benchmark directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Source cloud; a synthetic pair is generated when omitted.
    #[arg(long, requires = "target")]
    pub source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    pub target: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub states: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 2000)]
    pub lines: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fail when any relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct LinesDebugArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Transform applied to the source first.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}
