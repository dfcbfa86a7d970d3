use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "idma-wb",
    version,
    about = "IDMA rate analysis, code design and link simulation workbench"
)]
pub struct Cli {
    /// TOML system configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed overriding the configuration's `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, env = "IDMA_WB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-user rates along an MSE path, sum capacity and region check.
    Rates(RatesArgs),
    /// Solve for a path that achieves a target rate tuple.
    Path(PathArgs),
    /// Design LDPC degree profiles matched to a path.
    Optimize(OptimizeArgs),
    /// Gaussian-approximation density evolution of a profile set.
    Evolve(EvolveArgs),
    /// Monte-Carlo BER simulation.
    Simulate(SimulateArgs),
    /// Target rates to path, profiles, DE threshold and optional BER.
    Pipeline(PipelineArgs),
    /// Summarise the manifests found under a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PathInput {
    /// JSON list of breakpoints, e.g. [[1,1,1],[0,0,0]]; defaults to the straight line.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// SIC decoding order as 1-based users, first decoded first; overrides --path.
    #[arg(long)]
    pub sic: Option<String>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub path: PathInput,
    /// Also integrate the Gaussian and QPSK rates numerically.
    #[arg(long)]
    pub numeric: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    /// Target rates in bpcu, comma separated.
    #[arg(long)]
    pub target: String,
    /// Users zeroed one per segment, 1-based; default is descending power.
    #[arg(long)]
    pub order: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct DesignArgs {
    /// Variable degree set, e.g. 2:1:30,35:5:50.
    #[arg(long)]
    pub degrees: Option<String>,
    /// Check degree per user, comma separated; default tries 3, 4 and 5 for each user.
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub max_trials: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub path: PathInput,
    #[command(flatten)]
    pub design: DesignArgs,
    /// Users to design, 1-based; default all.
    #[arg(long)]
    pub users: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Profiles JSON as written by `optimize`.
    #[arg(long)]
    pub profiles: PathBuf,
    /// SNR_sum points in dB.
    #[arg(long, default_value = "0,0.5,1")]
    pub snr_db: String,
    /// Also bisect for the DE threshold inside this dB bracket, e.g. -3,3.
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub max_outer: usize,
}

#[derive(Debug, Args, Clone)]
pub struct SimArgs {
    /// Code length in coded bits.
    #[arg(long, default_value_t = 32_768)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 100)]
    pub blocks: usize,
    /// Stop a point after this many bit errors; 0 runs all blocks.
    #[arg(long, default_value_t = 100)]
    pub target_errors: u64,
    #[arg(long, default_value_t = 1)]
    pub bp_iters: usize,
    /// Frame-averaged variances in the ESE.
    #[arg(long)]
    pub frame_averaged: bool,
    /// Write the average v trajectory per SNR point.
    #[arg(long)]
    pub trajectory: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, default_value = "1")]
    pub snr_db: String,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Capture VND LLR histograms for this 1-based user.
    #[arg(long)]
    pub hist_user: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub hist_iterations: usize,
    #[arg(long, default_value_t = 160)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub design: DesignArgs,
    /// Print the plan without running it.
    #[arg(long)]
    pub dry_run: bool,
    /// SNR_sum points for an optional BER simulation.
    #[arg(long)]
    pub simulate_db: Option<String>,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for run manifests.
    pub dir: PathBuf,
}
