use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Hypoelliptic diffusions, natural Ornstein–Uhlenbeck processes and
/// simulated annealing on Lie groups.
///
/// Every subcommand writes CSV/JSON artifacts and a `manifest.json` into the
/// output directory. Exit codes: 1 invalid input, 2 numerical failure,
/// 3 acceptance failure.
#[derive(Debug, Parser)]
#[command(name = "lie-anneal", version)]
pub struct Cli {
    /// JSON file with parameters for the subcommand; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate path ensembles (diffusion, potential OU or annealing).
    Simulate(SimulateCmd),
    /// Build, evaluate or probe heat kernels.
    Kernel(KernelParams),
    /// Estimate or bound spectral gaps.
    Gap(GapParams),
    /// Cooling schedules and the u envelope.
    Schedule(ScheduleParams),
    /// Full annealing concentration report.
    Concentrate(ConcentrateParams),
    /// Run the acceptance suite.
    Accept(AcceptParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Kernel(_) => "kernel",
            Command::Gap(_) => "gap",
            Command::Schedule(_) => "schedule",
            Command::Concentrate(_) => "concentrate",
            Command::Accept(_) => "accept",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    Diffusion,
    Ou,
    Anneal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    /// `−log p(τ, ·)`.
    Natural,
    /// Smooth single-well benchmark.
    Benchmark,
    /// `d(x0, ·)²` benchmark.
    BenchmarkExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelAction {
    Build,
    Evaluate,
    Varadhan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    Rayleigh,
    Dm,
    Perturbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleAction {
    Make,
    UBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Smooth,
    Exact,
}

/// Schedule constants. Missing `D`, `K` or `N` are estimated from the
/// benchmark potential.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct ScheduleConstants {
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    /// Relative margin of `c` above `√(3NK)`.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Lower bound for `R`.
    #[arg(long)]
    pub r_min: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub params: SimulateParams,
    /// Continue the run recorded in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Seconds between checkpoints of a long run.
    #[arg(long, default_value_t = 60.0)]
    pub checkpoint_interval: f64,
    /// Paths simulated between checkpoint opportunities.
    #[arg(long, default_value_t = 1000)]
    pub block_size: usize,
    #[arg(long, hide = true)]
    pub halt_after_blocks: Option<usize>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct SimulateParams {
    /// Model id: torus:<d>, heisenberg-nilmanifold, heisenberg or su2.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub kind: Option<SimKind>,
    /// Start point as flat coordinates (default: identity).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Recording times, non-decreasing.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Constant noise level of the OU process.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub potential: Option<PotentialKind>,
    /// Time parameter of the natural potential.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Saved kernel grid header (JSON) for the natural potential.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Minimizer of the benchmark potential (default: identity).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub minimizer: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleConstants,
    /// Refuse runs with more than this many path steps.
    #[arg(long)]
    pub max_path_steps: Option<f64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct KernelParams {
    #[arg(long, value_enum)]
    pub action: Option<KernelAction>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Saved kernel grid header (JSON) to evaluate instead of the default.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Evaluation points, flat coordinates concatenated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Option<Vec<f64>>,
    /// Decreasing times for the Varadhan fit.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct GapParams {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<GapMethod>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Test-function dictionary: standard or trig:<n> on tori.
    #[arg(long)]
    pub dictionary: Option<String>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Time grid for the Driver–Melcher constant.
    #[arg(long, value_delimiter = ',')]
    pub dm_times: Option<Vec<f64>>,
    /// Noise level for the perturbation bound.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub minimizer: Option<Vec<f64>>,
    /// Haar probes for the `D` estimate.
    #[arg(long)]
    pub n_probe: Option<usize>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct ScheduleParams {
    #[arg(long, value_enum)]
    pub action: Option<ScheduleAction>,
    #[command(flatten)]
    #[serde(flatten)]
    pub constants: ScheduleConstants,
    /// Explicit `c` (with `R`) instead of the derived schedule.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Step in `ln(R + t)`.
    #[arg(long)]
    pub dtau: Option<f64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct ConcentrateParams {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub minimizer: Option<Vec<f64>>,
    /// Start point of the ensemble.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub n_gibbs: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Sublevel heights δ (default: spread over [0, N]).
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub proposal_scale: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub schedule: ScheduleConstants,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
pub struct AcceptParams {
    /// Criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u32>>,
}
