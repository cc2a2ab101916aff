use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(
    name = "bpvei",
    version,
    about = "Branching processes in varying environment with immigration"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Global {
    /// `preset:NAME` or a path to a model JSON file.
    #[arg(long, global = true, default_value = "preset:critical_geo_pois")]
    pub model: String,
    /// Offspring law (JSON fragment) completing the `example_a` preset.
    #[arg(long, global = true)]
    pub offspring: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Output path; results go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineArg {
    Direct,
    Decomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerArg {
    Individual,
    Aggregate,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Validate a model and print its resolved form.
    Validate,
    /// Evaluate f_{k,n} or the process p.g.f. F_n on a uniform grid.
    Pgf(PgfArgs),
    /// Exact truncated pmf of Z_n.
    Oracle(OracleArgs),
    /// Mean, variance and normalizer sequences.
    Moments(MomentsArgs),
    /// Criticality evidence over dyadic horizons.
    Criticality(CriticalityArgs),
    /// Extinction conditions and lower bounds on q.
    Extinction(ExtinctionArgs),
    /// Monte Carlo samples of Z_n.
    Simulate(SimulateArgs),
    /// Monte Carlo survival curve P[Z_n > 0].
    Survival(SurvivalArgs),
    /// Survival curves of example_b and example_c with exact references.
    Figure1(Figure1Args),
    /// Gamma limit of Z_n / a_n.
    GammaLimit(GammaLimitArgs),
    /// Re-run a manifest written by an earlier invocation.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PgfArgs {
    #[arg(long)]
    pub n: u64,
    /// Lower index of the composition f_{k,n}; -1 gives f_0 o ... o f_n.
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub k: i64,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Evaluate F_n instead of f_{k,n}.
    #[arg(long)]
    pub process: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = bpvei_core::exact::DEFAULT_CUTOFF)]
    pub cutoff: usize,
    #[arg(long, default_value_t = bpvei_core::exact::DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
    /// Double the cutoff up to this value until the tail fits.
    #[arg(long)]
    pub max_cutoff: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 100)]
    pub horizon: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CriticalityArgs {
    #[arg(long, default_value_t = 16)]
    pub min_horizon: u64,
    #[arg(long, default_value_t = 1024)]
    pub horizon: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExtinctionArgs {
    #[arg(long, default_value_t = 200)]
    pub horizon: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 2000)]
    pub reps: u64,
    #[arg(long, value_enum, default_value_t = EngineArg::Direct)]
    pub engine: EngineArg,
    #[arg(long, value_enum, default_value_t = SamplerArg::Aggregate)]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = bpvei_core::montecarlo::DEFAULT_OVERFLOW_GUARD)]
    pub overflow_guard: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Generations to record; defaults to the horizon.
    #[arg(long, value_delimiter = ',')]
    pub record: Vec<u64>,
    /// Write the raw sample at the horizon, one value per line.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SurvivalArgs {
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Figure1Args {
    #[arg(long, default_value_t = 2000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1000)]
    pub horizon: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GammaLimitArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [250u64, 500, 1000, 2000])]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5f64, 1.0, 2.0])]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
