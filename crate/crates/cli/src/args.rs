//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "scenverify",
    version,
    about = "Scenario-based verification of uncertain parametric Markov models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check one instantiation, or sweep one parameter over a grid.
    Check(CheckArgs),
    /// Sample K instantiations and bound the satisfaction probability.
    Estimate(EstimateArgs),
    /// Synthesize cost parameters that keep the worst sampled expected cost low.
    Costsyn(CostsynArgs),
    /// Write a UAV gridworld model.
    GenUav(GenUavArgs),
    /// Average confidence over repeated runs for several sample sizes.
    Bench(BenchArgs),
    /// Run the built-in example checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecKindArg {
    Reach,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Reduced,
    Monolithic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Uniform,
    BiasY,
    BiasNegX,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file, or `builtin:NAME` for a bundled model.
    #[arg(value_name = "MODEL", required_unless_present = "model")]
    pub model_pos: Option<String>,
    /// Same as the positional MODEL.
    #[arg(long, conflicts_with = "model_pos")]
    pub model: Option<String>,
}

impl ModelArgs {
    pub fn source(&self) -> &str {
        self.model
            .as_deref()
            .or(self.model_pos.as_deref())
            .expect("clap enforces a model")
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Property kind; defaults to `cost` when --kappa is given.
    #[arg(long = "spec", value_enum)]
    pub kind: Option<SpecKindArg>,
    /// Probability threshold of a reachability property.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Expected-cost threshold.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Bound direction: `le` for P≤λ / E≤κ, `ge` for P≥λ / E≥κ.
    #[arg(long, value_enum)]
    pub direction: Option<DirectionArg>,
    /// Policy quantifier on MDPs; defaults to min for `le` and max for `ge`.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
}

#[derive(Debug, Args)]
pub struct ThreadArgs {
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "SCENVERIFY_THREADS")]
    pub threads: Option<usize>,
    /// No progress messages on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Parameter value as NAME=VALUE; `--NAME VALUE` is accepted too.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Sweep this parameter over [0, 1] and print a CSV curve.
    #[arg(long, value_name = "PARAM")]
    pub sweep: Option<String>,
    /// Grid points of the sweep.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Include the optimal policy.
    #[arg(long)]
    pub show_policy: bool,
    /// Format of the result.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Number of samples.
    #[arg(long = "K", short = 'K', default_value_t = 1000)]
    pub k: usize,
    /// Seed of the sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report the confidence for this tolerance ν.
    #[arg(long, conflicts_with = "alpha")]
    pub nu: Option<f64>,
    /// Report the smallest tolerance ν with confidence 1 − α (default 1e-6).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Tolerance for the negated property when --nu is given.
    #[arg(long, requires = "nu")]
    pub nu_unsat: Option<f64>,
    /// Value of a cost parameter as NAME=VALUE.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the summary on stdout.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Write one CSV row per sample here.
    #[arg(long)]
    pub verdicts_csv: Option<PathBuf>,
    /// Write the drawn samples as JSON here.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    /// Record wall time in the report, which makes it nondeterministic.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct CostsynArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Number of samples.
    #[arg(long = "K", short = 'K', default_value_t = 100)]
    pub k: usize,
    /// Seed of the sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence level of the certificate.
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Lower end of the box for every cost parameter.
    #[arg(long, default_value_t = 0.0)]
    pub w_min: f64,
    /// Upper end of the box for every cost parameter.
    #[arg(long, default_value_t = scenverify::costsyn::DEFAULT_W_MAX)]
    pub w_max: f64,
    /// Require the cost parameters to sum to at least this.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Program formulation; `auto` picks the reduced one unless samples are few.
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the result.
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    #[command(flatten)]
    pub threads: ThreadArgs,
}

#[derive(Debug, Args)]
pub struct GenUavArgs {
    /// Grid cells along x.
    #[arg(long, default_value_t = 6)]
    pub nx: usize,
    /// Grid cells along y.
    #[arg(long, default_value_t = 6)]
    pub ny: usize,
    /// Altitude levels.
    #[arg(long, default_value_t = 2)]
    pub nz: usize,
    /// Weather conditions.
    #[arg(long, default_value_t = 2)]
    pub weathers: usize,
    /// Wind zones along x; defaults to min(nx, 2).
    #[arg(long)]
    pub zones_x: Option<usize>,
    /// Wind zones along y; defaults to min(ny, 2).
    #[arg(long)]
    pub zones_y: Option<usize>,
    /// Wind pattern of the weather conditions.
    #[arg(long, value_enum, default_value = "uniform")]
    pub preset: PresetArg,
    /// Crashes cost 100 and restart; moves cost 1 + wx or 1 + wy.
    #[arg(long)]
    pub cost: bool,
    /// Step budget; defaults to the start-to-target distance plus 3.
    #[arg(long, conflicts_with_all = ["cost", "unbounded"])]
    pub horizon: Option<usize>,
    /// No step budget (implied by --cost).
    #[arg(long)]
    pub unbounded: bool,
    /// Write the model here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Bundled models to run, comma separated; all of them by default.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Repetitions per sample size.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 1000, 10000])]
    pub ks: Vec<usize>,
    /// Samples of the reference run that fixes the tolerances.
    #[arg(long, default_value_t = 10_000)]
    pub k_ref: usize,
    /// Slack between the reference satisfaction rate and the claimed bounds.
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Seed of the reference run; repetitions use the following seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub threads: ThreadArgs,
}
