use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "investsim", version, about = "Truthful mechanisms with a learning investor")]
pub struct Cli {
    /// Worker threads for Monte-Carlo runs (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reproduce one of the bundled scenarios and write a verdict.
    Reproduce(ReproduceArgs),
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Check weak monotonicity and XCONE for an allocation algorithm.
    CheckProperties(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Base seed; falls back to INVESTSIM_SEED, then 0.
    #[arg(long, env = "INVESTSIM_SEED")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Table1,
    Prop1,
    Theorem3,
    Prop2,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Table1 => "table1",
            Scenario::Prop1 => "prop1",
            Scenario::Theorem3 => "theorem3",
            Scenario::Prop2 => "prop2",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    pub scenario: Scenario,

    #[command(flatten)]
    pub common: Common,

    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,

    /// Number of investments (prop1).
    #[arg(long, default_value_t = 4)]
    pub arms: usize,

    /// Horizon.
    #[arg(long = "T")]
    pub horizon: Option<usize>,

    /// Monte-Carlo runs per instance.
    #[arg(long)]
    pub runs: Option<usize>,

    /// Random instances (theorem3, prop2).
    #[arg(long)]
    pub instances: Option<usize>,

    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,

    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub runs: Option<usize>,

    #[arg(long = "T")]
    pub horizon: Option<usize>,

    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Algorithm id, e.g. smart_greedy or broken_greedy.
    #[arg(long)]
    pub algo: String,

    /// JSON array of templates; random templates are drawn when absent.
    #[arg(long)]
    pub templates: Option<PathBuf>,

    #[command(flatten)]
    pub common: Common,

    /// Random templates to draw.
    #[arg(long, default_value_t = 500)]
    pub instances: usize,

    #[arg(long, default_value_t = 4)]
    pub items: usize,

    /// Grid points per bidder.
    #[arg(long, default_value_t = 4)]
    pub points: usize,
}
