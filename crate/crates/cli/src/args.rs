use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aqua", about = "Exact optimal experimental designs by quadratic approximation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal approximate design.
    Approx(SolveArgs),
    /// Exact design from the surrogate built at an anchor.
    Exact {
        #[command(flatten)]
        solve: SolveArgs,
        /// Anchor as a matrix file or design document; computed when absent.
        #[arg(long)]
        anchor: Option<PathBuf>,
    },
    /// Exact design with the anchor updated from each iterate.
    Iter {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long, default_value_t = 1500)]
        subsample: usize,
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        /// Solve only the continuous surrogate until the anchor settles.
        #[arg(long)]
        relax: bool,
    },
    /// Efficient rounding of an approximate design.
    Round {
        #[arg(long)]
        design: PathBuf,
        #[arg(long = "N")]
        size: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the conic surrogate problem as JSON.
    Export {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        anchor: Option<PathBuf>,
    },
    /// Criterion value, efficiency and equivalence gap of a design.
    Eval {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        anchor: Option<PathBuf>,
    },
    /// Writes a benchmark model and constraint file into a directory.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    D,
    A,
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Version {
    Pos,
    Neg,
    Blend,
    Logdet,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, value_enum, ignore_case = true, default_value = "D")]
    pub criterion: Family,
    /// Kiefer parameter; overrides the family's default.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "pos")]
    pub version: Version,
    /// Prediction region for I-optimality as a model CSV; defaults to the design points.
    #[arg(long)]
    pub region: Option<PathBuf>,
    /// Adds the row `1ᵀξ = N`.
    #[arg(long = "N")]
    pub size: Option<u64>,
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub node_cap: Option<usize>,
    /// Wall-clock cap in seconds.
    #[arg(long)]
    pub time_cap: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of the selected points.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    SpringBalance,
    Scheffe,
    SyntheticTall,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(value_enum)]
    pub name: ScenarioName,
    /// Items for spring balance, regressors for synthetic tall.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub strata: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "N")]
    pub size: Option<u64>,
    /// Output directory for `model.csv` and `constraints.json`.
    #[arg(long)]
    pub out: PathBuf,
}
