use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use regsens_core::idset::MagnitudeBound;
use regsens_core::moments::{Denominator, R2Rule};

#[derive(Debug, Parser)]
#[command(
    name = "regsens",
    version,
    about = "Sensitivity of regression coefficients to omitted variables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain-away and sign-change breakdown points per R²_long rule and magnitude bound.
    Breakdown(BreakdownArgs),
    /// Identified sets at fixed δ, plus the (b, δ) curve.
    Idset(IdsetArgs),
    /// Identified sets over |δ| ≤ δ̄ and their convex hulls.
    Bounds(BoundsArgs),
    /// Bias-adjustment panel: baseline, δ = 1 adjustment, sets at each δ and δ̄.
    Adjust(AdjustArgs),
    /// Run the randomized property suites.
    OracleCheck(OracleArgs),
    /// Write a Gaussian sample from a model to CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long, required_unless_present = "moments")]
    pub data: Option<PathBuf>,
    /// Covariance of (Y, X, W1...) as JSON, instead of --data.
    #[arg(long, conflicts_with = "data")]
    pub moments: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub outcome: String,
    #[arg(long, default_value = "x")]
    pub treatment: String,
    /// Baseline controls, partialled out before anything else.
    #[arg(long, value_delimiter = ',')]
    pub w0: Vec<String>,
    /// Calibration controls.
    #[arg(long, value_delimiter = ',')]
    pub w1: Vec<String>,
    #[arg(long, default_value = "n-1")]
    pub cov_denominator: Denominator,
    /// R²_long rules: a number, "one", or a multiple of R²_med such as 1.3x.
    #[arg(long, value_delimiter = ',', default_value = "1.3x")]
    pub r2long: Vec<R2Rule>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Directory for report.txt, report.json and any data files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BreakdownArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Magnitude bounds on |b - beta_med|: inf, 2x, abs:0.5 or a number.
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    pub m: Vec<MagnitudeBound>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct IdsetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1",
        allow_hyphen_values = true
    )]
    pub delta: Vec<f64>,
    /// Curve range as lo,hi (default: around beta_med).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2001)]
    pub curve_points: usize,
    /// Also write the curve as SVG (needs --out).
    #[arg(long, requires = "out")]
    pub svg: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub delta_bar: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    pub m: Vec<MagnitudeBound>,
    /// Largest δ̄ in the sweep CSV (default: twice the largest --delta-bar, at least 3).
    #[arg(long)]
    pub sweep_max: Option<f64>,
    #[arg(long, default_value_t = 121)]
    pub sweep_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AdjustArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.99,1,1.01",
        allow_hyphen_values = true
    )]
    pub delta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub delta_bar: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub instances: usize,
    /// Perturb the cubic's leading coefficient before solving.
    #[arg(long, hide = true)]
    pub inject_c3_fault: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Draw a random model with this many calibration controls instead of the
    /// built-in demonstration model.
    #[arg(long)]
    pub random_dim_w1: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full model, including the unobserved control, as JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}
