use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sectoral productivity equilibrium: discrete solutions, the continuous
/// exponential law, information-principle checks and tail fits.
///
/// Productivities and demand share one unit (output per worker, and output).
/// Reports default to JSON and tables to CSV. Without --output, results go to
/// standard output, or to <AYM_OUTPUT_DIR>/<subcommand>.<ext> when that
/// variable is set.
#[derive(Debug, Parser)]
#[command(name = "aym", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boltzmann occupations n_i = e^nu e^(-beta a_i) (report, JSON by default).
    Solve(SolveArgs),
    /// Occupations n_i = 1/(e^(-nu) e^(beta a_i) - c) for a statistics parameter c.
    Generalized(GeneralizedArgs),
    /// Density and tail of the continuous law on a grid of cuts (table, CSV by default).
    Epi(EpiArgs),
    /// Information-principle checks for the continuous law (report, JSON by default).
    Verify(VerifyArgs),
    /// Binned continuous law against the discrete ladder PMF over a sweep of r (table, CSV by default).
    Compare(CompareArgs),
    /// Metropolis sampling of integer occupation vectors (report, JSON by default).
    Sample(SampleArgs),
    /// Every feasible integer occupation vector with its exact multinomial weight (report, JSON by default).
    Enumerate(EnumerateArgs),
    /// Least-squares fit of the exponential tail to cumulative data (report, JSON by default).
    Fit(FitArgs),
    /// Data and model tails on a common grid for plotting (table, CSV by default).
    Overlay(OverlayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file. Overrides AYM_OUTPUT_DIR.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format (default depends on the subcommand).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Economy given by explicit levels, by a ladder, or by a JSON file.
#[derive(Debug, Clone, Args)]
pub struct EconomyArgs {
    /// JSON file with fields levels, n, D and optionally a0.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["levels", "sectors"])]
    pub config: Option<PathBuf>,
    /// Comma-separated productivity levels a_i, strictly increasing.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub levels: Option<Vec<f64>>,
    /// Number of sectors g for the ladder a_i = i*a0 (needs --a0 > 0).
    #[arg(long, value_name = "G", conflicts_with = "levels")]
    pub sectors: Option<usize>,
    /// Number of workers n.
    #[arg(long, allow_negative_numbers = true)]
    pub n: Option<f64>,
    /// Aggregate demand D, in output units.
    #[arg(long = "D", value_name = "D", allow_negative_numbers = true)]
    pub demand: Option<f64>,
    /// Minimal productivity a0.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a0: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Bound on both absolute constraint residuals.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GeneralizedArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Statistics parameter: 0 Boltzmann, 1 Bose-like, -1 Fermi-like.
    #[arg(long, allow_negative_numbers = true)]
    pub c: f64,
    /// Bound on both absolute constraint residuals.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LawArgs {
    /// Expected productivity D/n.
    #[arg(long, allow_negative_numbers = true)]
    pub mean_demand: f64,
    /// Minimal productivity a0.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a0: f64,
}

/// Grid of productivity cuts: an explicit list, or evenly spaced points.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Comma-separated cuts. Overrides --grid-min/--grid-max/--grid-points.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
    /// Smallest cut [default: a0].
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    /// Largest cut [default: a0 + 10 (D/n - a0) for the largest D/n].
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,
    /// Number of cuts.
    #[arg(long, default_value_t = 101)]
    pub grid_points: usize,
    /// Space the cuts logarithmically (needs a positive smallest cut).
    #[arg(long)]
    pub log_grid: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EpiArgs {
    #[command(flatten)]
    pub law: LawArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub law: LawArgs,
    /// Parameter finite-difference step, as a fraction of D/n - a0.
    #[arg(long, default_value_t = 1e-4)]
    pub fd_step_theta: f64,
    /// Displacement finite-difference step, as a fraction of D/n - a0.
    #[arg(long, default_value_t = 1e-3)]
    pub fd_step_x: f64,
    /// Relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub quadrature_tol: f64,
    /// Points in the displacement grid used for pointwise residuals.
    #[arg(long, default_value_t = 4001)]
    pub grid_points: usize,
    /// Grid length in decay lengths D/n - a0, from the support minimum.
    #[arg(long, default_value_t = 40.0)]
    pub grid_widths: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated ladder ratios r = (D/n)/a0, each > 1.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub r: Vec<f64>,
    /// Largest rung summed [default: max(1000, 40 r)].
    #[arg(long)]
    pub i_max: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Productivity unit for the integer ladder [default: a0, or 1 when a0 = 0].
    #[arg(long)]
    pub unit: Option<f64>,
    /// Total Metropolis steps per chain, burn-in included.
    #[arg(long, default_value_t = 110_000)]
    pub steps: u64,
    /// Steps discarded at the start of each chain.
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: u64,
    /// Record every k-th state after burn-in.
    #[arg(long, default_value_t = 1)]
    pub thin: u64,
    /// Seed of the ChaCha8 generator.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Independent chains on separate streams of the seed, run in parallel.
    #[arg(long, default_value_t = 1)]
    pub chains: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Productivity unit for the integer ladder [default: a0, or 1 when a0 = 0].
    #[arg(long)]
    pub unit: Option<f64>,
    /// Stop with an error beyond this many feasible vectors.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
    /// Also compare the exact argmax with the rounded continuous solution.
    #[arg(long)]
    pub stirling: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with header a,p_gt (optional third column weight).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Fix the minimal productivity; fitted over [0, smallest cut] when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub a0: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OverlayArgs {
    /// Optional CSV with header a,p_gt whose cuts join the grid.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Comma-separated D/n values, one model column each.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "100,135,170")]
    pub mean_demand: Vec<f64>,
    /// Minimal productivity a0 shared by the model columns.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a0: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
