//! Command-line surface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "rocarc",
    version,
    about = "Arc-length ROC divergence estimation, arctangent likelihood-ratio fitting, \
             TV bounds, and approximate maximal-AUC lower bounding",
    after_help = "Exit codes: 0 success, 1 usage or i/o error, 2 numerical non-convergence."
)]
pub struct Cli {
    /// Master seed; all randomness in a run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (falls back to ROCARC_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the arctangent likelihood ratio and write the model JSON.
    Fit(FitArgs),
    /// Fit, estimate the arc-length divergence, and write a report with TV bounds.
    Divergence(DivergenceArgs),
    /// Sweep delta for N(0,1) vs N(delta,1) and emit the divergence/bounds table.
    FigureBounds(FigureBoundsArgs),
    /// Run the imbalanced-classification benchmark (two-step vs pairwise vs logistic).
    Benchmark(BenchmarkArgs),
    /// Emit empirical ROC vertices or the mixture surface grid.
    Roc(RocArgs),
}

/// Where the two samples come from: a labeled CSV or the Gaussian generator.
#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Labeled CSV file (header row; features numeric).
    #[arg(long, conflicts_with = "gen")]
    pub input: Option<PathBuf>,
    /// Label column name in the CSV.
    #[arg(long, requires = "input")]
    pub label: Option<String>,
    /// Label value mapped to the positive class (default: the larger value).
    #[arg(long, requires = "input")]
    pub pos_label: Option<String>,
    /// Synthetic generator name.
    #[arg(long, value_enum)]
    pub gen: Option<Generator>,
    /// Mean separation for the default generator pair
    /// N(+delta/2, 1) vs N(-delta/2, 1) in every coordinate.
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    /// Feature dimension for the generator.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Samples per class for the generator.
    #[arg(long)]
    pub n: Option<usize>,
    /// Positive-class sample count (overrides --n).
    #[arg(long)]
    pub npos: Option<usize>,
    /// Negative-class sample count (overrides --n).
    #[arg(long)]
    pub nneg: Option<usize>,
    /// Explicit positive-class mean vector, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub mean_pos: Option<Vec<f64>>,
    /// Explicit positive-class std vector (default: all ones).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub std_pos: Option<Vec<f64>>,
    /// Explicit negative-class mean vector.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub mean_neg: Option<Vec<f64>>,
    /// Explicit negative-class std vector (default: all ones).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub std_neg: Option<Vec<f64>>,
    /// Z-score every feature with pooled statistics before fitting.
    #[arg(long, default_value_t = false)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Generator {
    Gauss,
}

/// Solver hyperparameters shared by the fitting subcommands.
#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Regularization weight, or "auto" for the n_min^(-1/4) schedule.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Kernel bandwidth, or "median" for the median heuristic.
    #[arg(long, default_value = "median")]
    pub bandwidth: String,
    /// Multiplier applied to the median bandwidth.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
    /// Select lambda and bandwidth by k-fold cross-validation.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    /// Lambda grid for --cv.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1..,
        default_value = "0.0003,0.001,0.003,0.01"
    )]
    pub cv_lambdas: Vec<f64>,
    /// Bandwidth grid for --cv, as multiples of the median heuristic.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1..,
        default_value = "0.5,0.75,1.0,1.5"
    )]
    pub cv_bandwidth_scales: Vec<f64>,
    /// Gradient-norm convergence tolerance.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Total Newton iteration cap across barrier stages.
    #[arg(long)]
    pub max_newton_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagnostics JSON path (default: `<out>.diagnostics.json`).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Hold out this fraction for arc-length evaluation instead of
    /// evaluating on the training sample.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Also run the two-step procedure and report the AUC lower bound.
    #[arg(long, default_value_t = false)]
    pub auc_bound: bool,
    /// Output report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FigureBoundsArgs {
    #[arg(long, default_value_t = 0.0)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    /// Rescaling constant for the roc_div_rescaled column
    /// (default 1/(2 - sqrt(2)), mapping the divergence range onto [0,1]).
    #[arg(long)]
    pub rescale: Option<f64>,
    /// Output CSV path (a sibling `<out>.manifest.json` is written too).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scenario {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Built-in 5-dimensional mean-shift scenario.
    #[arg(long, value_enum, default_value_t = Scenario::Homoscedastic)]
    pub scenario: Scenario,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "24,48,72,96,120")]
    pub npos_grid: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub nneg: usize,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    /// Test samples per class.
    #[arg(long, default_value_t = 10_000)]
    pub test_size: usize,
    /// Override the benchmark regularization weight ("auto" or a number).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Override the benchmark bandwidth ("median" or a number).
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Multiplier on the median bandwidth.
    #[arg(long)]
    pub bandwidth_scale: Option<f64>,
    /// Per-run CSV path (`method,n_pos,repeat,auc`).
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Aggregated JSON summary path.
    #[arg(long)]
    pub out_json: PathBuf,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Score the data with a fitted model JSON; without it, 1-dimensional
    /// inputs are scored by the identity.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Emit the mixture surface grid instead of the ROC vertex list.
    #[arg(long, default_value_t = false)]
    pub surface: bool,
    /// Mixing-weight grid size for --surface.
    #[arg(long, default_value_t = 6)]
    pub alphas: usize,
    /// Threshold grid size for --surface.
    #[arg(long, default_value_t = 50)]
    pub taus: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}
