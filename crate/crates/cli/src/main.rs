//! `rocarc`: estimate the arc-length divergence of the optimal ROC curve,
//! recover the arctangent likelihood ratio, and benchmark the two-step
//! approximate maximal-AUC procedure.

mod args;
mod commands;
mod manifest;

use args::{Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable/unwritable files: exit 1.
    Usage(String),
    Io(String),
    /// Numerical non-convergence: exit 2.
    NonConvergence(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::NonConvergence(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::NonConvergence(m) => m,
        }
    }
}

impl From<rocarc_core::estimator::EstimatorError> for CliError {
    fn from(e: rocarc_core::estimator::EstimatorError) -> Self {
        use rocarc_core::estimator::EstimatorError as E;
        match &e {
            E::NonConvergence { .. } | E::LogRatioNonConvergence => {
                CliError::NonConvergence(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<rocarc_core::divergence::DivergenceError> for CliError {
    fn from(e: rocarc_core::divergence::DivergenceError) -> Self {
        use rocarc_core::divergence::DivergenceError as D;
        match e {
            D::Estimator(inner) => CliError::from(inner),
            D::TwoStep(inner) => CliError::from(inner),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<rocarc_core::twostep::TwoStepError> for CliError {
    fn from(e: rocarc_core::twostep::TwoStepError) -> Self {
        use rocarc_core::twostep::TwoStepError as T;
        match e {
            T::Estimator(inner) => CliError::from(inner),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<rocarc_core::baselines::BaselineError> for CliError {
    fn from(e: rocarc_core::baselines::BaselineError) -> Self {
        use rocarc_core::baselines::BaselineError as B;
        match e {
            B::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            B::Estimator(inner) => CliError::from(inner),
            B::TwoStep(inner) => CliError::from(inner),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<rocarc_core::rocgeom::RocError> for CliError {
    fn from(e: rocarc_core::rocgeom::RocError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn configure_threads(requested: Option<usize>) {
    // Outer-level parallelism belongs to rayon; keep the BLAS kernels on a
    // single thread so results do not depend on machine core counts.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    let from_env = std::env::var("ROCARC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = requested.or(from_env) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a, cli.seed),
        Command::Divergence(a) => commands::cmd_divergence(a, cli.seed),
        Command::FigureBounds(a) => commands::cmd_figure_bounds(a, cli.seed),
        Command::Benchmark(a) => commands::cmd_benchmark(a, cli.seed),
        Command::Roc(a) => commands::cmd_roc(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    configure_threads(cli.threads);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
