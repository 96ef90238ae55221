//! Command-line front end for counterfactual earnings decomposition.

mod config;
mod runner;

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use earndist::exec;
use earndist::Error;

use crate::config::RunConfig;
use crate::runner::{CommandKind, Runner};

#[derive(Parser)]
#[command(
    name = "earndist",
    about = "Counterfactual decomposition of annual earnings distributions",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the master seed from the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores; ignored in sequential builds).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Turn support-check warnings into hard errors.
    #[arg(long, global = true)]
    strict_support: bool,
    /// Print the effective configuration (all defaults filled in) and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Draw a synthetic data set from the configured generator.
    Simulate,
    /// Fit all stages for the selected years and cache them.
    Fit,
    /// Decompose distributional change into the four-channel series.
    Decompose,
    /// Decompose the hours distribution (structure vs composition).
    HoursDecompose,
    /// Weighted-bootstrap confidence bands for the decomposition.
    Bootstrap,
    /// Employment rates, log-variance components and the support report.
    Diagnostics,
}

impl Command {
    fn kind(self) -> CommandKind {
        match self {
            Command::Simulate => CommandKind::Simulate,
            Command::Fit => CommandKind::Fit,
            Command::Decompose => CommandKind::Decompose,
            Command::HoursDecompose => CommandKind::HoursDecompose,
            Command::Bootstrap => CommandKind::Bootstrap,
            Command::Diagnostics => CommandKind::Diagnostics,
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'e> {
    error: String,
    kind: &'e str,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = match run(&cli) {
        Ok(()) => return ExitCode::SUCCESS,
        Err((dir, err)) => {
            eprintln!("error: {err:#}");
            let record = ErrorRecord { error: format!("{err:#}"), kind: error_kind(&err) };
            dir.map(|d| (d, record))
        }
    };
    if let Some((dir, record)) = out_dir {
        if std::fs::create_dir_all(&dir).is_ok() {
            if let Ok(file) = File::create(dir.join("error.json")) {
                let mut w = BufWriter::new(file);
                if serde_json::to_writer_pretty(&mut w, &record).is_ok() {
                    let _ = w.write_all(b"\n");
                }
            }
        }
    }
    ExitCode::FAILURE
}

/// Errors carry the output directory (when known) so a machine-readable
/// record can be left next to the other artifacts.
fn run(cli: &Cli) -> Result<(), (Option<PathBuf>, anyhow::Error)> {
    let path = cli.config.as_deref().ok_or_else(|| {
        (None, anyhow::anyhow!("--config PATH is required"))
    })?;
    let mut config = RunConfig::load(path).map_err(|e| (None, e))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| (None, e))?;
    if cli.print_config {
        match config.print() {
            Ok(text) => {
                print!("{text}");
                return Ok(());
            }
            Err(e) => return Err((None, e)),
        }
    }
    let out_dir = config.output.dir.clone();
    let mut runner = Runner::new(config, cli.strict_support);
    exec::with_jobs(cli.jobs, || runner.run(cli.command.kind()))
        .map_err(|e| (Some(out_dir), e))
}

/// Stable machine-readable labels for the error record.
fn error_kind(err: &anyhow::Error) -> &'static str {
    let Some(e) = err.downcast_ref::<Error>() else {
        return "config";
    };
    match e {
        Error::Csv(_) => "csv",
        Error::Io(_) => "io",
        Error::MissingColumn(_) => "missing_column",
        Error::NonNumeric { .. } => "non_numeric",
        Error::Invalid(_) => "invalid",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::TooFewObservations { .. } => "too_few_observations",
        Error::BasisMismatch => "basis_mismatch",
        Error::UnknownYear(_) => "unknown_year",
        Error::GridTooShort { .. } => "grid_too_short",
        Error::UndefinedAtBase { .. } => "undefined_at_base",
        Error::ZeroAtomQuantile { .. } => "zero_atom_quantile",
        Error::ZeroDenominator { .. } => "zero_denominator",
        Error::SupportViolation { .. } => "support_violation",
        Error::MissingComponents => "missing_components",
        Error::IntervalInverted { .. } => "interval_inverted",
        Error::Dgp(_) => "dgp",
    }
}
