mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

/// Lifshitz-Slyozov solver with nucleation inflow.
#[derive(Parser, Debug)]
#[command(name = "lsn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the characteristics solver; writes series.csv, snapshots and summary.json.
    Solve(Common),
    /// Check the hypotheses of a scenario.
    Validate(Common),
    /// Run the solver and the finite-volume oracle; writes compare.csv.
    Compare(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in scenario: vacuum, advection, sech2_benchmark, powerlaw_global, blowdown_exp.
    #[arg(long)]
    preset: Option<String>,
    /// Oracle cell count.
    #[arg(long)]
    cells: Option<usize>,
    /// Final time T*.
    #[arg(long)]
    horizon: Option<f64>,
}

fn load(c: &Common) -> Result<config::Resolved, CliError> {
    let (file, base) = match &c.config {
        Some(p) => (RunConfig::load(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if c.config.is_none() && c.preset.is_none() {
        return Err(CliError::Parse("give --config or --preset".into()));
    }
    let cli = Overrides { preset: c.preset.clone(), out: c.out.clone(), cells: c.cells, horizon: c.horizon };
    file.resolve(&cli, &base)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(c) => load(c).and_then(|r| commands::solve(&r)),
        Command::Validate(c) => load(c).and_then(|r| commands::validate(&r)),
        Command::Compare(c) => load(c).and_then(|r| commands::compare_cmd(&r)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
