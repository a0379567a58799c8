use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polyattractor::harness::{emit_outputs, error_status, exit_status, run, ExperimentConfig, Subcommand};

/// Spectral Galerkin simulator and decay-verification lab for the
/// nonlocally damped wave equation on (0, π).
#[derive(Debug, Parser)]
#[command(name = "polyattractor", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Path to the TOML experiment config.
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write a gnuplot script for the emitted tables.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(cli.subcommand, &config);
    let status = exit_status(&result);
    match result {
        Ok(outcome) => {
            for (stage, elapsed) in &outcome.timings {
                eprintln!("{stage}: {:.3} s", elapsed.as_secs_f64());
            }
            if let Err(e) = emit_outputs(&outcome.artifacts, &cli.out, cli.plot) {
                eprintln!("error: {e}");
                return ExitCode::from(error_status(&e));
            }
            for check in &outcome.summary().checks {
                let verdict = if check.passed { "PASS" } else { "FAIL" };
                eprintln!("{verdict} {}: {:.6e} ({})", check.name, check.value, check.condition);
            }
            ExitCode::from(status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status)
        }
    }
}
