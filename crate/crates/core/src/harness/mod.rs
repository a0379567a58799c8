//! Experiment harness behind the `polyattractor` binary: config parsing,
//! orchestration of the subcommands and output files.

pub mod config;
pub mod output;
mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use output::{emit_outputs, RunArtifacts, RunSummary, Table};
pub use report::{covering_quality, envelope_consistency, recurrence_domination};
pub use run::{error_status, exit_status, run, RunOutcome, Subcommand};
