//! End-to-end tests of the `polyattractor` binary: exit codes, output
//! schemas and summary round trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyattractor::harness::output::trajectory_table;
use polyattractor::harness::{emit_outputs, ExperimentConfig, RunArtifacts, RunSummary, Table};
use polyattractor::wave::Trajectory;

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyattractor")).args(args).output().expect("binary runs")
}

/// Writes `config` into a fresh directory and runs `subcommand` on it,
/// sending outputs to `<dir>/out`.
fn run_in_dir(dir: &Path, subcommand: &str, config: &str) -> (Output, PathBuf) {
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    let out = dir.join("out");
    let output = run_cli(&[subcommand, path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (output, out)
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read_table(path: &Path) -> Table {
    Table::from_csv(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run_in_dir(dir.path(), "simulate", "[system]\nmodez = 8\n");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("system.modez"), "stderr: {}", stderr(&output));
    assert!(!out.exists());
}

#[test]
fn invariant_violation_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = run_in_dir(dir.path(), "simulate", "[system]\ndamping = -1.0\n");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("system.damping"), "stderr: {}", stderr(&output));
}

#[test]
fn missing_config_file_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let output = run_cli(&["simulate", missing.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("absent.toml"));
}

#[test]
fn malformed_kernel_file_names_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("kernel.csv"), "2\n0.1,0.2\n0.3\n").unwrap();
    let config = "[system]\nmodes = 2\nkernel = \"matrix\"\nkernel_file = \"kernel.csv\"\n";
    let (output, _) = run_in_dir(dir.path(), "simulate", config);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("system.kernel_file"), "stderr: {}", stderr(&output));
}

#[test]
fn subcommand_requires_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let (output, _) = run_in_dir(dir.path(), "ensemble", "[system]\nmodes = 4\n");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("ensemble"), "stderr: {}", stderr(&output));
}

#[test]
fn ensemble_table_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[system]\nmodes = 16\ndt = 0.002\nt_end = 1.0\nsample_dt = 0.5\n\n\
                  [ensemble]\nseed = 9\ncount = 6\n\n[fit]\nks = [2, 4]\ncutoffs = [8, 16]\n";
    let (output, out) = run_in_dir(dir.path(), "ensemble", config);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let table = read_table(&out.join("ensemble.csv"));
    assert_eq!(table.columns, ["t", "diameter", "kcenter_r2", "kcenter_r4", "tail_N8", "tail_N16", "min_proxy"]);
    assert_eq!(table.column("t").unwrap(), [0.0, 0.5, 1.0]);
    for row in &table.rows {
        let min = row[2..6].iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(row[6], min);
    }
}

#[test]
fn empty_trajectory_writes_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts =
        RunArtifacts { tables: vec![("trajectory.csv".into(), trajectory_table(&Trajectory::empty()))], summary: None };
    let written = emit_outputs(&artifacts, dir.path(), false).unwrap();
    assert_eq!(written, [dir.path().join("trajectory.csv")]);
    let text = std::fs::read_to_string(&written[0]).unwrap();
    assert_eq!(text.trim_end(), "t,E_full,E_quad,l2_u,l2_ut,h1_u,damping_power,antidamping_power");
}

#[test]
fn conservative_simulation_keeps_energy() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[system]\ndamping = 0.0\nnonlinearity = \"cubic\"\ncubic = 1.0\nt_end = 10.0\n";
    let (output, out) = run_in_dir(dir.path(), "simulate", config);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let energy = read_table(&out.join("trajectory.csv")).column("E_full").unwrap();
    assert_eq!(energy.len(), 101);
    for e in &energy {
        assert!((e - energy[0]).abs() <= 1e-8 * energy[0]);
    }
}

#[test]
fn summary_round_trips_with_kernel_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("kernel.csv"), "3\n0.1,0,0\n0,0.2,0\n0,0,-0.05\n").unwrap();
    let config = "[system]\nmodes = 3\nkernel = \"matrix\"\nkernel_file = \"kernel.csv\"\nt_end = 0.5\n";
    let (output, out) = run_in_dir(dir.path(), "simulate", config);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));

    let loaded = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    let text = std::fs::read_to_string(out.join("summary.toml")).unwrap();
    let summary = RunSummary::from_toml(&text, dir.path()).unwrap();
    assert_eq!(summary.subcommand, "simulate");
    assert_eq!(summary.config_hash, loaded.hash());
    assert_eq!(summary.config.hash(), loaded.hash());
    assert_eq!(summary.to_toml(), text);
}

#[test]
fn cp_estimate_for_quadratic_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[system]\nexponent = 2.0\n\n[ensemble]\nseed = 3\n\n[report]\ncp_dims = 4\ncp_samples = 20000\n";
    let (output, out) = run_in_dir(dir.path(), "cp", config);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let summary =
        RunSummary::from_toml(&std::fs::read_to_string(out.join("summary.toml")).unwrap(), dir.path()).unwrap();
    let record = summary.monotonicity.unwrap();
    assert_eq!(record.r, 4.0);
    assert!((record.one_dim_scan_min - 0.25).abs() <= 1e-9);
    assert!(record.sampled_min >= 0.25 - 1e-6);
    assert_eq!(read_table(&out.join("cp.csv")).rows.len(), 4);
}

#[test]
fn bounds_table_starts_at_onset() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[bounds]\nvariant = \"wave\"\nalpha_b0 = 2.0\nt0 = 1.0\nt_star = 0.5\nt_end = 100.0\npoints = 10\n";
    let (output, out) = run_in_dir(dir.path(), "bounds", config);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let table = read_table(&out.join("envelope.csv"));
    assert_eq!(table.rows.len(), 10);
    assert_eq!(table.rows[0], [2.5, 2.0]);
    assert_eq!(table.rows[9][0], 100.0);
    assert!(table.column("envelope").unwrap().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn failing_report_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // rough initial data with steps far outside the asymptotic regime
    let config = r#"
[system]
modes = 8
initial = "ball"
initial_seed = 3
dt = 0.004
t_end = 2.0
sample_dt = 0.2

[ensemble]
seed = 42
count = 6

[fit]
t_min = 20.0
t_max = 40.0
cutoffs = [2, 4]
ks = [2, 3]

[report]
balance_t_end = 4.0
balance_dts = [0.05, 0.025, 0.0125]
conservation_t_end = 4.0
recurrence_draws = 10
tabulated_cases = 4
cp_dims = 2
cp_samples = 1000
pairs = 2
pair_t_end = 2.0
covering_trials = 4
envelope_sets = 2
"#;
    let (output, out) = run_in_dir(dir.path(), "report", config);
    assert_eq!(output.status.code(), Some(1), "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("FAIL energy_balance_ratio"));
    let summary =
        RunSummary::from_toml(&std::fs::read_to_string(out.join("summary.toml")).unwrap(), dir.path()).unwrap();
    assert_eq!(summary.all_checks_passed, Some(false));
}
