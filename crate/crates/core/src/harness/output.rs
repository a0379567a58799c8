//! Output files: comma-separated tables, the TOML run summary and an
//! optional gnuplot script.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::decay::LinearFit;
use crate::ensemble::ProxyCurves;
use crate::error::{Error, Result};
use crate::wave::Trajectory;

/// Column names of the trajectory table.
pub const TRAJECTORY_COLUMNS: [&str; 8] =
    ["t", "E_full", "E_quad", "l2_u", "l2_ut", "h1_u", "damping_power", "antidamping_power"];

/// A table held in memory until it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Header row, then one line per row with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", format_real(*v)).expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// Reads a table written by [`Table::to_csv`].
    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("missing header")?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut table = Table::new(columns);
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("row {}: {e}", i + 1))?;
            if row.len() != table.columns.len() {
                return Err(format!("row {}: {} fields for {} columns", i + 1, row.len(), table.columns.len()));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip
/// every `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory table with the fixed schema [`TRAJECTORY_COLUMNS`].
pub fn trajectory_table(traj: &Trajectory<f64>) -> Table {
    let mut table = Table::new(TRAJECTORY_COLUMNS.iter().map(|c| c.to_string()).collect());
    for i in 0..traj.len() {
        let s = &traj.states[i];
        table.push(vec![
            traj.times[i],
            traj.energy_full[i],
            traj.energy_quadratic[i],
            s.position.l2_norm(),
            s.velocity.l2_norm(),
            s.position.h1_seminorm(),
            traj.damping_power[i],
            traj.antidamping_power[i],
        ]);
    }
    table
}

/// Ensemble table: `t, diameter`, one column per proxy, then `min_proxy`.
pub fn ensemble_table(curves: &ProxyCurves<f64>) -> Table {
    let mut columns = vec!["t".to_string(), "diameter".to_string()];
    columns.extend(curves.proxies.iter().map(|(name, _)| name.clone()));
    columns.push("min_proxy".to_string());
    let mut table = Table::new(columns);
    for (i, &t) in curves.diameter.times().iter().enumerate() {
        let mut row = vec![t, curves.diameter.values()[i]];
        row.extend(curves.proxies.iter().map(|(_, s)| s.values()[i]));
        row.push(curves.min_proxy.values()[i]);
        table.push(row);
    }
    table
}

/// A regression result as recorded in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl FitRecord {
    pub fn new(name: impl Into<String>, fit: &LinearFit<f64>, window: (f64, f64)) -> Self {
        Self {
            name: name.into(),
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            points: fit.points,
            t_min: window.0,
            t_max: window.1,
        }
    }
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    /// The measured quantity the check compares.
    pub value: f64,
    /// Human-readable acceptance condition.
    pub condition: String,
}

/// Monotonicity-constant estimate as recorded in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRecord {
    pub r: f64,
    pub estimate: f64,
    pub one_dim_scan_min: f64,
    pub sampled_min: f64,
    pub dims: usize,
    pub samples_per_dim: usize,
}

/// Structured record of a run. Wall-clock timings are reported on stderr
/// only, so that the summary is a pure function of config and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub subcommand: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_checks_passed: Option<bool>,
    /// Named scalar results, sorted by name.
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<MonotonicityRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckRecord>,
    pub config: ExperimentConfig,
}

impl RunSummary {
    pub fn new(subcommand: &str, config: &ExperimentConfig) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config_hash: config.hash(),
            seed: config.ensemble.as_ref().map(|e| e.seed),
            all_checks_passed: None,
            values: BTreeMap::new(),
            monotonicity: None,
            fits: Vec::new(),
            checks: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, value: f64, condition: impl Into<String>) {
        self.checks.push(CheckRecord { name: name.to_string(), passed, value, condition: condition.into() });
        self.all_checks_passed = Some(self.checks.iter().all(|c| c.passed));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }

    /// Parses a summary; the embedded config is validated again, so the
    /// echoed hash can be recomputed from it.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut summary: RunSummary = toml::from_str(text)
            .map_err(|e| Error::Config { key: "<summary>".into(), reason: e.message().to_string() })?;
        let config_text = summary.config.to_toml();
        summary.config = ExperimentConfig::parse(&config_text, base_dir)?;
        Ok(summary)
    }
}

/// gnuplot script plotting whichever tables a run produced.
pub fn plot_script(tables: &[&str]) -> String {
    let mut s = String::from("# gnuplot script; run with `gnuplot -p plot.gp` inside the output directory\nset datafile separator ','\nset key autotitle columnhead\n");
    if tables.contains(&"trajectory.csv") {
        s.push_str("set title 'energy'\nset logscale y\nplot 'trajectory.csv' using 1:2 with lines, '' using 1:3 with lines\npause -1\n");
    }
    if tables.contains(&"ensemble.csv") {
        s.push_str("set title 'noncompactness proxies'\nset logscale xy\nplot for [i=2:*] 'ensemble.csv' using 1:i with lines\npause -1\n");
    }
    if tables.contains(&"envelope.csv") {
        s.push_str("set title 'envelope'\nset logscale xy\nplot 'envelope.csv' using 1:2 with lines\npause -1\n");
    }
    s
}

/// Files produced by a run, written together by [`emit_outputs`].
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub tables: Vec<(String, Table)>,
    pub summary: Option<RunSummary>,
}

/// Writes every table and the summary into `dir`, creating it if needed,
/// plus `plot.gp` when `plot` is set. Returns the written paths.
pub fn emit_outputs(artifacts: &RunArtifacts, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let mut write = |name: &str, contents: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
        Ok(())
    };
    for (name, table) in &artifacts.tables {
        write(name, table.to_csv())?;
    }
    if let Some(summary) = &artifacts.summary {
        write("summary.toml", summary.to_toml())?;
    }
    if plot {
        let names: Vec<&str> = artifacts.tables.iter().map(|(n, _)| n.as_str()).collect();
        write("plot.gp", plot_script(&names))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, -7.25e12, 0.0, f64::MAX, f64::MIN_POSITIVE] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(digits.len(), 17);
        }
    }

    #[test]
    fn empty_trajectory_gives_header_only() {
        let csv = trajectory_table(&Trajectory::empty()).to_csv();
        assert_eq!(csv, "t,E_full,E_quad,l2_u,l2_ut,h1_u,damping_power,antidamping_power\n");
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![1.0, 0.1]);
        t.push(vec![-3.5e-9, 1.0 / 7.0]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("b").unwrap(), vec![0.1, 1.0 / 7.0]);
        assert!(back.column("c").is_none());
        assert!(Table::from_csv("a,b\n1\n").is_err());
    }

    #[test]
    fn summary_round_trip() {
        let config = ExperimentConfig::parse("[ensemble]\nseed = 9\n", Path::new(".")).unwrap();
        let mut s = RunSummary::new("report", &config);
        s.values.insert("x".into(), 0.1);
        s.check("one", true, 1.0, "value = 1");
        s.check("two", false, f64::NAN, "never");
        let back = RunSummary::from_toml(&s.to_toml(), Path::new(".")).unwrap();
        assert_eq!(back.config_hash, back.config.hash());
        assert_eq!(back.seed, Some(9));
        assert_eq!(back.all_checks_passed, Some(false));
        assert_eq!(back.checks[0], s.checks[0]);
        assert!(back.checks[1].value.is_nan());
        assert_eq!(back.values, s.values);
    }
}
