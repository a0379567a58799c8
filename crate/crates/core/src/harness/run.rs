//! Orchestration of the subcommands.

use std::time::{Duration, Instant};

use super::config::{ExperimentConfig, FitConfig};
use super::output::{ensemble_table, trajectory_table, FitRecord, MonotonicityRecord, RunArtifacts, RunSummary, Table};
use super::report;
use crate::decay::{envelope, fit_inverse_power, fit_loglog_exponent, DecaySeries, EnvelopeParams};
use crate::ensemble::{
    estimate_monotonicity_constant, evolve_ensemble, noncompactness_curve, sample_ball, ProxyCurves,
};
use crate::error::{Error, Result};
use crate::wave::{energy_balance_residual, simulate, Trajectory, WaveParams};

/// The experiments the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    /// One trajectory of the configured system.
    Simulate,
    /// Noncompactness proxies of an evolved random ensemble.
    Ensemble,
    /// Decay-exponent regressions on one pure-damping trajectory.
    Fit,
    /// Monotonicity-constant estimate for `r = p + 2`.
    Cp,
    /// Tabulated attraction-rate envelope.
    Bounds,
    /// Every acceptance check, combining all of the above.
    Report,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Ensemble => "ensemble",
            Subcommand::Fit => "fit",
            Subcommand::Cp => "cp",
            Subcommand::Bounds => "bounds",
            Subcommand::Report => "report",
        }
    }
}

/// Artifacts of a run plus the wall-clock time of each stage; the timings
/// are not part of any output file.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: RunArtifacts,
    pub timings: Vec<(String, Duration)>,
}

impl RunOutcome {
    pub fn summary(&self) -> &RunSummary {
        self.artifacts.summary.as_ref().expect("every run writes a summary")
    }
}

/// Wall-clock stopwatch for named stages.
#[derive(Debug, Default)]
pub(crate) struct Timings(pub(crate) Vec<(String, Duration)>);

impl Timings {
    pub(crate) fn time<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.0.push((name.to_string(), start.elapsed()));
        out
    }
}

/// Runs `subcommand` on a validated config.
pub fn run(subcommand: Subcommand, config: &ExperimentConfig) -> Result<RunOutcome> {
    let mut timings = Timings::default();
    let mut summary = RunSummary::new(subcommand.name(), config);
    let mut tables = Vec::new();
    match subcommand {
        Subcommand::Simulate => {
            let traj = timings.time("simulate", || run_simulate(config))?;
            record_trajectory(&mut summary, &traj);
            tables.push(("trajectory.csv".to_string(), trajectory_table(&traj)));
        }
        Subcommand::Ensemble => {
            let fit = config.require_fit("ensemble")?;
            let curves =
                timings.time("ensemble", || run_ensemble(config, &config.wave_params()?, config.system.t_end))?;
            record_proxy_fits(&mut summary, &curves, fit)?;
            tables.push(("ensemble.csv".to_string(), ensemble_table(&curves)));
        }
        Subcommand::Fit => {
            let fit = config.require_fit("fit")?;
            let p = fit.p.unwrap_or(config.system.exponent);
            let params = config.pure_damping_params(p)?;
            let traj = timings
                .time("fit", || simulate(&config.initial_state()?, &params, fit.t_max, config.system.sample_dt))?;
            let (loglog, inverse) = distance_fits(&traj, p, (fit.t_min, fit.t_max))?;
            summary.values.insert("predicted_exponent".into(), -1.0 / p);
            summary.fits.push(loglog);
            summary.fits.push(inverse);
            tables.push(("trajectory.csv".to_string(), trajectory_table(&traj)));
        }
        Subcommand::Cp => {
            config.require_ensemble("cp")?;
            let (record, table) = timings.time("cp", || run_cp(config))?;
            summary.monotonicity = Some(record);
            tables.push(("cp.csv".to_string(), table));
        }
        Subcommand::Bounds => {
            let params = config.envelope_params()?;
            let table = envelope_table(config, &params)?;
            summary.values.insert("onset".into(), params.onset());
            summary.values.insert("rate".into(), params.rate());
            summary.values.insert("decay_exponent".into(), params.decay_exponent());
            summary.values.insert("envelope_at_t_end".into(), *table.rows.last().map(|r| &r[1]).expect("two points"));
            tables.push(("envelope.csv".to_string(), table));
        }
        Subcommand::Report => {
            report::run_report(config, &mut summary, &mut tables, &mut timings)?;
        }
    }
    Ok(RunOutcome { artifacts: RunArtifacts { tables, summary: Some(summary) }, timings: timings.0 })
}

pub(crate) fn run_simulate(config: &ExperimentConfig) -> Result<Trajectory<f64>> {
    simulate(&config.initial_state()?, &config.wave_params()?, config.system.t_end, config.system.sample_dt)
}

pub(crate) fn record_trajectory(summary: &mut RunSummary, traj: &Trajectory<f64>) {
    let e0 = traj.energy_full.first().copied().unwrap_or(0.0);
    let e1 = traj.energy_full.last().copied().unwrap_or(0.0);
    summary.values.insert("energy_initial".into(), e0);
    summary.values.insert("energy_final".into(), e1);
    summary.values.insert("energy_balance_residual".into(), energy_balance_residual(traj));
    summary.values.insert("max_relative_energy_change".into(), max_relative_energy_change(traj));
}

/// `max_t |E(t) − E(0)| / |E(0)|` of the full energy.
pub(crate) fn max_relative_energy_change(traj: &Trajectory<f64>) -> f64 {
    let Some(&e0) = traj.energy_full.first() else { return 0.0 };
    let worst = traj.energy_full.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    if e0 == 0.0 {
        worst
    } else {
        worst / e0.abs()
    }
}

pub(crate) fn run_ensemble(
    config: &ExperimentConfig,
    params: &WaveParams<f64>,
    t_end: f64,
) -> Result<ProxyCurves<f64>> {
    let e = config.require_ensemble("ensemble")?;
    let fit = config.require_fit("ensemble")?;
    let initial = sample_ball(config.system.modes, e.count, e.radius, e.weight, e.seed)?;
    let snaps = evolve_ensemble(&initial, params, t_end, config.system.sample_dt)?;
    noncompactness_curve(&snaps, &fit.cutoffs, &fit.ks)
}

/// Affine fits of `proxy^{−p}`, recorded when the fit window lies inside
/// the simulated range.
pub(crate) fn record_proxy_fits(
    summary: &mut RunSummary,
    curves: &ProxyCurves<f64>,
    fit: &FitConfig,
) -> Result<Option<FitRecord>> {
    let p = fit.p.expect("filled during validation");
    let window = (fit.t_min, fit.t_max);
    if let Some(&first) = curves.min_proxy.values().first() {
        summary.values.insert("min_proxy_initial".into(), first);
        summary.values.insert("min_proxy_final".into(), *curves.min_proxy.values().last().expect("non-empty"));
        summary.values.insert("diameter_initial".into(), curves.diameter.values()[0]);
    }
    let end = curves.min_proxy.times().last().copied().unwrap_or(0.0);
    if end < fit.t_max {
        return Ok(None);
    }
    let min_fit = FitRecord::new("min_proxy_inverse_power", &fit_inverse_power(&curves.min_proxy, p, window)?, window);
    summary.fits.push(min_fit.clone());
    for (name, series) in &curves.proxies {
        summary.fits.push(FitRecord::new(
            format!("{name}_inverse_power"),
            &fit_inverse_power(series, p, window)?,
            window,
        ));
    }
    Ok(Some(min_fit))
}

/// Distance `√(2E_z)` to the zero solution: a log-log exponent fit and the
/// affine law of its `−p`-th power.
pub(crate) fn distance_fits(traj: &Trajectory<f64>, p: f64, window: (f64, f64)) -> Result<(FitRecord, FitRecord)> {
    let series = distance_series(traj)?;
    let loglog = FitRecord::new(format!("distance_loglog_p{p}"), &fit_loglog_exponent(&series, window)?, window);
    let inverse =
        FitRecord::new(format!("distance_inverse_power_p{p}"), &fit_inverse_power(&series, p, window)?, window);
    Ok((loglog, inverse))
}

pub(crate) fn distance_series(traj: &Trajectory<f64>) -> Result<DecaySeries<f64>> {
    DecaySeries::new(traj.times.clone(), traj.energy_quadratic.iter().map(|e| (2.0 * e).sqrt()).collect())
}

pub(crate) fn run_cp(config: &ExperimentConfig) -> Result<(MonotonicityRecord, Table)> {
    let seed = config.require_ensemble("cp")?.seed;
    let report = config.report_settings()?;
    let r = config.system.exponent + 2.0;
    let mut table = Table::new(vec!["dim".into(), "sampled_min".into(), "one_dim_scan_min".into(), "estimate".into()]);
    let mut record = MonotonicityRecord {
        r,
        estimate: f64::INFINITY,
        one_dim_scan_min: f64::INFINITY,
        sampled_min: f64::INFINITY,
        dims: report.cp_dims,
        samples_per_dim: report.cp_samples,
    };
    for dim in 1..=report.cp_dims {
        let est = estimate_monotonicity_constant(r, dim, report.cp_samples, seed)?;
        table.push(vec![dim as f64, est.sampled_min, est.one_dim_scan_min, est.estimate]);
        record.estimate = record.estimate.min(est.estimate);
        record.one_dim_scan_min = est.one_dim_scan_min;
        record.sampled_min = record.sampled_min.min(est.sampled_min);
    }
    Ok((record, table))
}

/// Envelope on a log-spaced grid from its onset to `bounds.t_end`.
pub(crate) fn envelope_table(config: &ExperimentConfig, params: &EnvelopeParams<f64>) -> Result<Table> {
    let b = config.require_bounds("bounds")?;
    let onset = params.onset();
    let mut table = Table::new(vec!["t".into(), "envelope".into()]);
    let ratio = b.t_end / onset;
    for i in 0..b.points {
        let t = if i == 0 {
            onset
        } else if i + 1 == b.points {
            b.t_end
        } else {
            onset * ratio.powf(i as f64 / (b.points - 1) as f64)
        };
        table.push(vec![t, envelope(params, t)?]);
    }
    Ok(table)
}

/// Exit status for a finished run.
pub fn exit_status(result: &Result<RunOutcome>) -> u8 {
    match result {
        Ok(outcome) if outcome.summary().passed() => 0,
        Ok(_) => 1,
        Err(e) => error_status(e),
    }
}

/// Config problems exit with 2, every other failure with 1.
pub fn error_status(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        _ => 1,
    }
}
