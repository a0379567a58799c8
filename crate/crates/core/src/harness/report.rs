//! The `report` subcommand: every acceptance check at the scale set by the
//! config, with one flag per check in the summary.

use rand::Rng;

use super::config::ExperimentConfig;
use super::output::{ensemble_table, trajectory_table, FitRecord, RunSummary, Table};
use super::run::{
    distance_fits, envelope_table, max_relative_energy_change, record_proxy_fits, record_trajectory, run_cp,
    run_ensemble, run_simulate, Timings,
};
use crate::decay::{
    difference_inequality_bound, envelope, recurrence_oracle, Coefficient, DiffIneqParams, EnvelopeParams,
};
use crate::ensemble::{
    evolve_trajectories, kcenter_optimal_radius, kcenter_radius, member_rng, quasi_stability_report, random_ball_state,
    sample_ball, Ensemble, ModeWeight,
};
use crate::error::Result;
use crate::wave::{energy_balance_residual, simulate};

/// Acceptance band for successive energy-balance residual ratios.
pub const BALANCE_RATIO_BAND: (f64, f64) = (8.0, 32.0);
/// Largest relative full-energy change of a conservative run.
pub const CONSERVATION_TOLERANCE: f64 = 1e-8;
/// Allowed excess of a recurrence iterate over its decay bound.
pub const DOMINATION_FACTOR: f64 = 1.0 + 1e-9;
/// Allowed deviation of the one-dimensional scan from its closed form.
pub const SCAN_TOLERANCE: f64 = 1e-9;
/// Allowed undershoot of sampled monotonicity ratios below the scan.
pub const SAMPLED_TOLERANCE: f64 = 1e-6;
/// Relative band around `−1/p` for fitted distance exponents.
pub const EXPONENT_BAND: f64 = 0.2;
/// Smallest acceptable pointwise pass fraction in the quasi-stability check.
pub const POINTWISE_FRACTION: f64 = 0.999;
/// Smallest acceptable `r²` of the affine proxy law.
pub const PROXY_R_SQUARED: f64 = 0.9;
/// Relative band for the envelope's large-time log-log slope.
pub const ENVELOPE_SLOPE_BAND: f64 = 0.01;

// Random streams of the master seed; ensemble members use streams 0..count.
const STREAM_RECURRENCE: u64 = 1 << 40;
const STREAM_TABULATED: u64 = (1 << 40) + 1;
const STREAM_COVERING: u64 = 2 << 40;
const STREAM_ENVELOPE: u64 = 3 << 40;
const STREAM_PAIRS: u64 = 4 << 40;

/// Iterates of the extremal recurrence checked per parameter draw.
const RECURRENCE_STEPS: usize = 200;

pub(crate) fn run_report(
    config: &ExperimentConfig,
    summary: &mut RunSummary,
    tables: &mut Vec<(String, Table)>,
    timings: &mut Timings,
) -> Result<()> {
    let settings = config.report_settings()?;
    let ens = config.require_ensemble("report")?;
    let fit = config.require_fit("report")?;
    let seed = ens.seed;

    // trajectory of the configured system
    let traj = timings.time("simulate", || run_simulate(config))?;
    record_trajectory(summary, &traj);
    tables.push(("trajectory.csv".into(), trajectory_table(&traj)));

    // energy-balance convergence
    let residuals = timings.time("energy_balance", || -> Result<Vec<f64>> {
        let params = config.wave_params()?;
        let initial = config.initial_state()?;
        let halved = settings.balance_dts.last().map(|dt| dt / 2.0);
        settings
            .balance_dts
            .iter()
            .chain(&halved)
            .map(|&dt| {
                let t_end = settings.balance_t_end;
                Ok(energy_balance_residual(&simulate(&initial, &params.with_dt(dt)?, t_end, t_end)?))
            })
            .collect()
    })?;
    let mut balance = Table::new(vec!["dt".into(), "residual".into(), "ratio_to_next".into()]);
    let dts: Vec<f64> =
        settings.balance_dts.iter().copied().chain(settings.balance_dts.last().map(|d| d / 2.0)).collect();
    for (i, (&dt, &res)) in dts.iter().zip(&residuals).enumerate() {
        let ratio = residuals.get(i + 1).map_or(f64::NAN, |next| res / next);
        balance.push(vec![dt, res, ratio]);
        if i + 1 < residuals.len() {
            let (lo, hi) = BALANCE_RATIO_BAND;
            summary.check(
                &format!("energy_balance_ratio_dt{dt}"),
                (lo..=hi).contains(&ratio),
                ratio,
                format!("in [{lo}, {hi}]"),
            );
        }
    }
    tables.push(("energy_balance.csv".into(), balance));

    // conservation
    let drift = timings.time("conservation", || -> Result<f64> {
        let params = config.conservative_params()?;
        let t = simulate(&config.initial_state()?, &params, settings.conservation_t_end, config.system.sample_dt)?;
        Ok(max_relative_energy_change(&t))
    })?;
    summary.check("conservation", drift <= CONSERVATION_TOLERANCE, drift, format!("<= {CONSERVATION_TOLERANCE}"));

    // decay bound domination
    let worst = timings
        .time("recurrence", || recurrence_domination(seed, settings.recurrence_draws, settings.tabulated_cases))?;
    summary.check(
        "recurrence_domination",
        worst <= DOMINATION_FACTOR,
        worst,
        format!("iterate / bound <= {DOMINATION_FACTOR}"),
    );

    // monotonicity constant
    let (mono, cp_table) = timings.time("cp", || run_cp(config))?;
    let exact = 2f64.powf(2.0 - mono.r);
    let scan_err = (mono.one_dim_scan_min - exact).abs();
    summary.check(
        "monotonicity_scan",
        scan_err <= SCAN_TOLERANCE,
        mono.one_dim_scan_min,
        format!("within {SCAN_TOLERANCE} of {exact}"),
    );
    let sampled_ok = mono.sampled_min >= mono.one_dim_scan_min - SAMPLED_TOLERANCE;
    summary.check(
        "monotonicity_sampled",
        sampled_ok,
        mono.sampled_min,
        format!(">= one_dim_scan_min - {SAMPLED_TOLERANCE}"),
    );
    let c_p_hat = mono.estimate;
    summary.monotonicity = Some(mono);
    tables.push(("cp.csv".into(), cp_table));

    // distance exponents
    let window = (fit.t_min, fit.t_max);
    let mut exponents = Table::new(vec!["p".into(), "slope".into(), "r_squared".into(), "predicted".into()]);
    let mut slopes = Vec::new();
    for &p in &settings.exponents {
        let (loglog, inverse) = timings.time(&format!("exponent_p{p}"), || -> Result<(FitRecord, FitRecord)> {
            let t = simulate(
                &config.initial_state()?,
                &config.pure_damping_params(p)?,
                fit.t_max,
                config.system.sample_dt,
            )?;
            distance_fits(&t, p, window)
        })?;
        let predicted = -1.0 / p;
        let ok = (loglog.slope - predicted).abs() <= EXPONENT_BAND * predicted.abs();
        summary.check(
            &format!("distance_exponent_p{p}"),
            ok,
            loglog.slope,
            format!("within {EXPONENT_BAND} relative of {predicted}"),
        );
        exponents.push(vec![p, loglog.slope, loglog.r_squared, predicted]);
        slopes.push(loglog.slope);
        summary.fits.push(loglog);
        summary.fits.push(inverse);
    }
    let increasing = slopes.windows(2).all(|w| w[1] > w[0]);
    let min_gap = slopes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    summary.check("exponent_ordering", increasing, min_gap, "fitted exponents strictly increasing in p");
    tables.push(("exponents.csv".into(), exponents));

    // quasi-stability on pairs from the ball
    let qs = timings.time("quasi_stability", || -> Result<Table> {
        let params = config.wave_params()?;
        let n = config.system.modes;
        let states: Vec<_> = (0..2 * settings.pairs as u64)
            .map(|i| random_ball_state(n, ens.radius, ens.weight, &mut member_rng(seed, STREAM_PAIRS + i)))
            .collect();
        let trajs =
            evolve_trajectories(&Ensemble::new(states)?, &params, settings.pair_t_end, config.system.sample_dt)?;
        let mut table = Table::new(
            [
                "pair",
                "nondegenerate_samples",
                "pointwise_passes",
                "pointwise_pass_fraction",
                "integral_slack",
                "rho_sup_l4",
                "rho_kernel",
                "energy_decrement",
                "identity_residual",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
        for (i, pair) in trajs.chunks(2).enumerate() {
            let r = quasi_stability_report(&pair[0], &pair[1], &params, c_p_hat)?;
            table.push(vec![
                i as f64,
                r.nondegenerate_samples as f64,
                r.pointwise_passes as f64,
                r.pointwise_pass_fraction,
                r.integral_slack,
                r.rho_sup_l4,
                r.rho_kernel,
                r.energy_decrement,
                r.identity_residual,
            ]);
        }
        Ok(table)
    })?;
    let total = qs.column("nondegenerate_samples").expect("column exists").iter().sum::<f64>();
    let passes = qs.column("pointwise_passes").expect("column exists").iter().sum::<f64>();
    let slacks = qs.column("integral_slack").expect("column exists");
    let pass_fraction = if total > 0.0 { passes / total } else { 1.0 };
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    summary.check(
        "pointwise_monotonicity",
        pass_fraction >= POINTWISE_FRACTION,
        pass_fraction,
        format!(">= {POINTWISE_FRACTION}"),
    );
    summary.check("integral_inequality", min_slack >= 0.0, min_slack, ">= 0 for every pair");
    tables.push(("quasi_stability.csv".into(), qs));

    // noncompactness proxies of a pure-damping ensemble
    let curves = timings
        .time("ensemble", || run_ensemble(config, &config.pure_damping_params(config.system.exponent)?, fit.t_max))?;
    let affine = record_proxy_fits(summary, &curves, fit)?.expect("ensemble evolved through the fit window");
    summary.check(
        "proxy_affine_law",
        affine.r_squared >= PROXY_R_SQUARED,
        affine.r_squared,
        format!("r^2 >= {PROXY_R_SQUARED}"),
    );
    tables.push(("ensemble.csv".into(), ensemble_table(&curves)));

    // covering heuristic
    let worst_cover = timings.time("covering", || covering_quality(seed, settings.covering_trials))?;
    summary.check("covering_quality", worst_cover <= 2.0, worst_cover, "greedy / optimal radius <= 2");

    // envelope self-consistency
    let (onset_err, slope_err) = timings.time("envelope", || envelope_consistency(seed, settings.envelope_sets))?;
    summary.check("envelope_onset", onset_err == 0.0, onset_err, "envelope(onset) == alpha_b0 exactly");
    summary.check(
        "envelope_slope",
        slope_err <= ENVELOPE_SLOPE_BAND,
        slope_err,
        format!("relative slope error <= {ENVELOPE_SLOPE_BAND}"),
    );
    if config.bounds.is_some() {
        let params = config.envelope_params()?;
        tables.push(("envelope.csv".into(), envelope_table(config, &params)?));
    }
    Ok(())
}

/// Largest ratio of a recurrence iterate to its decay bound over random
/// constant-coefficient draws and random monotone tabulated coefficients.
pub fn recurrence_domination(seed: u64, draws: usize, tabulated: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut rng = member_rng(seed, STREAM_RECURRENCE);
    for _ in 0..draws {
        let (alpha, k0, period, omega0) = loop {
            let alpha = rng.random_range(0.25..=4.0);
            let k0 = rng.random_range(0.1..=10.0);
            let period = rng.random_range(0.1..=2.0);
            let omega0: f64 = rng.random_range(0.01..=10.0);
            if omega0.powf(alpha) <= k0 {
                break (alpha, k0, period, omega0);
            }
        };
        let params = DiffIneqParams::constant(alpha, period, 0.0, k0)?;
        worst = worst.max(domination_ratio(&params, omega0)?);
    }
    let mut rng = member_rng(seed, STREAM_TABULATED);
    for case in 0..tabulated {
        let alpha: f64 = rng.random_range(0.25..=4.0);
        let k0: f64 = rng.random_range(0.1..=10.0);
        let period = rng.random_range(0.1..=2.0);
        let t0 = rng.random_range(0.0..=5.0);
        let omega0 = rng.random_range(0.01..=1.0) * k0.powf(1.0 / alpha);
        let (c, q) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let end = t0 + period * (RECURRENCE_STEPS + 1) as f64;
        let nodes = rng.random_range(2..=64);
        let h = if case % 2 == 0 {
            Coefficient::tabulate(t0, end, nodes, |t| k0 * (1.0 + c * (t - t0)).powf(q))?
        } else {
            Coefficient::tabulate(t0, end, nodes, |t| k0 * (1.0 + c / (1.0 + q * (t - t0))))?
        };
        let params = DiffIneqParams::new(alpha, period, t0, h)?;
        worst = worst.max(domination_ratio(&params, omega0)?);
    }
    Ok(worst)
}

fn domination_ratio(params: &DiffIneqParams<f64>, omega0: f64) -> Result<f64> {
    let series = recurrence_oracle(params, omega0, RECURRENCE_STEPS)?;
    let mut worst = 0.0f64;
    for (&t, &w) in series.times().iter().zip(series.values()).skip(2) {
        let bound = difference_inequality_bound(params, omega0, t)?;
        worst = worst.max(w / bound);
    }
    Ok(worst)
}

/// Largest greedy-to-optimal k-center radius ratio over random 8-point
/// ensembles and `k ∈ {2, 3}`.
pub fn covering_quality(seed: u64, trials: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for trial in 0..trials as u64 {
        let e: Ensemble<f64> = sample_ball(4, 8, 1.0, ModeWeight::Flat, seed.wrapping_add(STREAM_COVERING + trial))?;
        for k in [2, 3] {
            let opt = kcenter_optimal_radius(&e, k)?;
            let greedy = kcenter_radius(&e, k)?.radius;
            worst = worst.max(if opt > 0.0 { greedy / opt } else { 1.0 });
        }
    }
    Ok(worst)
}

/// For random wave envelopes: the largest `|envelope(onset) − alpha_b0|`
/// and the largest relative error of the log-log slope against `−1/p` at the
/// time where the bracket has grown by `10⁸`.
pub fn envelope_consistency(seed: u64, sets: usize) -> Result<(f64, f64)> {
    let mut rng = member_rng(seed, STREAM_ENVELOPE);
    let (mut onset_err, mut slope_err) = (0.0f64, 0.0f64);
    for _ in 0..sets {
        let params: EnvelopeParams<f64> = EnvelopeParams::Wave {
            alpha_b0: rng.random_range(0.1..=10.0),
            p: rng.random_range(0.5..=3.0),
            k: rng.random_range(0.1..=5.0),
            c_p: rng.random_range(0.05..=1.0),
            t0: rng.random_range(0.0..=10.0),
            t_star: rng.random_range(0.0..=5.0),
        };
        let EnvelopeParams::Wave { alpha_b0, p, k, c_p, .. } = params else { unreachable!() };
        onset_err = onset_err.max((envelope(&params, params.onset())? - alpha_b0).abs());
        let t = 1e8 * 2f64.powf(p + 2.0) / (p * k * c_p);
        let h = 1e-3;
        let slope = (envelope(&params, t * (1.0 + h))?.ln() - envelope(&params, t)?.ln()) / (1.0 + h).ln();
        slope_err = slope_err.max((slope * p + 1.0).abs());
    }
    Ok((onset_err, slope_err))
}
