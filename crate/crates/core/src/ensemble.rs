//! Ensembles of solutions and upper proxies for their Kuratowski measure of
//! noncompactness, plus the quasi-stability diagnostics for solution pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decay::DecaySeries;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm_sq, Real};
use crate::spectral::{phase_distance_sq, ModalField, PhaseState};
use crate::wave::{check_matching_grids, simulate, Trajectory, WaveParams};

/// Velocity differences at or below this norm are skipped by the pointwise
/// monotonicity check.
pub const VELOCITY_ZERO: f64 = 1e-12;

/// Finite set of phase states sharing one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    members: Vec<PhaseState<T>>,
    pub time: Option<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: Vec<PhaseState<T>>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        if let Some(bad) = members.iter().find(|m| m.modes() != first.modes()) {
            return Err(Error::BasisMismatch(first.modes(), bad.modes()));
        }
        Ok(Self { members, time: None })
    }

    pub fn at_time(mut self, t: T) -> Self {
        self.time = Some(t);
        self
    }

    pub fn members(&self) -> &[PhaseState<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.members[0].modes()
    }

    /// Largest pairwise phase distance.
    pub fn diameter(&self) -> T {
        let mut best = T::zero();
        for (i, a) in self.members.iter().enumerate() {
            for b in &self.members[i + 1..] {
                best = best.max(phase_distance_sq(a, b));
            }
        }
        best.sqrt()
    }
}

/// How the random initial data spreads its phase norm over the modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeWeight {
    /// Every phase coordinate has the same scale.
    Flat,
    /// Phase coordinate of mode `j` scaled by `1/j`.
    Inverse,
    /// Phase coordinate of mode `j` scaled by `1/j²`.
    InverseSquare,
}

impl ModeWeight {
    fn weight(self, j: usize) -> f64 {
        let j = j as f64;
        match self {
            ModeWeight::Flat => 1.0,
            ModeWeight::Inverse => 1.0 / j,
            ModeWeight::InverseSquare => 1.0 / (j * j),
        }
    }
}

/// Random generator for member `index` of a run seeded with `seed`.
///
/// Streams are keyed by index, so results do not depend on scheduling.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One random state in the phase-space ball of radius `radius`.
///
/// Phase coordinates `(j·a_j, b_j)` are Gaussian with mode scale given by
/// `weight`, rescaled to a norm drawn uniformly in volume from the ball.
pub fn random_ball_state<T: Real, R: Rng>(modes: usize, radius: T, weight: ModeWeight, rng: &mut R) -> PhaseState<T> {
    let mut pos = Vec::with_capacity(modes);
    let mut vel = Vec::with_capacity(modes);
    for j in 1..=modes {
        let w = weight.weight(j);
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        pos.push(w * g1 / j as f64);
        vel.push(w * g2);
    }
    let norm = pos.iter().enumerate().map(|(i, a)| ((i + 1) as f64 * a).powi(2)).sum::<f64>()
        + vel.iter().map(|b| b * b).sum::<f64>();
    let u: f64 = rng.random();
    let target = radius.to_f64_lossy() * u.powf(1.0 / (2 * modes) as f64);
    let scale = if norm > 0.0 { target / norm.sqrt() } else { 0.0 };
    let conv =
        |v: Vec<f64>| ModalField::new(v.into_iter().map(|x| T::lit(x * scale)).collect()).expect("finite sample");
    PhaseState { position: conv(pos), velocity: conv(vel) }
}

/// `count` random states from the ball, member `i` drawn from stream `i`.
pub fn sample_ball<T: Real>(
    modes: usize,
    count: usize,
    radius: T,
    weight: ModeWeight,
    seed: u64,
) -> Result<Ensemble<T>> {
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(radius > T::zero()) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let members =
        (0..count as u64).map(|i| random_ball_state(modes, radius, weight, &mut member_rng(seed, i))).collect();
    Ensemble::new(members)
}

/// Simulate every member; trajectories keep the input order.
pub fn evolve_trajectories<T: Real>(
    ensemble: &Ensemble<T>,
    params: &WaveParams<T>,
    t_end: T,
    sample_dt: T,
) -> Result<Vec<Trajectory<T>>> {
    ensemble.members.par_iter().map(|m| simulate(m, params, t_end, sample_dt)).collect()
}

/// Regroup member trajectories into one ensemble per sample time.
pub fn snapshots<T: Real>(trajectories: &[Trajectory<T>]) -> Result<Vec<Ensemble<T>>> {
    let first = trajectories.first().ok_or(Error::EmptyEnsemble)?;
    for t in &trajectories[1..] {
        check_matching_grids(first, t)?;
    }
    (0..first.len())
        .map(|i| {
            let members = trajectories.iter().map(|t| t.states[i].clone()).collect();
            Ok(Ensemble::new(members)?.at_time(first.times[i]))
        })
        .collect()
}

/// Time-indexed ensembles `S(t_i)B` for the sample times of `[0, t_end]`.
pub fn evolve_ensemble<T: Real>(
    ensemble: &Ensemble<T>,
    params: &WaveParams<T>,
    t_end: T,
    sample_dt: T,
) -> Result<Vec<Ensemble<T>>> {
    snapshots(&evolve_trajectories(ensemble, params, t_end, sample_dt)?)
}

/// Greedy farthest-point covering.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringReport<T> {
    pub k: usize,
    pub centers: Vec<usize>,
    /// Largest distance from a member to its nearest center.
    pub radius: T,
}

impl<T: Real> CoveringReport<T> {
    /// The covering balls have diameter at most `2·radius`.
    pub fn noncompactness_proxy(&self) -> T {
        T::lit(2.0) * self.radius
    }
}

/// Farthest-point-first k-center heuristic starting at member 0; the radius
/// is within a factor two of the optimal k-center radius.
pub fn kcenter_radius<T: Real>(ensemble: &Ensemble<T>, k: usize) -> Result<CoveringReport<T>> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if k == 0 {
        return Err(Error::invalid("k", "need at least one center"));
    }
    let pts = &ensemble.members;
    let mut centers = vec![0usize];
    let mut nearest: Vec<T> = pts.iter().map(|p| phase_distance_sq(p, &pts[0])).collect();
    while centers.len() < k.min(pts.len()) {
        let (far, &d) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite distances"))
            .expect("non-empty");
        if d == T::zero() {
            break;
        }
        centers.push(far);
        for (n, p) in nearest.iter_mut().zip(pts) {
            *n = n.min(phase_distance_sq(p, &pts[far]));
        }
    }
    let radius = nearest.into_iter().fold(T::zero(), T::max).sqrt();
    Ok(CoveringReport { k, centers, radius })
}

/// Members allowed in [`kcenter_optimal_radius`]; the search visits
/// `C(n, k)` center sets.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Optimal k-center radius with centers chosen among the members, found by
/// exhaustive search.
pub fn kcenter_optimal_radius<T: Real>(ensemble: &Ensemble<T>, k: usize) -> Result<T> {
    let n = ensemble.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if k == 0 {
        return Err(Error::invalid("k", "need at least one center"));
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::invalid(
            "ensemble",
            format!("exhaustive search limited to {EXHAUSTIVE_LIMIT} members, got {n}"),
        ));
    }
    let pts = &ensemble.members;
    let dist: Vec<Vec<T>> = pts.iter().map(|a| pts.iter().map(|b| phase_distance_sq(a, b)).collect()).collect();

    fn search<T: Real>(dist: &[Vec<T>], start: usize, left: usize, nearest: &[T], best: &mut T) {
        let current = nearest.iter().copied().fold(T::zero(), T::max);
        if current < *best {
            *best = current;
        }
        if left == 0 {
            return;
        }
        for c in start..dist.len() {
            let next: Vec<T> = nearest.iter().zip(&dist[c]).map(|(&a, &b)| a.min(b)).collect();
            search(dist, c + 1, left - 1, &next, best);
        }
    }

    let mut best = T::infinity();
    search(&dist, 0, k.min(n), &vec![T::infinity(); n], &mut best);
    Ok(best.sqrt())
}

/// `2 · max_i ‖Q_{N₀} x_i‖`: the low modes form a bounded finite-dimensional
/// (hence precompact) part, so only the tail contributes to the measure.
pub fn tail_proxy<T: Real>(ensemble: &Ensemble<T>, cutoff: usize) -> Result<T> {
    let mut best = T::zero();
    for m in &ensemble.members {
        best = best.max(m.tail_norm(cutoff)?);
    }
    Ok(T::lit(2.0) * best)
}

/// Named proxy series over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyCurves<T> {
    pub diameter: DecaySeries<T>,
    /// `kcenter_r{k}` (2× greedy radius) then `tail_N{c}` series, in input order.
    pub proxies: Vec<(String, DecaySeries<T>)>,
    pub min_proxy: DecaySeries<T>,
}

impl<T: Real> ProxyCurves<T> {
    pub fn get(&self, name: &str) -> Option<&DecaySeries<T>> {
        self.proxies.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Proxy values for every ensemble in a time-indexed sequence. Ensembles
/// without a time label are indexed by position.
pub fn noncompactness_curve<T: Real>(
    ensembles: &[Ensemble<T>],
    cutoffs: &[usize],
    ks: &[usize],
) -> Result<ProxyCurves<T>> {
    if ensembles.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if cutoffs.is_empty() && ks.is_empty() {
        return Err(Error::invalid("proxies", "need at least one cutoff or k"));
    }
    let times: Vec<T> = ensembles.iter().enumerate().map(|(i, e)| e.time.unwrap_or_else(|| T::from_count(i))).collect();
    let rows: Vec<(T, Vec<T>)> = ensembles
        .par_iter()
        .map(|e| {
            let mut vals = Vec::with_capacity(ks.len() + cutoffs.len());
            for &k in ks {
                vals.push(kcenter_radius(e, k)?.noncompactness_proxy());
            }
            for &c in cutoffs {
                vals.push(tail_proxy(e, c)?);
            }
            Ok((e.diameter(), vals))
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> =
        ks.iter().map(|k| format!("kcenter_r{k}")).chain(cutoffs.iter().map(|c| format!("tail_N{c}"))).collect();
    let mut proxies = Vec::with_capacity(names.len());
    for (col, name) in names.into_iter().enumerate() {
        let values = rows.iter().map(|(_, v)| v[col]).collect();
        proxies.push((name, DecaySeries::new(times.clone(), values)?));
    }
    let min_values = rows.iter().map(|(_, v)| v.iter().copied().fold(T::infinity(), T::min)).collect();
    Ok(ProxyCurves {
        diameter: DecaySeries::new(times.clone(), rows.iter().map(|(d, _)| *d).collect())?,
        proxies,
        min_proxy: DecaySeries::new(times, min_values)?,
    })
}

/// Estimate of the constant in `(‖x‖^{r−2}x − ‖y‖^{r−2}y, x − y) ≥ C_r‖x − y‖^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityEstimate<T> {
    pub r: T,
    pub estimate: T,
    pub sampled_min: T,
    pub one_dim_scan_min: T,
    pub samples: usize,
}

/// Points in the deterministic one-dimensional scan.
pub const SCAN_POINTS: usize = 200_001;

/// Ratio `(‖x‖^{r−2}x − ‖y‖^{r−2}y, x − y) / ‖x − y‖^r`; `None` when `x = y`.
pub fn monotonicity_ratio<T: Real>(x: &[T], y: &[T], r: T) -> Option<T> {
    let two = T::lit(2.0);
    let nx = norm_sq(x).sqrt();
    let ny = norm_sq(y).sqrt();
    let (sx, sy) = (nx.powf(r - two), ny.powf(r - two));
    let mut num = T::zero();
    let mut dsq = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        num = num + (sx * a - sy * b) * d;
        dsq = dsq + d * d;
    }
    if dsq == T::zero() {
        return None;
    }
    Some(num / dsq.powf(r / two))
}

/// `min_{s ∈ [−1, 1)} R(1, s)` on a uniform grid that contains the antipodal
/// point `s = −1`. By homogeneity and symmetry this covers every
/// one-dimensional pair.
pub fn one_dim_scan<T: Real>(r: T) -> T {
    let n = SCAN_POINTS;
    (0..n - 1)
        .map(|i| -T::one() + T::lit(2.0) * T::from_count(i) / T::from_count(n - 1))
        .filter_map(|s| monotonicity_ratio(&[T::one()], &[s], r))
        .fold(T::infinity(), T::min)
}

/// Sampled and scanned estimate of `C_r`, `r ≥ 2`.
///
/// Gaussian pairs in `dim` dimensions are drawn from a ChaCha stream keyed by
/// `seed`; the reported estimate is the smaller of the two minima.
pub fn estimate_monotonicity_constant<T: Real>(
    r: T,
    dim: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MonotonicityEstimate<T>> {
    if !(r >= T::lit(2.0)) {
        return Err(Error::invalid("r", "exponent must be >= 2"));
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be positive"));
    }
    let mut rng = member_rng(seed, dim as u64);
    let mut x = vec![T::zero(); dim];
    let mut y = vec![T::zero(); dim];
    let mut sampled = T::infinity();
    for _ in 0..n_samples {
        for v in x.iter_mut().chain(y.iter_mut()) {
            let g: f64 = rng.sample(StandardNormal);
            *v = T::lit(g);
        }
        if let Some(ratio) = monotonicity_ratio(&x, &y, r) {
            sampled = sampled.min(ratio);
        }
    }
    let scan = one_dim_scan(r);
    Ok(MonotonicityEstimate {
        r,
        estimate: sampled.min(scan),
        sampled_min: sampled,
        one_dim_scan_min: scan,
        samples: n_samples,
    })
}

/// Diagnostics of a solution pair `(w, v)` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiStabilityReport<T> {
    /// Samples with `‖z_t‖ > 1e-12`.
    pub nondegenerate_samples: usize,
    pub pointwise_passes: usize,
    pub pointwise_pass_fraction: T,
    /// `∫₀ᵀ ‖z_t‖² dt`.
    pub velocity_gap_integral: T,
    /// `∫₀ᵀ (‖w_t‖^p w_t − ‖v_t‖^p v_t, z_t) dt`.
    pub monotone_integral: T,
    /// `Ĉ_p^{−2/(p+2)} T^{p/(p+2)} (monotone_integral)^{2/(p+2)}`.
    pub integral_bound: T,
    /// `integral_bound − velocity_gap_integral`.
    pub integral_slack: T,
    /// `sup_t ‖z(t)‖_{L⁴}`.
    pub rho_sup_l4: T,
    /// `∫₀ᵀ ‖Ψ(z_t)‖ dt`.
    pub rho_kernel: T,
    pub energy_initial: T,
    pub energy_final: T,
    pub energy_decrement: T,
    /// `|k·monotone_integral − (E_z(0) − E_z(T) − ∫(f(w) − f(v), z_t) + ∫(Ψz_t, z_t))|`
    /// with trapezoid quadrature on the sample grid.
    pub identity_residual: T,
}

impl<T: Real> QuasiStabilityReport<T> {
    pub fn integral_holds(&self) -> bool {
        self.integral_slack >= T::zero()
    }
}

fn trapezoid<T: Real>(times: &[T], values: &[T]) -> T {
    times
        .windows(2)
        .zip(values.windows(2))
        .fold(T::zero(), |acc, (t, v)| acc + (t[1] - t[0]) * (v[0] + v[1]) / T::lit(2.0))
}

/// Pointwise monotonicity check and the integrated velocity-gap inequality
/// for the difference `z = w − v`, plus the two compact pseudometrics.
pub fn quasi_stability_report<T: Real>(
    traj_w: &Trajectory<T>,
    traj_v: &Trajectory<T>,
    params: &WaveParams<T>,
    c_p_hat: T,
) -> Result<QuasiStabilityReport<T>> {
    check_matching_grids(traj_w, traj_v)?;
    if !(c_p_hat > T::zero()) {
        return Err(Error::invalid("C_p", "estimate must be positive"));
    }
    if traj_w.is_empty() {
        return Err(Error::TimeGridMismatch("empty trajectories".into()));
    }
    let p = params.exponent();
    let two = T::lit(2.0);
    let basis = params.basis();
    let f = *params.nonlinearity();
    let n = params.modes();
    let zero_gap = T::lit(VELOCITY_ZERO);
    // allowance for cancellation in the inner product
    let roundoff = T::one() - T::lit(1e-12);

    let len = traj_w.len();
    let mut gap_sq = Vec::with_capacity(len);
    let mut mono = Vec::with_capacity(len);
    let mut kernel_norm = Vec::with_capacity(len);
    let mut kernel_form = Vec::with_capacity(len);
    let mut source_work = Vec::with_capacity(len);
    let mut rho_sup = T::zero();
    let (mut nondegenerate, mut passes) = (0usize, 0usize);
    let mut fw = vec![T::zero(); n];
    let mut fv = vec![T::zero(); n];

    for (w, v) in traj_w.states.iter().zip(&traj_v.states) {
        let (wt, vt) = (w.velocity.coeffs(), v.velocity.coeffs());
        let zt: Vec<T> = wt.iter().zip(vt).map(|(a, b)| *a - *b).collect();
        let zsq = norm_sq(&zt);
        let (gw, gv) = (norm_sq(wt).sqrt().powf(p), norm_sq(vt).sqrt().powf(p));
        let d = wt.iter().zip(vt).zip(&zt).fold(T::zero(), |acc, ((&a, &b), &z)| acc + (gw * a - gv * b) * z);
        let znorm = zsq.sqrt();
        if znorm > zero_gap {
            nondegenerate += 1;
            if d >= c_p_hat * znorm.powf(p + two) * roundoff {
                passes += 1;
            }
        }
        gap_sq.push(zsq);
        mono.push(d);

        let kz = params.kernel().apply(&zt);
        kernel_norm.push(norm_sq(&kz).sqrt());
        kernel_form.push(dot(&kz, &zt));

        let z = ModalField::new(w.position.coeffs().iter().zip(v.position.coeffs()).map(|(a, b)| *a - *b).collect())?;
        rho_sup = rho_sup.max(basis.lp_grid_norm(&z, T::lit(4.0))?);

        if f.is_zero() {
            source_work.push(T::zero());
        } else {
            let mut grid = basis.to_grid(&w.position)?;
            grid.iter_mut().for_each(|u| *u = f.eval(*u));
            basis.to_modal_into(&grid, &mut fw)?;
            let mut grid = basis.to_grid(&v.position)?;
            grid.iter_mut().for_each(|u| *u = f.eval(*u));
            basis.to_modal_into(&grid, &mut fv)?;
            let diff: Vec<T> = fw.iter().zip(&fv).map(|(a, b)| *a - *b).collect();
            source_work.push(dot(&diff, &zt));
        }
    }

    let times = &traj_w.times;
    let horizon = *times.last().unwrap() - times[0];
    let gap_integral = trapezoid(times, &gap_sq);
    let mono_integral = trapezoid(times, &mono);
    let e = two / (p + two);
    let bound = c_p_hat.powf(-e) * horizon.powf(p / (p + two)) * mono_integral.max(T::zero()).powf(e);

    let ez = |i: usize| phase_distance_sq(&traj_w.states[i], &traj_v.states[i]) / two;
    let (e0, e1) = (ez(0), ez(len - 1));
    let identity =
        params.damping() * mono_integral - (e0 - e1 - trapezoid(times, &source_work) + trapezoid(times, &kernel_form));

    Ok(QuasiStabilityReport {
        nondegenerate_samples: nondegenerate,
        pointwise_passes: passes,
        pointwise_pass_fraction: if nondegenerate == 0 {
            T::one()
        } else {
            T::from_count(passes) / T::from_count(nondegenerate)
        },
        velocity_gap_integral: gap_integral,
        monotone_integral: mono_integral,
        integral_bound: bound,
        integral_slack: bound - gap_integral,
        rho_sup_l4: rho_sup,
        rho_kernel: trapezoid(times, &kernel_norm),
        energy_initial: e0,
        energy_final: e1,
        energy_decrement: e0 - e1,
        identity_residual: identity.abs(),
    })
}
