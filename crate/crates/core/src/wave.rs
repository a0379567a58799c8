//! Galerkin truncation of the nonlocally damped wave equation
//!
//! ```text
//! u_tt − u_xx + k‖u_t‖^p u_t + f(u) = ∫ K(x, y) u_t(y) dy + h(x)   on (0, π)
//! ```
//!
//! with homogeneous Dirichlet data, its RK4 integration, and the energy
//! bookkeeping used to validate runs.

use crate::decay::DecaySeries;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm_sq, Real};
use crate::spectral::{h1_seminorm_sq, ModalField, PhaseState, SpectralBasis};

/// Source term `f(u) = c₃u³ − c₁u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity<T> {
    Zero,
    Cubic { cubic: T, linear: T },
}

impl<T: Real> Nonlinearity<T> {
    /// Checks `c₃ ≥ 0` and, when `c₃ = 0`, the dissipativity margin `c₁ < λ₁ = 1`.
    pub fn validate(&self) -> Result<()> {
        if let Nonlinearity::Cubic { cubic, linear } = *self {
            if !cubic.is_finite() || !linear.is_finite() {
                return Err(Error::invalid("nonlinearity", "non-finite coefficient"));
            }
            if cubic < T::zero() {
                return Err(Error::invalid("nonlinearity", "cubic coefficient must be >= 0"));
            }
            if cubic == T::zero() && linear >= T::one() {
                return Err(Error::invalid("nonlinearity", "linear softening must stay below the first eigenvalue 1"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::Cubic { cubic, linear } => cubic == T::zero() && linear == T::zero(),
        }
    }

    #[inline]
    pub fn eval(&self, s: T) -> T {
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Cubic { cubic, linear } => cubic * s * s * s - linear * s,
        }
    }

    /// Antiderivative with `F(0) = 0`.
    #[inline]
    pub fn antiderivative(&self, s: T) -> T {
        match *self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Cubic { cubic, linear } => {
                let s2 = s * s;
                cubic * s2 * s2 / T::lit(4.0) - linear * s2 / T::lit(2.0)
            }
        }
    }

    /// Growth exponent `q` with `|f′(s)| ≤ M|s|^q` for `|s| ≥ 1`.
    pub fn growth_exponent(&self) -> T {
        match *self {
            Nonlinearity::Cubic { cubic, .. } if cubic > T::zero() => T::lit(2.0),
            _ => T::zero(),
        }
    }

    /// A valid growth constant `M = 3c₃ + |c₁| + 1`.
    pub fn growth_constant(&self) -> T {
        match *self {
            Nonlinearity::Zero => T::one(),
            Nonlinearity::Cubic { cubic, linear } => T::lit(3.0) * cubic + linear.abs() + T::one(),
        }
    }
}

/// The nonlocal operator `Ψ` written in the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    modes: usize,
    // row-major N×N
    matrix: Vec<T>,
    zero: bool,
}

impl<T: Real> Kernel<T> {
    pub fn zero(modes: usize) -> Self {
        Self { modes, matrix: vec![T::zero(); modes * modes], zero: true }
    }

    /// `κ · e_r ⊗ e_r` (1-based `r`).
    pub fn rank_one(modes: usize, rank_mode: usize, kappa: T) -> Result<Self> {
        if rank_mode == 0 || rank_mode > modes {
            return Err(Error::invalid("kernel", format!("rank-one mode {rank_mode} outside 1..={modes}")));
        }
        let mut k = Self::zero(modes);
        k.matrix[(rank_mode - 1) * modes + rank_mode - 1] = kappa;
        k.zero = kappa == T::zero();
        Self::from_matrix(modes, k.matrix)
    }

    pub fn from_matrix(modes: usize, matrix: Vec<T>) -> Result<Self> {
        if matrix.len() != modes * modes {
            return Err(Error::Dimension { expected: modes * modes, got: matrix.len() });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("kernel", "non-finite matrix entry"));
        }
        let zero = matrix.iter().all(|&x| x == T::zero());
        Ok(Self { modes, matrix, zero })
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    /// `‖K‖_{L²(Ω×Ω)}` of the truncated kernel.
    pub fn frobenius_norm(&self) -> T {
        norm_sq(&self.matrix).sqrt()
    }

    /// `out = Ψ(v)` in modal coordinates.
    pub fn apply_into(&self, v: &[T], out: &mut [T]) {
        if self.zero {
            out.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        for (row, o) in self.matrix.chunks_exact(self.modes).zip(out.iter_mut()) {
            *o = dot(row, v);
        }
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.modes];
        self.apply_into(v, &mut out);
        out
    }

    /// `(Ψ(v), v)`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        if self.zero {
            return T::zero();
        }
        self.matrix.chunks_exact(self.modes).zip(v).fold(T::zero(), |acc, (row, &vi)| acc + vi * dot(row, v))
    }
}

/// Coefficients of the equation plus the integrator step.
#[derive(Debug, Clone)]
pub struct WaveParams<T> {
    damping: T,
    exponent: T,
    nonlinearity: Nonlinearity<T>,
    kernel: Kernel<T>,
    forcing: ModalField<T>,
    basis: SpectralBasis<T>,
    dt: T,
}

impl<T: Real> WaveParams<T> {
    /// Defaults: `k = 1`, `p = 1`, `f = 0`, `K = 0`, `h = 0`, `dt = 1e-3`.
    pub fn builder(basis: SpectralBasis<T>) -> WaveParamsBuilder<T> {
        let n = basis.modes();
        WaveParamsBuilder {
            params: WaveParams {
                damping: T::one(),
                exponent: T::one(),
                nonlinearity: Nonlinearity::Zero,
                kernel: Kernel::zero(n),
                forcing: ModalField::zeros(n),
                basis,
                dt: T::lit(1e-3),
            },
        }
    }

    #[inline]
    pub fn damping(&self) -> T {
        self.damping
    }
    #[inline]
    pub fn exponent(&self) -> T {
        self.exponent
    }
    #[inline]
    pub fn nonlinearity(&self) -> &Nonlinearity<T> {
        &self.nonlinearity
    }
    #[inline]
    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }
    #[inline]
    pub fn forcing(&self) -> &ModalField<T> {
        &self.forcing
    }
    #[inline]
    pub fn basis(&self) -> &SpectralBasis<T> {
        &self.basis
    }
    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }
    #[inline]
    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    /// Same parameters with another step size (re-validated).
    pub fn with_dt(&self, dt: T) -> Result<Self> {
        let mut p = self.clone();
        p.dt = dt;
        p.validate()?;
        Ok(p)
    }

    /// Largest step allowed for the fastest mode frequency `N`.
    pub fn max_stable_dt(&self) -> T {
        T::lit(0.5) / T::from_count(self.modes())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.modes();
        if !(self.damping >= T::zero()) || !self.damping.is_finite() {
            return Err(Error::invalid("k", "damping strength must be finite and >= 0"));
        }
        if !(self.exponent > T::zero()) || !self.exponent.is_finite() {
            return Err(Error::invalid("p", "damping exponent must be positive"));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::invalid("dt", "time step must be positive"));
        }
        if self.dt > self.max_stable_dt() {
            return Err(Error::invalid(
                "dt",
                format!("time step {} exceeds 0.5/N = {}", self.dt, self.max_stable_dt()),
            ));
        }
        self.nonlinearity.validate()?;
        if self.kernel.modes() != n {
            return Err(Error::BasisMismatch(n, self.kernel.modes()));
        }
        if self.forcing.modes() != n {
            return Err(Error::BasisMismatch(n, self.forcing.modes()));
        }
        Ok(())
    }

    /// `k‖v‖^{p+2}`.
    #[inline]
    pub fn damping_power(&self, velocity: &[T]) -> T {
        let nsq = norm_sq(velocity);
        self.damping * nsq.powf((self.exponent + T::lit(2.0)) / T::lit(2.0))
    }

    /// `(Ψ(v), v)`.
    #[inline]
    pub fn antidamping_power(&self, velocity: &[T]) -> T {
        self.kernel.quadratic_form(velocity)
    }

    fn check_state(&self, state: &PhaseState<T>) -> Result<()> {
        if state.modes() != self.modes() {
            return Err(Error::BasisMismatch(self.modes(), state.modes()));
        }
        Ok(())
    }
}

pub struct WaveParamsBuilder<T> {
    params: WaveParams<T>,
}

impl<T: Real> WaveParamsBuilder<T> {
    pub fn damping(mut self, k: T) -> Self {
        self.params.damping = k;
        self
    }
    pub fn exponent(mut self, p: T) -> Self {
        self.params.exponent = p;
        self
    }
    pub fn nonlinearity(mut self, f: Nonlinearity<T>) -> Self {
        self.params.nonlinearity = f;
        self
    }
    pub fn kernel(mut self, kernel: Kernel<T>) -> Self {
        self.params.kernel = kernel;
        self
    }
    pub fn forcing(mut self, h: ModalField<T>) -> Self {
        self.params.forcing = h;
        self
    }
    pub fn dt(mut self, dt: T) -> Self {
        self.params.dt = dt;
        self
    }
    pub fn build(self) -> Result<WaveParams<T>> {
        self.params.validate()?;
        Ok(self.params)
    }
}

/// Which energy functional [`energy`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMode {
    /// `½(‖u_t‖² + ‖∂ₓu‖²) + ∫F(u) − (h, u)`
    Full,
    /// `½(‖u_t‖² + ‖∂ₓu‖²)`
    Quadratic,
}

pub fn energy<T: Real>(state: &PhaseState<T>, params: &WaveParams<T>, mode: EnergyMode) -> Result<T> {
    params.check_state(state)?;
    let quad = quadratic_energy(state.position.coeffs(), state.velocity.coeffs());
    match mode {
        EnergyMode::Quadratic => Ok(quad),
        EnergyMode::Full => {
            let potential = if params.nonlinearity.is_zero() {
                T::zero()
            } else {
                let f = params.nonlinearity;
                params.basis.integrate_pointwise(&state.position, |u| f.antiderivative(u))?
            };
            Ok(quad + potential - dot(params.forcing.coeffs(), state.position.coeffs()))
        }
    }
}

#[inline]
fn quadratic_energy<T: Real>(position: &[T], velocity: &[T]) -> T {
    (h1_seminorm_sq(position) + norm_sq(velocity)) / T::lit(2.0)
}

/// Evaluates the modal right-hand side without reallocating.
///
/// The state vector is `[a_1..a_N, b_1..b_N, W]` where `W` accumulates the
/// net dissipated work `∫(k‖b‖^{p+2} − (Ψb, b)) dt`.
struct Rhs<'a, T> {
    params: &'a WaveParams<T>,
    grid: Vec<T>,
    fhat: Vec<T>,
    kb: Vec<T>,
    stiffness: Vec<T>,
}

impl<'a, T: Real> Rhs<'a, T> {
    fn new(params: &'a WaveParams<T>) -> Self {
        let n = params.modes();
        Self {
            params,
            grid: vec![T::zero(); params.basis.grid_size()],
            fhat: vec![T::zero(); n],
            kb: vec![T::zero(); n],
            stiffness: (1..=n).map(|j| params.basis.eigenvalue(j)).collect(),
        }
    }

    fn eval(&mut self, y: &[T], dy: &mut [T]) {
        let p = self.params;
        let n = p.modes();
        let (a, rest) = y.split_at(n);
        let b = &rest[..n];
        let (da, rest) = dy.split_at_mut(n);
        let (db, dw) = rest.split_at_mut(n);

        da.copy_from_slice(b);

        let bsq = norm_sq(b);
        let gamma = if bsq > T::zero() { p.damping * bsq.powf(p.exponent / T::lit(2.0)) } else { T::zero() };

        let nonlinear = !p.nonlinearity.is_zero();
        if nonlinear {
            p.basis.to_grid_into(a, &mut self.grid).expect("grid sized at construction");
            let f = p.nonlinearity;
            self.grid.iter_mut().for_each(|u| *u = f.eval(*u));
            p.basis.to_modal_into(&self.grid, &mut self.fhat).expect("modal sized at construction");
        }
        let kernel = !p.kernel.is_zero();
        if kernel {
            p.kernel.apply_into(b, &mut self.kb);
        }
        let h = p.forcing.coeffs();
        for i in 0..n {
            let mut v = -self.stiffness[i] * a[i] - gamma * b[i] + h[i];
            if nonlinear {
                v = v - self.fhat[i];
            }
            if kernel {
                v = v + self.kb[i];
            }
            db[i] = v;
        }
        let anti = if kernel { dot(&self.kb, b) } else { T::zero() };
        dw[0] = gamma * bsq - anti;
    }
}

/// Fixed-step RK4 driver over the augmented state.
struct Stepper<'a, T> {
    rhs: Rhs<'a, T>,
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(params: &'a WaveParams<T>) -> Self {
        let len = 2 * params.modes() + 1;
        Self {
            rhs: Rhs::new(params),
            k1: vec![T::zero(); len],
            k2: vec![T::zero(); len],
            k3: vec![T::zero(); len],
            k4: vec![T::zero(); len],
            tmp: vec![T::zero(); len],
        }
    }

    fn step(&mut self, y: &mut [T], dt: T) {
        let half = dt / T::lit(2.0);
        let sixth = dt / T::lit(6.0);
        self.rhs.eval(y, &mut self.k1);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = yi + half * k;
        }
        self.rhs.eval(&self.tmp, &mut self.k2);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = yi + half * k;
        }
        self.rhs.eval(&self.tmp, &mut self.k3);
        for ((t, &yi), &k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = yi + dt * k;
        }
        self.rhs.eval(&self.tmp, &mut self.k4);
        let two = T::lit(2.0);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = *yi + sixth * (self.k1[i] + two * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

fn pack<T: Real>(state: &PhaseState<T>) -> Vec<T> {
    let mut y = Vec::with_capacity(2 * state.modes() + 1);
    y.extend_from_slice(state.position.coeffs());
    y.extend_from_slice(state.velocity.coeffs());
    y.push(T::zero());
    y
}

fn unpack<T: Real>(y: &[T], n: usize) -> PhaseState<T> {
    PhaseState {
        position: ModalField::new(y[..n].to_vec()).expect("finite state"),
        velocity: ModalField::new(y[n..2 * n].to_vec()).expect("finite state"),
    }
}

/// Time derivative `(du, dv)` of the truncated system at `state`.
pub fn rhs<T: Real>(state: &PhaseState<T>, params: &WaveParams<T>) -> Result<(ModalField<T>, ModalField<T>)> {
    params.check_state(state)?;
    let n = params.modes();
    let y = pack(state);
    let mut dy = vec![T::zero(); y.len()];
    Rhs::new(params).eval(&y, &mut dy);
    Ok((ModalField::new(dy[..n].to_vec())?, ModalField::new(dy[n..2 * n].to_vec())?))
}

/// One classical RK4 step of size `dt`.
///
/// A non-finite result is reported as divergence at time `dt` after `state`.
pub fn step_rk4<T: Real>(state: &PhaseState<T>, params: &WaveParams<T>, dt: T) -> Result<PhaseState<T>> {
    params.check_state(state)?;
    if !(dt > T::zero()) || dt > params.max_stable_dt() {
        return Err(Error::invalid("dt", "step outside (0, 0.5/N]"));
    }
    let mut y = pack(state);
    Stepper::new(params).step(&mut y, dt);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { time: dt.to_f64_lossy() });
    }
    Ok(unpack(&y, params.modes()))
}

/// Sampled solution together with its cached scalar diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<PhaseState<T>>,
    pub energy_full: Vec<T>,
    pub energy_quadratic: Vec<T>,
    pub damping_power: Vec<T>,
    pub antidamping_power: Vec<T>,
    /// `∫₀ᵗ (k‖u_t‖^{p+2} − (Ψu_t, u_t))`, integrated alongside the state.
    pub dissipated_work: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn empty() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            energy_full: Vec::new(),
            energy_quadratic: Vec::new(),
            damping_power: Vec::new(),
            antidamping_power: Vec::new(),
            dissipated_work: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&PhaseState<T>> {
        self.states.last()
    }

    fn push(&mut self, t: T, y: &[T], params: &WaveParams<T>) -> Result<()> {
        let n = params.modes();
        let state = unpack(y, n);
        let v = state.velocity.coeffs();
        self.energy_full.push(energy(&state, params, EnergyMode::Full)?);
        self.energy_quadratic.push(quadratic_energy(state.position.coeffs(), v));
        self.damping_power.push(params.damping_power(v));
        self.antidamping_power.push(params.antidamping_power(v));
        self.dissipated_work.push(y[2 * n]);
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }
}

/// Integrate from `initial` over `[0, t_end]`, sampling every `sample_dt`.
pub fn simulate<T: Real>(
    initial: &PhaseState<T>,
    params: &WaveParams<T>,
    t_end: T,
    sample_dt: T,
) -> Result<Trajectory<T>> {
    params.validate()?;
    params.check_state(initial)?;
    if !initial.is_finite() {
        return Err(Error::Divergence { time: 0.0 });
    }
    if !(t_end > T::zero()) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    let steps_per_sample = steps_per_sample(params.dt, sample_dt)?;
    let samples = (t_end / sample_dt + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let dt = params.dt;

    let mut traj = Trajectory::empty();
    let mut y = pack(initial);
    traj.push(T::zero(), &y, params)?;
    let mut stepper = Stepper::new(params);
    let mut step_count = 0usize;
    for s in 1..=samples {
        for _ in 0..steps_per_sample {
            stepper.step(&mut y, dt);
            step_count += 1;
            if y.iter().any(|v| !v.is_finite()) {
                let time = dt.to_f64_lossy() * step_count as f64;
                return Err(Error::Divergence { time });
            }
        }
        traj.push(sample_dt * T::from_count(s), &y, params)?;
    }
    Ok(traj)
}

fn steps_per_sample<T: Real>(dt: T, sample_dt: T) -> Result<usize> {
    if !(sample_dt > T::zero()) {
        return Err(Error::invalid("sample_dt", "must be positive"));
    }
    let ratio = sample_dt / dt;
    let rounded = ratio.round();
    if rounded < T::one() || (ratio - rounded).abs() > T::lit(1e-6) * rounded {
        return Err(Error::invalid("sample_dt", format!("{sample_dt} is not an integer multiple of dt = {dt}")));
    }
    Ok(rounded.to_usize().expect("positive step count"))
}

/// `|E(T) − E(0) + ∫₀ᵀ k‖u_t‖^{p+2} − ∫₀ᵀ (Ψu_t, u_t)|` for a simulated run.
pub fn energy_balance_residual<T: Real>(trajectory: &Trajectory<T>) -> T {
    match (trajectory.energy_full.first(), trajectory.energy_full.last(), trajectory.dissipated_work.last()) {
        (Some(&e0), Some(&e1), Some(&w)) if trajectory.len() > 1 => (e1 - e0 + w).abs(),
        _ => T::zero(),
    }
}

/// Energy `½(‖z_t‖² + ‖∂ₓz‖²)` of the difference `z = w − v` at every sample.
pub fn difference_energy_series<T: Real>(traj_w: &Trajectory<T>, traj_v: &Trajectory<T>) -> Result<DecaySeries<T>> {
    check_matching_grids(traj_w, traj_v)?;
    let values = traj_w
        .states
        .iter()
        .zip(&traj_v.states)
        .map(|(w, v)| crate::spectral::phase_distance_sq(w, v) / T::lit(2.0))
        .collect();
    DecaySeries::new(traj_w.times.clone(), values)
}

pub(crate) fn check_matching_grids<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::TimeGridMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.times.iter().zip(&b.times).any(|(x, y)| x != y) {
        return Err(Error::TimeGridMismatch("sample times differ".into()));
    }
    if let (Some(x), Some(y)) = (a.states.first(), b.states.first()) {
        x.check_same_basis(y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn basis(n: usize) -> SpectralBasis<f64> {
        SpectralBasis::with_default_grid(n).unwrap()
    }

    fn linear(n: usize) -> WaveParams<f64> {
        WaveParams::builder(basis(n)).damping(0.0).build().unwrap()
    }

    fn smooth_state(n: usize) -> PhaseState<f64> {
        let pos = (1..=n).map(|j| 0.8 * 0.5f64.powi(j as i32 - 1)).collect();
        let vel = (1..=n).map(|j| if j <= 3 { 0.4 / j as f64 } else { 0.0 }).collect();
        PhaseState::new(ModalField::new(pos).unwrap(), ModalField::new(vel).unwrap()).unwrap()
    }

    #[test]
    fn rhs_restoring_force() {
        let p = linear(4);
        let s = PhaseState::new(ModalField::single_mode(4, 1, 1.0), ModalField::zeros(4)).unwrap();
        let (du, dv) = rhs(&s, &p).unwrap();
        assert_eq!(du.coeffs(), &[0.0; 4]);
        assert_eq!(dv.coeffs(), &[-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_forced_equilibrium() {
        let h = ModalField::single_mode(4, 1, 0.7);
        let p = WaveParams::builder(basis(4)).forcing(h).build().unwrap();
        let s = PhaseState::new(ModalField::single_mode(4, 1, 0.7), ModalField::zeros(4)).unwrap();
        let (du, dv) = rhs(&s, &p).unwrap();
        assert!(du.coeffs().iter().chain(dv.coeffs()).all(|&x| x == 0.0));
    }

    #[test]
    fn rhs_damping_term() {
        let p = WaveParams::builder(basis(4)).damping(1.0).exponent(1.0).build().unwrap();
        let s = PhaseState::new(ModalField::zeros(4), ModalField::single_mode(4, 1, 2.0)).unwrap();
        let (du, dv) = rhs(&s, &p).unwrap();
        assert_eq!(du.coeffs()[0], 2.0);
        assert_eq!(dv.coeffs(), &[-4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_cubic_is_pseudo_spectral_projection() {
        let n = 6;
        let b = basis(n);
        let f = Nonlinearity::Cubic { cubic: 1.0, linear: 0.3 };
        let p = WaveParams::builder(b.clone()).damping(0.0).nonlinearity(f).build().unwrap();
        let s = smooth_state(n);
        let (_, dv) = rhs(&s, &p).unwrap();
        // u³ − 0.3u of a band-limited field: project by fine trapezoid quadrature
        let u = |x: f64| {
            s.position
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, a)| a * (2.0 / PI).sqrt() * ((i + 1) as f64 * x).sin())
                .sum::<f64>()
        };
        let m = 20_000;
        let hq = PI / m as f64;
        for j in 1..=n {
            let proj: f64 = (1..m)
                .map(|i| i as f64 * hq)
                .map(|x| f.eval(u(x)) * (2.0 / PI).sqrt() * (j as f64 * x).sin())
                .sum::<f64>()
                * hq;
            let want = -((j * j) as f64) * s.position.coeffs()[j - 1] - proj;
            // cubic of an N-mode field has modes up to 3N; M = 2N aliases only beyond 2N+1
            assert!((dv.coeffs()[j - 1] - want).abs() < 1e-10, "mode {j}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        let b = basis(8);
        assert!(WaveParams::builder(b.clone()).dt(0.1).build().is_err());
        assert!(WaveParams::builder(b.clone()).exponent(0.0).build().is_err());
        assert!(WaveParams::builder(b.clone()).damping(-1.0).build().is_err());
        assert!(WaveParams::builder(b.clone())
            .nonlinearity(Nonlinearity::Cubic { cubic: 0.0, linear: 1.0 })
            .build()
            .is_err());
        assert!(WaveParams::builder(b.clone())
            .nonlinearity(Nonlinearity::Cubic { cubic: 1.0, linear: 5.0 })
            .build()
            .is_ok());
        assert!(WaveParams::builder(b.clone()).kernel(Kernel::zero(7)).build().is_err());
        assert!(WaveParams::builder(b).forcing(ModalField::zeros(3)).build().is_err());
    }

    #[test]
    fn rk4_harmonic_oscillator() {
        let p = linear(4);
        let s0 = PhaseState::new(ModalField::single_mode(4, 2, 1.0), ModalField::zeros(4)).unwrap();
        let t_end = 2.0;
        let err = |dt: f64| {
            let p = p.with_dt(dt).unwrap();
            let mut s = s0.clone();
            let steps = (t_end / dt).round() as usize;
            for _ in 0..steps {
                s = step_rk4(&s, &p, dt).unwrap();
            }
            (s.position.coeffs()[1] - (2.0 * t_end).cos()).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-6);
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_state_is_fixed() {
        let p = WaveParams::builder(basis(4)).build().unwrap();
        let z = PhaseState::zeros(4);
        assert_eq!(step_rk4(&z, &p, 1e-3).unwrap(), z);
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let p = WaveParams::builder(basis(2)).build().unwrap();
        let s = PhaseState::new(ModalField::new(vec![1e300, 0.0]).unwrap(), ModalField::new(vec![1e300, 0.0]).unwrap())
            .unwrap();
        match simulate(&s, &p, 1.0, 0.1) {
            Err(Error::Divergence { time }) => assert!(time > 0.0 && time <= 1.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn self_convergence_of_damped_run() {
        let n = 8;
        let b = basis(n);
        let base = WaveParams::builder(b)
            .nonlinearity(Nonlinearity::Cubic { cubic: 1.0, linear: 0.0 })
            .kernel(Kernel::rank_one(n, 1, 0.05).unwrap())
            .build()
            .unwrap();
        let s0 = smooth_state(n);
        let terminal = |dt: f64| {
            let p = base.with_dt(dt).unwrap();
            simulate(&s0, &p, 2.0, 0.2).unwrap().final_state().unwrap().clone()
        };
        let reference = terminal(0.04 / 8.0 / 8.0);
        let errs: Vec<f64> =
            [0.04, 0.02, 0.01].iter().map(|&dt| terminal(dt).phase_distance(&reference).unwrap()).collect();
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((12.0..20.0).contains(&r), "ratio {r} from {errs:?}");
        }
    }

    #[test]
    fn energy_examples() {
        let p = linear(4);
        for t in [0.0f64, 0.3, 1.7] {
            let s = PhaseState::new(
                ModalField::single_mode(4, 2, (2.0 * t).cos()),
                ModalField::single_mode(4, 2, -2.0 * (2.0 * t).sin()),
            )
            .unwrap();
            assert!((energy(&s, &p, EnergyMode::Full).unwrap() - 2.0).abs() < 1e-14);
        }
        assert_eq!(energy(&PhaseState::zeros(4), &p, EnergyMode::Full).unwrap(), 0.0);

        let cubic = WaveParams::builder(basis(8))
            .nonlinearity(Nonlinearity::Cubic { cubic: 1.0, linear: 0.0 })
            .build()
            .unwrap();
        let s = PhaseState::new(ModalField::single_mode(8, 1, 1.0), ModalField::zeros(8)).unwrap();
        // ½ + ¼ (2/π)² (3π/8) = ½ + 3/(8π)
        let oracle = 0.5 + 3.0 / (8.0 * PI);
        assert!((energy(&s, &cubic, EnergyMode::Full).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(energy(&s, &cubic, EnergyMode::Quadratic).unwrap(), 0.5);
    }

    #[test]
    fn conservative_run_keeps_energy() {
        let n = 32;
        let p = linear(n);
        let s0 = smooth_state(n);
        let traj = simulate(&s0, &p, 10.0, 0.5).unwrap();
        let e0 = traj.energy_full[0];
        assert!(traj.energy_full.iter().all(|e| ((e - e0) / e0).abs() <= 1e-8));
        assert!(energy_balance_residual(&traj) <= 1e-8);
    }

    #[test]
    fn pure_damping_decreases_energy() {
        let p = WaveParams::builder(basis(16)).build().unwrap();
        let traj = simulate(&smooth_state(16), &p, 5.0, 0.05).unwrap();
        assert!(traj.energy_full.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rank_one_antidamping_power() {
        let n = 8;
        let p = WaveParams::builder(basis(n)).kernel(Kernel::rank_one(n, 1, 0.1).unwrap()).build().unwrap();
        let traj = simulate(&smooth_state(n), &p, 2.0, 0.1).unwrap();
        for (s, a) in traj.states.iter().zip(&traj.antidamping_power) {
            let b1 = s.velocity.coeffs()[0];
            assert!((a - 0.1 * b1 * b1).abs() <= 1e-15);
        }
        assert!((p.kernel().frobenius_norm() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sample_grid_validation() {
        let p = WaveParams::builder(basis(4)).build().unwrap();
        assert!(simulate(&PhaseState::zeros(4), &p, 1.0, 0.0015).is_err());
        assert!(simulate(&PhaseState::zeros(4), &p, 0.0, 0.1).is_err());
        let t = simulate(&PhaseState::zeros(4), &p, 1.0, 0.25).unwrap();
        assert_eq!(t.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn residual_of_short_trajectories() {
        assert_eq!(energy_balance_residual(&Trajectory::<f64>::empty()), 0.0);
        let p = WaveParams::builder(basis(4)).build().unwrap();
        let mut t = simulate(&smooth_state(4), &p, 1.0, 0.5).unwrap();
        t.times.truncate(1);
        t.energy_full.truncate(1);
        t.dissipated_work.truncate(1);
        t.states.truncate(1);
        assert_eq!(energy_balance_residual(&t), 0.0);
    }

    #[test]
    fn difference_series_properties() {
        let n = 8;
        let p = WaveParams::builder(basis(n)).build().unwrap();
        let w = simulate(&smooth_state(n), &p, 1.0, 0.1).unwrap();
        let v = simulate(&PhaseState::zeros(n), &p, 1.0, 0.1).unwrap();
        let same = difference_energy_series(&w, &w).unwrap();
        assert!(same.values().iter().all(|&x| x == 0.0));
        let wv = difference_energy_series(&w, &v).unwrap();
        for (a, b) in wv.values().iter().zip(&w.energy_quadratic) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
        assert_eq!(difference_energy_series(&v, &w).unwrap().values(), wv.values());
        let short = simulate(&smooth_state(n), &p, 0.5, 0.1).unwrap();
        assert!(matches!(difference_energy_series(&w, &short), Err(Error::TimeGridMismatch(_))));
    }

    #[test]
    fn generic_over_f32() {
        let b = SpectralBasis::<f32>::with_default_grid(4).unwrap();
        let p = WaveParams::builder(b).build().unwrap();
        let s = PhaseState::new(ModalField::single_mode(4, 1, 1.0f32), ModalField::zeros(4)).unwrap();
        let traj = simulate(&s, &p, 1.0, 0.1).unwrap();
        assert!(traj.energy_full.last().unwrap() < &0.5f32);
    }
}
