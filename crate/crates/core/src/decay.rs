//! Decay estimates for functions obeying a one-period difference inequality
//!
//! ```text
//! max{ω(t)^{1+α}, ω(t+T)^{1+α}} ≤ h(t)·[ω(t) − ω(t+T)],   t ≥ t₀
//! ```
//!
//! together with the attraction-rate envelopes built on them and the
//! regressions used to read decay exponents off sampled data.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Samples `(t_i, ω_i)` of a nonnegative function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries<T> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> DecaySeries<T> {
    /// Requires strictly increasing times and finite nonnegative values.
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), got: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "sample times must be strictly increasing"));
        }
        if let Some(i) = values.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::invalid("values", format!("value at index {i} is negative or not finite")));
        }
        Ok(Self { times, values })
    }

    /// Evaluate `f` on a uniform grid `t_i = t_start + i·step`.
    pub fn sample(t_start: T, step: T, count: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let times: Vec<T> = (0..count).map(|i| t_start + step * T::from_count(i)).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.times.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Samples with `t_min ≤ t ≤ t_max`.
    pub fn window(&self, t_min: T, t_max: T) -> impl Iterator<Item = (T, T)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied()).filter(move |&(t, _)| t >= t_min && t <= t_max)
    }

    fn nearest_index(&self, t: T) -> usize {
        let idx = self.times.partition_point(|&s| s < t);
        if idx == 0 {
            return 0;
        }
        if idx == self.times.len() {
            return idx - 1;
        }
        if (self.times[idx] - t) < (t - self.times[idx - 1]) {
            idx
        } else {
            idx - 1
        }
    }
}

/// The coefficient `h(t)` of the difference inequality.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient<T> {
    Constant(T),
    /// Positive monotone table, linearly interpolated between nodes.
    Tabulated {
        times: Vec<T>,
        values: Vec<T>,
    },
}

impl<T: Real> Coefficient<T> {
    pub fn tabulated(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::invalid("h", "table needs at least two nodes and matching lengths"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("h", "table times must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::invalid("h", "table values must be positive"));
        }
        let up = values.windows(2).all(|w| w[1] >= w[0]);
        let down = values.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            return Err(Error::invalid("h", "table values must be monotone"));
        }
        Ok(Coefficient::Tabulated { times, values })
    }

    /// Tabulate `f` on a uniform grid over `[start, end]`.
    pub fn tabulate(start: T, end: T, nodes: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let step = (end - start) / T::from_count(nodes.max(2) - 1);
        let times: Vec<T> = (0..nodes.max(2)).map(|i| start + step * T::from_count(i)).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::tabulated(times, values)
    }

    fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Constant(k) if !(*k > T::zero()) || !k.is_finite() => {
                Err(Error::invalid("h", "constant coefficient must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        match self {
            Coefficient::Constant(k) => Ok(*k),
            Coefficient::Tabulated { times, values } => {
                let (first, last) = (times[0], *times.last().unwrap());
                if t < first || t > last {
                    return Err(Error::invalid("h", format!("t = {t} outside the table [{first}, {last}]")));
                }
                let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (t - t0) / (t1 - t0);
                Ok(values[i - 1] + w * (values[i] - values[i - 1]))
            }
        }
    }

    /// `∫_a^b ds / h(s)`, exact for the piecewise-linear interpolant.
    pub fn reciprocal_integral(&self, a: T, b: T) -> Result<T> {
        if b <= a {
            return Ok(T::zero());
        }
        match self {
            Coefficient::Constant(k) => Ok((b - a) / *k),
            Coefficient::Tabulated { times, .. } => {
                let mut nodes = vec![a];
                nodes.extend(times.iter().copied().filter(|&s| s > a && s < b));
                nodes.push(b);
                let mut acc = T::zero();
                let mut prev = (a, self.eval(a)?);
                for &s in &nodes[1..] {
                    let cur = (s, self.eval(s)?);
                    acc = acc + linear_reciprocal_integral(cur.0 - prev.0, prev.1, cur.1);
                    prev = cur;
                }
                Ok(acc)
            }
        }
    }
}

/// `∫ ds / h` over an interval of length `dt` on which `h` runs linearly
/// from `h0` to `h1`.
fn linear_reciprocal_integral<T: Real>(dt: T, h0: T, h1: T) -> T {
    let ratio = h1 / h0;
    if (ratio - T::one()).abs() < T::lit(1e-6) {
        // series of ln(1 + x)/x around x = 0
        let x = ratio - T::one();
        dt / h0 * (T::one() - x / T::lit(2.0) + x * x / T::lit(3.0) - x * x * x / T::lit(4.0))
    } else {
        dt * ratio.ln() / (h1 - h0)
    }
}

/// Parameters `(α, T, t₀, h)` of the difference inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffIneqParams<T> {
    pub alpha: T,
    pub period: T,
    pub t0: T,
    pub h: Coefficient<T>,
}

impl<T: Real> DiffIneqParams<T> {
    pub fn new(alpha: T, period: T, t0: T, h: Coefficient<T>) -> Result<Self> {
        let p = Self { alpha, period, t0, h };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(alpha: T, period: T, t0: T, k0: T) -> Result<Self> {
        Self::new(alpha, period, t0, Coefficient::Constant(k0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        if !(self.period > T::zero()) {
            return Err(Error::invalid("T", "must be positive"));
        }
        if !(self.t0 >= T::zero()) {
            return Err(Error::invalid("t0", "must be nonnegative"));
        }
        self.h.validate()
    }
}

/// Upper bound on `ω(t)` for `t ≥ t₀ + 2T`:
/// `{inf ω^{−α} + (α/T)∫_{t₀+T}^{t−T} ds/h(s)}^{−1/α}`.
///
/// `window_inf` is the value `ω̄` with `ω̄^{−α} = inf ω^{−α}` over
/// `[t₀, t₀ + T]`, that is the supremum of `ω` on that window.
pub fn difference_inequality_bound<T: Real>(params: &DiffIneqParams<T>, window_inf: T, t: T) -> Result<T> {
    params.validate()?;
    if !(window_inf > T::zero()) {
        return Err(Error::invalid("window_inf", "must be positive"));
    }
    let onset = params.t0 + params.period + params.period;
    if t < onset {
        return Err(Error::BelowValidity { t: t.to_f64_lossy(), onset: onset.to_f64_lossy() });
    }
    let integral = params.h.reciprocal_integral(params.t0 + params.period, t - params.period)?;
    let inner = window_inf.powf(-params.alpha) + params.alpha / params.period * integral;
    Ok(inner.powf(-params.alpha.recip()))
}

/// Extremal sequence attaining the difference inequality with equality at
/// the times `t₀ + nT`:
///
/// `ω_n^{1+α} = h(t₀ + nT)·(ω_n − ω_{n+1})`.
///
/// A nonnegative continuation exists only while `ω_n^α ≤ h(t₀ + nT)`; a start
/// violating this admits no solution of the inequality and is rejected.
pub fn recurrence_oracle<T: Real>(params: &DiffIneqParams<T>, omega0: T, n_steps: usize) -> Result<DecaySeries<T>> {
    params.validate()?;
    if !(omega0 >= T::zero()) || !omega0.is_finite() {
        return Err(Error::invalid("omega0", "must be finite and nonnegative"));
    }
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut w = omega0;
    times.push(params.t0);
    values.push(w);
    for n in 0..n_steps {
        let t = params.t0 + params.period * T::from_count(n);
        let h = params.h.eval(t)?;
        let next = if w == T::zero() { T::zero() } else { w - w.powf(T::one() + params.alpha) / h };
        if next < T::zero() {
            return Err(Error::invalid(
                "omega0",
                format!("omega^alpha exceeds h at t = {t}; no nonnegative solution of the inequality exists"),
            ));
        }
        w = next;
        times.push(t + params.period);
        values.push(w);
    }
    DecaySeries::new(times, values)
}

/// Outcome of [`check_difference_inequality`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport<T> {
    pub holds: bool,
    /// Smallest `h(t)(ω(t) − ω(t+T)) − max{ω(t), ω(t+T)}^{1+α}` found.
    pub worst_slack: T,
    pub worst_index: usize,
}

/// Slack below which a pair counts as violating the inequality.
pub const INEQUALITY_TOLERANCE: f64 = 1e-12;

/// Test the difference inequality at every sample `t_i ≥ t₀` whose shifted
/// time `t_i + T` lies inside the series; `ω(t_i + T)` is read at the nearest
/// sample.
pub fn check_difference_inequality<T: Real>(
    series: &DecaySeries<T>,
    params: &DiffIneqParams<T>,
) -> Result<InequalityReport<T>> {
    params.validate()?;
    let (Some(&first), Some(&last)) = (series.times.first(), series.times.last()) else {
        return Err(Error::DegenerateWindow("empty series".into()));
    };
    if last - first < params.period {
        return Err(Error::DegenerateWindow(format!("series spans {} < T = {}", last - first, params.period)));
    }
    let exponent = T::one() + params.alpha;
    let mut report = InequalityReport { holds: true, worst_slack: T::infinity(), worst_index: 0 };
    for (i, (&t, &w)) in series.times.iter().zip(&series.values).enumerate() {
        if t < params.t0 || t + params.period > last {
            continue;
        }
        let j = series.nearest_index(t + params.period);
        let ws = series.values[j];
        let slack = params.h.eval(t)? * (w - ws) - w.max(ws).powf(exponent);
        if slack < report.worst_slack {
            report.worst_slack = slack;
            report.worst_index = i;
        }
    }
    report.holds = report.worst_slack >= -T::lit(INEQUALITY_TOLERANCE);
    Ok(report)
}

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub intercept: T,
    pub slope: T,
    /// Coefficient of determination; 1 for a zero-variance response.
    pub r_squared: T,
    pub max_abs_residual: T,
    pub points: usize,
}

pub fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> Result<LinearFit<T>> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::DegenerateWindow(format!("{n} points, need at least 3")));
    }
    let nf = T::from_count(n);
    let mx = xs.iter().copied().sum::<T>() / nf;
    let my = ys.iter().copied().sum::<T>() / nf;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::DegenerateWindow("abscissae have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = T::zero();
    let mut max_res = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_res = ss_res + r * r;
        max_res = max_res.max(r.abs());
    }
    let r_squared = if syy == T::zero() { T::one() } else { (T::one() - ss_res / syy).max(T::zero()).min(T::one()) };
    Ok(LinearFit { intercept, slope, r_squared, max_abs_residual: max_res, points: n })
}

fn windowed<T: Real>(series: &DecaySeries<T>, window: (T, T)) -> Result<(Vec<T>, Vec<T>)> {
    let (t_min, t_max) = window;
    if !(t_max > t_min) {
        return Err(Error::DegenerateWindow(format!("[{t_min}, {t_max}] is empty")));
    }
    let mut ts = Vec::new();
    let mut ws = Vec::new();
    for (i, (&t, &w)) in series.times.iter().zip(&series.values).enumerate() {
        if t < t_min || t > t_max {
            continue;
        }
        if !(w > T::zero()) {
            return Err(Error::NonPositiveValue { index: i });
        }
        ts.push(t);
        ws.push(w);
    }
    if ts.len() < 3 {
        return Err(Error::DegenerateWindow(format!("{} samples in [{t_min}, {t_max}]", ts.len())));
    }
    Ok((ts, ws))
}

/// Least-squares fit of `ω(t)^{−p} ≈ a + b·t` over `window`.
pub fn fit_inverse_power<T: Real>(series: &DecaySeries<T>, p: T, window: (T, T)) -> Result<LinearFit<T>> {
    if !(p > T::zero()) {
        return Err(Error::invalid("p", "must be positive"));
    }
    let (ts, ws) = windowed(series, window)?;
    let ys: Vec<T> = ws.iter().map(|w| w.powf(-p)).collect();
    linear_fit(&ts, &ys)
}

/// Slope of `log ω` against `log t` over `window` (all times positive).
pub fn fit_loglog_exponent<T: Real>(series: &DecaySeries<T>, window: (T, T)) -> Result<LinearFit<T>> {
    let (ts, ws) = windowed(series, window)?;
    if !(ts[0] > T::zero()) {
        return Err(Error::DegenerateWindow("log-log fit needs positive times".into()));
    }
    let xs: Vec<T> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<T> = ws.iter().map(|w| w.ln()).collect();
    linear_fit(&xs, &ys)
}

/// Constants of the attraction-rate envelopes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeParams<T> {
    /// Abstract quasi-stable systems with exponent `β ∈ (0, 1)`.
    Abstract { alpha_b0: T, beta: T, c: T, period: T, t0: T, t_star: T },
    /// Distance to the attractor for the nonlocally damped wave equation.
    Wave { alpha_b0: T, p: T, k: T, c_p: T, t0: T, t_star: T },
    /// Noncompactness bound for the wave equation at a finite period `T`;
    /// its rate tends to the `Wave` rate as `T → 0`.
    WavePeriodic { alpha_b0: T, p: T, k: T, c_p: T, period: T, t0: T, t_star: T },
}

impl<T: Real> EnvelopeParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: T, name: &'static str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive"))
            }
        };
        let nonneg = |v: T, name: &'static str| {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be nonnegative"))
            }
        };
        match *self {
            EnvelopeParams::Abstract { alpha_b0, beta, c, period, t0, t_star } => {
                pos(alpha_b0, "alpha_b0")?;
                if !(beta > T::zero() && beta < T::one()) {
                    return Err(Error::invalid("beta", "must lie strictly inside (0, 1)"));
                }
                pos(c, "C")?;
                pos(period, "T")?;
                nonneg(t0, "t0")?;
                nonneg(t_star, "t_star")
            }
            EnvelopeParams::Wave { alpha_b0, p, k, c_p, t0, t_star } => {
                pos(alpha_b0, "alpha_b0")?;
                pos(p, "p")?;
                pos(k, "k")?;
                pos(c_p, "C_p")?;
                nonneg(t0, "t0")?;
                nonneg(t_star, "t_star")
            }
            EnvelopeParams::WavePeriodic { alpha_b0, p, k, c_p, period, t0, t_star } => {
                pos(alpha_b0, "alpha_b0")?;
                pos(p, "p")?;
                pos(k, "k")?;
                pos(c_p, "C_p")?;
                pos(period, "T")?;
                nonneg(t0, "t0")?;
                nonneg(t_star, "t_star")
            }
        }
    }

    /// First time at which the envelope is defined.
    pub fn onset(&self) -> T {
        let two = T::lit(2.0);
        match *self {
            EnvelopeParams::Abstract { period, t0, t_star, .. } => t0 + t_star + two * period,
            EnvelopeParams::Wave { t0, t_star, .. } => t0 + t_star + T::one(),
            EnvelopeParams::WavePeriodic { period, t0, t_star, .. } => t0 + t_star + two * period,
        }
    }

    /// Growth rate of `envelope^{−1/decay_exponent}` per unit time.
    pub fn rate(&self) -> T {
        let two = T::lit(2.0);
        match *self {
            EnvelopeParams::Abstract { beta, c, period, .. } => {
                (T::one() - beta) / (period * beta * (T::one() + two * c).powf(beta.recip()))
            }
            EnvelopeParams::Wave { p, k, c_p, .. } => p * k * c_p / two.powf(p + two),
            EnvelopeParams::WavePeriodic { p, k, c_p, period, .. } => {
                let e = two / (p + two);
                let inner = period.powf(e) + two.powf(p / (p + two) + T::one()) * (k * c_p).powf(-e);
                p / (two * inner.powf((p + two) / two))
            }
        }
    }

    /// Exponent `γ` with `envelope ~ t^{γ}` at large `t`.
    pub fn decay_exponent(&self) -> T {
        match *self {
            EnvelopeParams::Abstract { beta, .. } => beta / (T::lit(2.0) * (beta - T::one())),
            EnvelopeParams::Wave { p, .. } | EnvelopeParams::WavePeriodic { p, .. } => -p.recip(),
        }
    }

    fn alpha_b0(&self) -> T {
        match *self {
            EnvelopeParams::Abstract { alpha_b0, .. }
            | EnvelopeParams::Wave { alpha_b0, .. }
            | EnvelopeParams::WavePeriodic { alpha_b0, .. } => alpha_b0,
        }
    }
}

/// Envelope value at time `t` (at or after [`EnvelopeParams::onset`]).
pub fn envelope<T: Real>(params: &EnvelopeParams<T>, t: T) -> Result<T> {
    params.validate()?;
    let onset = params.onset();
    if t < onset {
        return Err(Error::BelowValidity { t: t.to_f64_lossy(), onset: onset.to_f64_lossy() });
    }
    let gamma = params.decay_exponent();
    let alpha = params.alpha_b0();
    // α·(1 + rate·(t − onset)·α^{−1/γ})^γ, exact at the onset
    let growth = params.rate() * (t - onset) * alpha.powf(-gamma.recip());
    Ok(alpha * (T::one() + growth).powf(gamma))
}
