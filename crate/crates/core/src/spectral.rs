//! Truncated Dirichlet sine basis on `(0, π)`.
//!
//! Fields are stored as coordinates against the orthonormal eigenfunctions
//! `e_j(x) = √(2/π)·sin(jx)` of `−∂²ₓ`, whose eigenvalues are `j²`. Grid
//! values live on the interior uniform grid `x_m = mπ/(M+1)`, `m = 1..M`, and
//! the modal↔grid maps are a direct type-I discrete sine transform with
//! quadrature weight `π/(M+1)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{norm_sq, Real};

/// Direction of a [`SpectralBasis::transform`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToGrid,
    ToModal,
}

/// First `N` sine eigenfunctions sampled on an `M`-point interior grid.
#[derive(Debug, Clone)]
pub struct SpectralBasis<T> {
    modes: usize,
    grid: usize,
    // table[m * modes + j] = e_{j+1}(x_{m+1})
    table: Arc<[T]>,
    weight: T,
}

impl<T: Real> SpectralBasis<T> {
    /// Basis with `modes` sine modes and `grid` collocation points.
    ///
    /// Requires `modes ≥ 1` and `grid ≥ 2·modes`, which leaves room to
    /// dealias cubic nonlinearities.
    pub fn new(modes: usize, grid: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("modes", "need at least one mode"));
        }
        if grid < 2 * modes {
            return Err(Error::invalid("grid", format!("grid size {grid} below 2 x {modes} modes")));
        }
        let h = T::PI() / T::from_count(grid + 1);
        let amp = (T::lit(2.0) / T::PI()).sqrt();
        let mut table = Vec::with_capacity(grid * modes);
        for m in 1..=grid {
            let x = h * T::from_count(m);
            for j in 1..=modes {
                table.push(amp * (T::from_count(j) * x).sin());
            }
        }
        Ok(Self { modes, grid, table: table.into(), weight: h })
    }

    /// Basis with the dealiasing default `M = 2N`.
    pub fn with_default_grid(modes: usize) -> Result<Self> {
        Self::new(modes, 2 * modes)
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    pub fn grid_size(&self) -> usize {
        self.grid
    }

    /// Eigenvalue `λ_j = j²` of mode `j` (1-based).
    #[inline]
    pub fn eigenvalue(&self, j: usize) -> T {
        let j = T::from_count(j);
        j * j
    }

    /// Quadrature weight `π/(M+1)` of every interior grid point.
    #[inline]
    pub fn quadrature_weight(&self) -> T {
        self.weight
    }

    /// Interior grid abscissae `x_1 .. x_M`.
    pub fn grid_points(&self) -> Vec<T> {
        (1..=self.grid).map(|m| self.weight * T::from_count(m)).collect()
    }

    /// Evaluate modal coefficients on the grid.
    pub fn to_grid(&self, field: &ModalField<T>) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.grid];
        self.to_grid_into(field.coeffs(), &mut out)?;
        Ok(out)
    }

    /// Project grid samples onto the modes by DST-I quadrature.
    pub fn to_modal(&self, samples: &[T]) -> Result<ModalField<T>> {
        let mut out = vec![T::zero(); self.modes];
        self.to_modal_into(samples, &mut out)?;
        Ok(ModalField { coeffs: out })
    }

    /// Slice-level version of [`Self::to_grid`] for hot loops.
    pub fn to_grid_into(&self, coeffs: &[T], out: &mut [T]) -> Result<()> {
        self.check_modal(coeffs.len())?;
        self.check_grid(out.len())?;
        for (row, slot) in self.table.chunks_exact(self.modes).zip(out.iter_mut()) {
            *slot = row.iter().zip(coeffs).fold(T::zero(), |acc, (&e, &a)| acc + e * a);
        }
        Ok(())
    }

    /// Slice-level version of [`Self::to_modal`] for hot loops.
    pub fn to_modal_into(&self, samples: &[T], out: &mut [T]) -> Result<()> {
        self.check_grid(samples.len())?;
        self.check_modal(out.len())?;
        out.iter_mut().for_each(|c| *c = T::zero());
        for (row, &s) in self.table.chunks_exact(self.modes).zip(samples) {
            for (c, &e) in out.iter_mut().zip(row) {
                *c = *c + e * s;
            }
        }
        out.iter_mut().for_each(|c| *c = *c * self.weight);
        Ok(())
    }

    /// Direction-tagged transform over raw slices.
    pub fn transform(&self, input: &[T], direction: Direction) -> Result<Vec<T>> {
        match direction {
            Direction::ToGrid => {
                let mut out = vec![T::zero(); self.grid];
                self.to_grid_into(input, &mut out)?;
                Ok(out)
            }
            Direction::ToModal => {
                let mut out = vec![T::zero(); self.modes];
                self.to_modal_into(input, &mut out)?;
                Ok(out)
            }
        }
    }

    /// Grid quadrature of a pointwise functional `∫ g(u(x)) dx`.
    pub fn integrate_pointwise(&self, field: &ModalField<T>, g: impl Fn(T) -> T) -> Result<T> {
        let samples = self.to_grid(field)?;
        Ok(samples.into_iter().map(g).sum::<T>() * self.weight)
    }

    /// `(∫|u|^q dx)^{1/q}` by grid quadrature, `q ≥ 1`.
    pub fn lp_grid_norm(&self, field: &ModalField<T>, exponent: T) -> Result<T> {
        if !(exponent >= T::one()) {
            return Err(Error::invalid("exponent", "Lp exponent must be >= 1"));
        }
        let integral = self.integrate_pointwise(field, |u| u.abs().powf(exponent))?;
        Ok(integral.powf(exponent.recip()))
    }

    fn check_modal(&self, len: usize) -> Result<()> {
        if len != self.modes {
            return Err(Error::Dimension { expected: self.modes, got: len });
        }
        Ok(())
    }

    fn check_grid(&self, len: usize) -> Result<()> {
        if len != self.grid {
            return Err(Error::Dimension { expected: self.grid, got: len });
        }
        Ok(())
    }
}

/// Coordinates of a field against the orthonormal sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField<T> {
    coeffs: Vec<T>,
}

impl<T: Real> ModalField<T> {
    /// Rejects non-finite coefficients.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid("coeffs", format!("entry {i} is not finite")));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(modes: usize) -> Self {
        Self { coeffs: vec![T::zero(); modes] }
    }

    /// `amplitude · e_j` (1-based `j`).
    pub fn single_mode(modes: usize, j: usize, amplitude: T) -> Self {
        let mut f = Self::zeros(modes);
        f.coeffs[j - 1] = amplitude;
        f
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    /// L² norm via Parseval.
    pub fn l2_norm(&self) -> T {
        norm_sq(&self.coeffs).sqrt()
    }

    /// `‖∂ₓu‖ = (Σ j² a_j²)^{1/2}`.
    pub fn h1_seminorm(&self) -> T {
        h1_seminorm_sq(&self.coeffs).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

impl<T> From<ModalField<T>> for Vec<T> {
    fn from(f: ModalField<T>) -> Self {
        f.coeffs
    }
}

#[inline]
pub(crate) fn h1_seminorm_sq<T: Real>(coeffs: &[T]) -> T {
    coeffs.iter().enumerate().fold(T::zero(), |acc, (i, &a)| {
        let j = T::from_count(i + 1);
        acc + j * j * a * a
    })
}

/// A point `(u, u_t)` of the phase space `H¹₀ × L²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    pub position: ModalField<T>,
    pub velocity: ModalField<T>,
}

impl<T: Real> PhaseState<T> {
    pub fn new(position: ModalField<T>, velocity: ModalField<T>) -> Result<Self> {
        if position.modes() != velocity.modes() {
            return Err(Error::BasisMismatch(position.modes(), velocity.modes()));
        }
        Ok(Self { position, velocity })
    }

    pub fn zeros(modes: usize) -> Self {
        Self { position: ModalField::zeros(modes), velocity: ModalField::zeros(modes) }
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.position.modes()
    }

    pub fn phase_norm_sq(&self) -> T {
        h1_seminorm_sq(self.position.coeffs()) + norm_sq(self.velocity.coeffs())
    }

    /// `(‖∂ₓu‖² + ‖u_t‖²)^{1/2}`.
    pub fn phase_norm(&self) -> T {
        self.phase_norm_sq().sqrt()
    }

    /// `H¹₀ × L²` distance to `other`.
    pub fn phase_distance(&self, other: &Self) -> Result<T> {
        self.check_same_basis(other)?;
        Ok(phase_distance_sq(self, other).sqrt())
    }

    /// Phase norm of the high-mode part `Q_{N₀}` (modes `N₀+1..N`).
    pub fn tail_norm(&self, cutoff: usize) -> Result<T> {
        let n = self.modes();
        if cutoff > n {
            return Err(Error::CutoffOutOfRange { cutoff, modes: n });
        }
        let pos = &self.position.coeffs()[cutoff..];
        let h1 = pos.iter().enumerate().fold(T::zero(), |acc, (i, &a)| {
            let j = T::from_count(cutoff + i + 1);
            acc + j * j * a * a
        });
        Ok((h1 + norm_sq(&self.velocity.coeffs()[cutoff..])).sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }

    pub(crate) fn check_same_basis(&self, other: &Self) -> Result<()> {
        if self.modes() != other.modes() {
            return Err(Error::BasisMismatch(self.modes(), other.modes()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn phase_distance_sq<T: Real>(a: &PhaseState<T>, b: &PhaseState<T>) -> T {
    let mut acc = T::zero();
    let (ap, bp) = (a.position.coeffs(), b.position.coeffs());
    let (av, bv) = (a.velocity.coeffs(), b.velocity.coeffs());
    for i in 0..ap.len() {
        let j = T::from_count(i + 1);
        let du = ap[i] - bp[i];
        let dv = av[i] - bv[i];
        acc = acc + j * j * du * du + dv * dv;
    }
    acc
}
