use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::evolution::{check_dim, StateVector};

/// Uniform periodic grid `θ_j = 2πj/N` with trapezoid weights `2π/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CircleGrid {
    n: usize,
}

impl CircleGrid {
    /// `n` must be even and at least 4.
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidCount(format!(
                "circle grid size must be even and >= 4, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.node(j))
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn spacing(&self) -> f64 {
        self.weight()
    }

    /// Signed wavenumber of FFT bin `j`; the Nyquist bin maps to `+N/2`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        if j <= self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> FunctionSamples {
        FunctionSamples {
            grid: *self,
            values: self.nodes().map(f).collect(),
        }
    }
}

/// Values of a function on the nodes of a [`CircleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSamples {
    grid: CircleGrid,
    values: Vec<f64>,
}

impl FunctionSamples {
    pub fn new(grid: CircleGrid, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("function samples"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_state(grid: CircleGrid, x: StateVector) -> Result<Self> {
        Self::new(grid, x.into_entries())
    }

    pub fn to_state(&self) -> StateVector {
        StateVector::sup(self.values.clone())
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &FunctionSamples) -> Result<f64> {
        check_grid(self.grid, other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Cyclic shift by `k` nodes: `(shifted)_j = f_{j-k}`.
    pub fn rotate(&self, k: usize) -> FunctionSamples {
        let mut values = self.values.clone();
        values.rotate_right(k % self.grid.len());
        FunctionSamples {
            grid: self.grid,
            values,
        }
    }
}

pub(crate) fn check_grid(a: CircleGrid, b: CircleGrid) -> Result<()> {
    check_dim(a.len(), b.len())
}

/// Forward/inverse FFT plans for one grid size.
#[derive(Clone)]
pub(crate) struct Fourier {
    grid: CircleGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fourier {
    pub fn new(grid: CircleGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.len()),
            inverse: planner.plan_fft_inverse(grid.len()),
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform, normalised, real part.
    pub fn inverse(&self, mut modes: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut modes);
        let scale = 1.0 / self.grid.len() as f64;
        modes.into_iter().map(|c| c.re * scale).collect()
    }

    /// Fourier multiplier `(ik)^order`; odd orders drop the Nyquist mode.
    pub fn differentiate_modes(&self, modes: &mut [Complex64], order: u32) {
        let nyquist = self.grid.len() / 2;
        for (j, c) in modes.iter_mut().enumerate() {
            if order % 2 == 1 && j == nyquist {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
            let k = self.grid.wavenumber(j);
            *c *= Complex64::new(0.0, k).powu(order);
        }
    }

    pub fn derivative(&self, values: &[f64], order: u32) -> Vec<f64> {
        if order == 0 {
            return values.to_vec();
        }
        let mut modes = self.forward(values);
        self.differentiate_modes(&mut modes, order);
        self.inverse(modes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Fourier differentiation on the periodic grid.
pub fn spectral_derivative(f: &FunctionSamples, order: DerivativeOrder) -> FunctionSamples {
    let order = match order {
        DerivativeOrder::First => 1,
        DerivativeOrder::Second => 2,
    };
    FunctionSamples {
        grid: f.grid,
        values: Fourier::new(f.grid).derivative(&f.values, order),
    }
}

/// Highest order accepted by [`ck_norm`] at default resolutions.
pub const MAX_CK_ORDER: usize = 5;

/// `Σ_{λ=0..k} sup_j |f^{(λ)}(θ_j)|` in the single global angle chart.
pub fn ck_norm(f: &FunctionSamples, k: usize) -> Result<f64> {
    if k > MAX_CK_ORDER {
        return Err(Error::InvalidCount(format!(
            "C^k norm limited to k <= {MAX_CK_ORDER}, got {k}"
        )));
    }
    let fourier = Fourier::new(f.grid);
    Ok((0..=k as u32)
        .map(|order| {
            fourier
                .derivative(&f.values, order)
                .iter()
                .fold(0.0, |m: f64, v| m.max(v.abs()))
        })
        .sum())
}

/// Trigonometric interpolant of grid samples, evaluable at any angle.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    n: usize,
    modes: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(f: &FunctionSamples) -> Self {
        let modes = Fourier::new(f.grid).forward(&f.values);
        Self {
            n: f.grid.len(),
            modes,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let n = self.n;
        let half = n / 2;
        let mut acc = self.modes[0].re;
        for k in 1..half {
            let phase = Complex64::from_polar(1.0, k as f64 * theta);
            acc += 2.0 * (self.modes[k] * phase).re;
        }
        acc += self.modes[half].re * (half as f64 * theta).cos();
        acc / n as f64
    }
}
