//! Reference evolution family for `A_σ = b(σ,·)∂_θ + ½∂²_θ`, obtained by
//! integrating the final-value problem `∂_σ u = -A_σ u`, `u(t) = g`.

use rustfft::num_complex::Complex64;

use super::grid::{CircleGrid, Fourier, FunctionSamples};
use super::path::DriftPath;
use crate::error::{Error, Result};
use crate::evolution::{check_dim, EvolutionOracle, StateVector};

/// Integrating-factor RK4 in Fourier space. With `τ = t - σ` the problem
/// becomes `v_τ = ½ v'' + b(t - τ, θ) v'`; the diffusion part is applied
/// exactly through `e^{-k²h/2}` and RK4 handles the drift.
pub fn spectral_reference(
    s: f64,
    t: f64,
    phi: &DriftPath,
    g: &FunctionSamples,
    steps: usize,
) -> Result<FunctionSamples> {
    if !(s < t) {
        return Err(Error::InvalidInterval(format!(
            "reference needs s < t, got ({s}, {t})"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidCount("reference needs steps >= 1".into()));
    }
    phi.check_times(s, t)?;
    let grid = g.grid();
    let fourier = Fourier::new(grid);
    let n = grid.len();
    let h = (t - s) / steps as f64;
    let half: Vec<f64> = (0..n)
        .map(|j| (-grid.wavenumber(j).powi(2) * h / 4.0).exp())
        .collect();
    let full: Vec<f64> = half.iter().map(|e| e * e).collect();
    let thetas: Vec<f64> = grid.nodes().collect();

    // drift term b(σ,·) ∂_θ v, in Fourier space
    let drift = |sigma: f64, modes: &[Complex64]| -> Vec<Complex64> {
        let mut d = modes.to_vec();
        fourier.differentiate_modes(&mut d, 1);
        let dv = fourier.inverse(d);
        let prod: Vec<f64> = thetas
            .iter()
            .zip(&dv)
            .map(|(&th, dv)| phi.drift(sigma, th) * dv)
            .collect();
        fourier.forward(&prod)
    };
    let scale = |e: &[f64], v: &[Complex64]| -> Vec<Complex64> {
        e.iter().zip(v).map(|(e, v)| v * *e).collect()
    };
    let axpy = |a: &[Complex64], c: f64, b: &[Complex64]| -> Vec<Complex64> {
        a.iter().zip(b).map(|(a, b)| a + b * c).collect()
    };

    let mut v = fourier.forward(g.values());
    for step in 0..steps {
        let sigma = t - step as f64 * h;
        let k1 = drift(sigma, &v);
        let ev = scale(&half, &v);
        let a = scale(&half, &axpy(&v, 0.5 * h, &k1));
        let k2 = drift(sigma - 0.5 * h, &a);
        let b = axpy(&ev, 0.5 * h, &k2);
        let k3 = drift(sigma - 0.5 * h, &b);
        let c = axpy(&scale(&full, &v), h, &scale(&half, &k3));
        let k4 = drift(sigma - h, &c);
        v = (0..n)
            .map(|j| {
                full[j] * v[j]
                    + (full[j] * k1[j] + 2.0 * half[j] * (k2[j] + k3[j]) + k4[j]) * (h / 6.0)
            })
            .collect();
    }
    FunctionSamples::new(grid, fourier.inverse(v))
}

/// [`spectral_reference`] as an evolution oracle with a fixed step count per call.
#[derive(Debug, Clone)]
pub struct SpectralEvolution {
    pub grid: CircleGrid,
    pub path: DriftPath,
    pub steps: usize,
}

impl EvolutionOracle for SpectralEvolution {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn evolve(&self, s: f64, t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.grid.len(), x.len())?;
        if s == t {
            return Ok(x.clone());
        }
        let g = FunctionSamples::new(self.grid, x.entries().to_vec())?;
        Ok(spectral_reference(s, t, &self.path, &g, self.steps)?.to_state())
    }
}
