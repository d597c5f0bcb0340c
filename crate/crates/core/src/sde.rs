//! Monte Carlo estimate of `E[g(X_t(s,θ₀))]` for the circle diffusion
//! `dθ = b(τ,θ) dτ + dB`, simulated by Euler–Maruyama in the angle chart.
//! The diffusion coefficient is constant in the chart, so the Stratonovich
//! and Itô forms coincide.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circle::DriftPath;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: usize,
    pub substeps: usize,
    pub seed: u64,
    /// Pairs path `2i` with the mirrored noise of path `2i + 1`.
    pub antithetic: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 100 || self.substeps < 10 {
            return Err(Error::InvalidCount(format!(
                "monte carlo needs paths >= 100 and substeps >= 10, got {} and {}",
                self.paths, self.substeps
            )));
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return Err(Error::InvalidCount(format!(
                "antithetic sampling needs an even path count, got {}",
                self.paths
            )));
        }
        Ok(())
    }

    pub fn step(&self, s: f64, t: f64) -> f64 {
        (t - s) / self.substeps as f64
    }

    /// Default weak-error allowance `5h`.
    pub fn bias_allowance(&self, s: f64, t: f64) -> f64 {
        5.0 * self.step(s, t)
    }

    pub fn pairing(&self) -> Pairing {
        if self.antithetic {
            Pairing::Antithetic
        } else {
            Pairing::Independent
        }
    }
}

/// Terminal angles in `[0, 2π)`, one per path, in path order. Path `i`
/// draws its normals from generator stream `i` (or `i / 2` when
/// antithetic), so the set does not depend on scheduling.
pub fn simulate_paths(
    s: f64,
    t: f64,
    theta0: f64,
    phi: &DriftPath,
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    if !(s < t) {
        return Err(Error::InvalidInterval(format!(
            "simulation needs s < t, got ({s}, {t})"
        )));
    }
    cfg.validate()?;
    phi.check_times(s, t)?;
    let h = cfg.step(s, t);
    let sqrt_h = h.sqrt();
    Ok((0..cfg.paths)
        .into_par_iter()
        .map(|path| {
            let (stream, sign) = if cfg.antithetic {
                (path / 2, if path % 2 == 0 { 1.0 } else { -1.0 })
            } else {
                (path, 1.0)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream as u64);
            let mut theta = theta0;
            for k in 0..cfg.substeps {
                let tau = s + k as f64 * h;
                let xi: f64 = rng.sample(StandardNormal);
                theta += phi.drift(tau, theta) * h + sign * sqrt_h * xi;
            }
            theta.rem_euclid(TAU)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    Independent,
    /// Consecutive terminals form antithetic pairs; the error bar is taken
    /// over pair means.
    Antithetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

pub fn mc_expectation<G>(terminals: &[f64], g: G, pairing: Pairing) -> Result<McEstimate>
where
    G: Fn(f64) -> f64 + Sync,
{
    if terminals.is_empty() {
        return Err(Error::InsufficientData("no terminal samples".into()));
    }
    let samples: Vec<f64> = match pairing {
        Pairing::Independent => terminals.par_iter().map(|&th| g(th)).collect(),
        Pairing::Antithetic => {
            if !terminals.len().is_multiple_of(2) {
                return Err(Error::InsufficientData(
                    "antithetic estimate needs an even number of terminals".into(),
                ));
            }
            terminals
                .par_chunks(2)
                .map(|pair| 0.5 * (g(pair[0]) + g(pair[1])))
                .collect()
        }
    };
    let m = samples.len() as f64;
    let mean = pairwise_sum(&samples) / m;
    let stderr = if samples.len() > 1 {
        let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&dev) / (m - 1.0)).sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        paths: terminals.len(),
    })
}

/// Fixed-shape pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Agree { gap: f64 },
    Disagree { gap: f64 },
}

impl Verdict {
    pub fn agrees(&self) -> bool {
        matches!(self, Verdict::Agree { .. })
    }

    pub fn gap(&self) -> f64 {
        match *self {
            Verdict::Agree { gap } | Verdict::Disagree { gap } => gap,
        }
    }
}

/// Agreement iff `|chernoff - mean| <= 3 stderr + bias_allowance`.
pub fn cross_validate(chernoff: f64, mc: &McEstimate, bias_allowance: f64) -> Verdict {
    let gap = (chernoff - mc.mean).abs();
    if gap <= 3.0 * mc.stderr + bias_allowance {
        Verdict::Agree { gap }
    } else {
        Verdict::Disagree { gap }
    }
}
