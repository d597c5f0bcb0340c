use super::geometry::{dot, embed, tangent};
use super::grid::{Fourier, FunctionSamples};
use super::kernel::{kernel_row, min_resolved_step};
use super::path::DriftPath;
use crate::error::{Error, Result};
use crate::evolution::{fit_rate, RateFit};

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    pub dtaus: Vec<f64>,
    /// Normalised remainder `R(Δτ)` per step.
    pub remainders: Vec<f64>,
    /// Log-log fit of `|R|` against `Δτ`; `None` when every remainder vanishes.
    pub fit: Option<RateFit>,
}

/// Short-time expansion of the kernel average at node `y_idx`:
///
/// `Q_{τ-Δτ,τ} g(y) = g(y) + (Δφ_τ, ∇_M g(y)) + (Δτ/2) g''(y) + Δτ R(Δτ)`
///
/// with `Δφ_τ = φ(τ) - φ(τ-Δτ)` and `∇_M g = g' e_θ`.
pub fn asymptotics_probe(
    g: &FunctionSamples,
    y_idx: usize,
    tau: f64,
    phi: &DriftPath,
    dtau_list: &[f64],
) -> Result<AsymptoticsReport> {
    let grid = g.grid();
    if y_idx >= grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: y_idx,
        });
    }
    let fourier = Fourier::new(grid);
    let d1 = fourier.derivative(g.values(), 1)[y_idx];
    let d2 = fourier.derivative(g.values(), 2)[y_idx];
    let theta = grid.node(y_idx);
    let y = embed(theta);
    let gy = g.values()[y_idx];

    let mut remainders = Vec::with_capacity(dtau_list.len());
    for &dt in dtau_list {
        if !(dt > 0.0) {
            return Err(Error::InvalidStep(format!("Δτ = {dt} must be positive")));
        }
        if dt < min_resolved_step(grid) {
            return Err(Error::Resolution(format!(
                "Δτ = {dt} is not resolved by N = {}",
                grid.len()
            )));
        }
        phi.check_times(tau - dt, tau)?;
        let (a, b) = (phi.phi(tau), phi.phi(tau - dt));
        let dphi = [a[0] - b[0], a[1] - b[1]];
        let offset = [-dphi[0], -dphi[1]];
        let row = kernel_row(grid, y, offset, dt);
        let lhs = row.iter().zip(g.values()).map(|(k, v)| k * v).sum::<f64>() * grid.weight();
        let gradient_term = d1 * dot(dphi, tangent(theta));
        let r = (lhs - gy - gradient_term - 0.5 * dt * d2) / dt;
        if !r.is_finite() {
            return Err(Error::NonFinite("asymptotics remainder"));
        }
        remainders.push(r);
    }
    let records: Vec<(f64, f64)> = dtau_list
        .iter()
        .zip(&remainders)
        .map(|(&d, &r)| (d, r.abs()))
        .collect();
    let fit = fit_rate(&records).ok();
    Ok(AsymptoticsReport {
        dtaus: dtau_list.to_vec(),
        remainders,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::grid::CircleGrid;
    use crate::evolution::TimeInterval;

    fn path(profile: &str) -> DriftPath {
        DriftPath::new(
            profile.parse().unwrap(),
            TimeInterval::new(0.0, 1.0).unwrap(),
        )
    }

    fn dtaus() -> Vec<f64> {
        (4..=9).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn constants_have_no_remainder() {
        let grid = CircleGrid::new(1024).unwrap();
        let rep =
            asymptotics_probe(&grid.sample(|_| 1.0), 0, 0.6, &path("linear(1)"), &dtaus()).unwrap();
        assert!(rep.remainders.iter().all(|r| r.abs() <= 1e-10));
        assert!(rep.fit.is_none() || rep.remainders.iter().all(|r| r.abs() <= 1e-10));
    }

    #[test]
    fn remainder_shrinks_for_both_paths() {
        let grid = CircleGrid::new(1024).unwrap();
        let g = grid.sample(f64::cos);
        for profile in ["constant(0)", "linear(1)"] {
            let rep = asymptotics_probe(&g, 0, 0.6, &path(profile), &dtaus()).unwrap();
            let slope = rep.fit.unwrap().slope;
            assert!(slope >= 0.45, "{profile}: slope {slope}");
        }
    }

    #[test]
    fn heat_case_matches_von_mises_expansion() {
        // with φ constant and g = cos, LHS = I₁(1/Δτ)/I₀(1/Δτ) = 1 - Δτ/2 - Δτ²/8 + O(Δτ³)
        let grid = CircleGrid::new(1024).unwrap();
        let rep = asymptotics_probe(
            &grid.sample(f64::cos),
            0,
            0.6,
            &path("constant(0)"),
            &dtaus(),
        )
        .unwrap();
        for (dt, r) in rep.dtaus.iter().zip(&rep.remainders) {
            assert!((r + dt / 8.0).abs() < dt * dt, "Δτ {dt}: R = {r}");
        }
    }

    #[test]
    fn rejects_unresolved_steps() {
        let grid = CircleGrid::new(64).unwrap();
        let err = asymptotics_probe(&grid.sample(f64::cos), 0, 0.6, &path("linear(1)"), &[1e-5]);
        assert!(matches!(err, Err(Error::Resolution(_))));
    }
}
