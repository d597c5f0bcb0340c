//! Drifted chordal-Gaussian kernels restricted to the circle, and the
//! Chernoff transport built from them.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::geometry::{embed, Point2};
use super::grid::{check_grid, CircleGrid, Fourier, FunctionSamples};
use super::path::DriftPath;
use crate::error::{Error, Result};
use crate::evolution::{
    check_dim, chernoff_apply, GeneratorFamily, NormKind, Partition, PropagatorFamily, StateVector,
    TimeInterval,
};

/// Grid nodes required per kernel standard deviation `√(t - s)`.
pub const NODES_PER_WIDTH: f64 = 2.0;

/// Smallest step whose Gaussian width the grid resolves.
pub fn min_resolved_step(grid: CircleGrid) -> f64 {
    let h = NODES_PER_WIDTH * 2.0 * PI / grid.len() as f64;
    h * h
}

/// Row-stochastic (w.r.t. the trapezoid weights) kernel of `Q_{t1,t2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    grid: CircleGrid,
    t1: f64,
    t2: f64,
    entries: Vec<f64>,
}

impl KernelMatrix {
    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn times(&self) -> (f64, f64) {
        (self.t1, self.t2)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.len();
        &self.entries[j * n..(j + 1) * n]
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.grid.len() + k]
    }

    /// `Σ_k entries[j,k] w_k` per row.
    pub fn row_masses(&self) -> Vec<f64> {
        let w = self.grid.weight();
        (0..self.grid.len())
            .map(|j| self.row(j).iter().sum::<f64>() * w)
            .collect()
    }
}

fn check_resolution(grid: CircleGrid, s: f64, t: f64) -> Result<()> {
    let min = min_resolved_step(grid);
    if t - s < min {
        let needed = (NODES_PER_WIDTH * 2.0 * PI / (t - s).sqrt()).ceil() as usize;
        return Err(Error::Resolution(format!(
            "step {} on [{s}, {t}] is below the resolved minimum {min} for N = {}; use N >= {needed}",
            t - s,
            grid.len()
        )));
    }
    Ok(())
}

/// One normalised kernel row at source point `z`:
/// `exp(-|z - y_k - (φ(s) - φ(t))|² / 2(t-s)) / Z`.
pub(crate) fn kernel_row(grid: CircleGrid, z: Point2, offset: Point2, dt: f64) -> Vec<f64> {
    let c = [z[0] - offset[0], z[1] - offset[1]];
    let exponents: Vec<f64> = grid
        .nodes()
        .map(|th| {
            let y = embed(th);
            let (dx, dy) = (c[0] - y[0], c[1] - y[1]);
            -(dx * dx + dy * dy) / (2.0 * dt)
        })
        .collect();
    // shift by the row maximum so the normaliser cannot underflow
    let peak = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut row: Vec<f64> = exponents.into_iter().map(|e| (e - peak).exp()).collect();
    let z_norm = row.iter().sum::<f64>() * grid.weight();
    for v in &mut row {
        *v /= z_norm;
    }
    row
}

pub fn build_q_kernel(grid: CircleGrid, s: f64, t: f64, phi: &DriftPath) -> Result<KernelMatrix> {
    if !(s < t) {
        return Err(Error::InvalidInterval(format!(
            "kernel needs s < t, got ({s}, {t})"
        )));
    }
    phi.check_times(s, t)?;
    check_resolution(grid, s, t)?;
    let (ps, pt) = (phi.phi(s), phi.phi(t));
    let offset = [ps[0] - pt[0], ps[1] - pt[1]];
    let n = grid.len();
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        row.copy_from_slice(&kernel_row(grid, embed(grid.node(j)), offset, t - s))
    });
    Ok(KernelMatrix {
        grid,
        t1: s,
        t2: t,
        entries,
    })
}

/// `(Qf)_j = Σ_k entries[j,k] f_k w_k`
pub fn apply_q(kernel: &KernelMatrix, f: &FunctionSamples) -> Result<FunctionSamples> {
    check_grid(kernel.grid, f.grid())?;
    let w = kernel.grid.weight();
    let values: Vec<f64> = (0..kernel.grid.len())
        .into_par_iter()
        .map(|j| {
            kernel
                .row(j)
                .iter()
                .zip(f.values())
                .map(|(k, v)| k * v)
                .sum::<f64>()
                * w
        })
        .collect();
    FunctionSamples::new(kernel.grid, values)
}

/// `Q_{t1,t2}` on a fixed grid, assembling each kernel on demand.
#[derive(Debug, Clone)]
pub struct CircleKernelFamily {
    pub grid: CircleGrid,
    pub path: DriftPath,
}

impl PropagatorFamily for CircleKernelFamily {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn norm_kind(&self) -> NormKind {
        NormKind::Sup
    }

    fn apply(&self, t1: f64, t2: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.grid.len(), x.len())?;
        let kernel = build_q_kernel(self.grid, t1, t2, &self.path)?;
        let f = FunctionSamples::new(self.grid, x.entries().to_vec())?;
        Ok(apply_q(&kernel, &f)?.to_state())
    }

    fn min_step(&self) -> f64 {
        min_resolved_step(self.grid)
    }

    fn time_domain(&self) -> Option<TimeInterval> {
        Some(self.path.domain())
    }
}

/// `A_s g = b(s,·) g' + ½ g''` with `b(s,θ) = φ'(s)·e_θ`.
pub fn apply_generator(g: &FunctionSamples, s: f64, phi: &DriftPath) -> FunctionSamples {
    generator_with(&Fourier::new(g.grid()), g, s, phi)
}

pub(crate) fn generator_with(
    fourier: &Fourier,
    g: &FunctionSamples,
    s: f64,
    phi: &DriftPath,
) -> FunctionSamples {
    let grid = g.grid();
    let d1 = fourier.derivative(g.values(), 1);
    let d2 = fourier.derivative(g.values(), 2);
    let values = grid
        .nodes()
        .zip(d1.iter().zip(&d2))
        .map(|(th, (a, b))| phi.drift(s, th) * a + 0.5 * b)
        .collect();
    FunctionSamples::new(grid, values).expect("generator of finite samples is finite")
}

/// Generator family `s -> A_s` on a fixed grid.
#[derive(Clone)]
pub struct CircleGenerator {
    grid: CircleGrid,
    path: DriftPath,
    fourier: Fourier,
}

impl CircleGenerator {
    pub fn new(grid: CircleGrid, path: DriftPath) -> Self {
        Self {
            grid,
            path,
            fourier: Fourier::new(grid),
        }
    }
}

impl GeneratorFamily for CircleGenerator {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        let g = FunctionSamples::new(self.grid, x.entries().to_vec())?;
        Ok(generator_with(&self.fourier, &g, t, &self.path).to_state())
    }
}

/// Chernoff product of the kernel family over `p`, applied to `g`.
pub fn chernoff_transport(
    p: &Partition,
    phi: &DriftPath,
    g: &FunctionSamples,
) -> Result<FunctionSamples> {
    phi.check_times(p.start(), p.end())?;
    let family = CircleKernelFamily {
        grid: g.grid(),
        path: phi.clone(),
    };
    let out = chernoff_apply(&family, p, &g.to_state())?;
    FunctionSamples::from_state(g.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::path::AngleProfile;
    use crate::evolution::PartitionScheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(profile: &str) -> DriftPath {
        DriftPath::new(
            profile.parse().unwrap(),
            TimeInterval::new(0.0, 1.0).unwrap(),
        )
    }

    fn random_samples(grid: CircleGrid, seed: u64) -> FunctionSamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FunctionSamples::new(
            grid,
            (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kernel_is_stochastic_and_nonnegative() {
        let grid = CircleGrid::new(128).unwrap();
        for profile in ["constant(0.4)", "linear(0.7)", "sine(1.2,4)"] {
            for &(s, t) in &[(0.2, 0.3), (0.0, 1.0), (0.5, 0.52)] {
                let k = build_q_kernel(grid, s, t, &path(profile)).unwrap();
                assert!(k.row_masses().iter().all(|m| (m - 1.0).abs() < 1e-12));
                assert!(k.entries.iter().all(|&e| e >= 0.0));
            }
        }
    }

    #[test]
    fn kernel_errors() {
        let grid = CircleGrid::new(64).unwrap();
        let p = path("linear(1)");
        assert!(matches!(
            build_q_kernel(grid, 0.5, 0.5, &p),
            Err(Error::InvalidInterval(_))
        ));
        assert!(matches!(
            build_q_kernel(grid, 0.5, 0.5 + 1e-6, &p),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            build_q_kernel(grid, 0.5, 1.5, &p),
            Err(Error::InvalidInterval(_))
        ));
    }

    #[test]
    fn constant_path_kernel_is_circulant() {
        let grid = CircleGrid::new(64).unwrap();
        let k = build_q_kernel(grid, 0.1, 0.3, &path("constant(1.3)")).unwrap();
        let n = grid.len();
        for j in 0..n {
            for m in 0..n {
                assert!((k.entry(j, m) - k.entry(0, (m + n - j) % n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_q_contraction_positivity_and_constants() {
        let grid = CircleGrid::new(96).unwrap();
        let k = build_q_kernel(grid, 0.2, 0.45, &path("linear(0.7)")).unwrap();
        let one = apply_q(&k, &grid.sample(|_| 1.0)).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        for seed in 0..100 {
            let f = random_samples(grid, seed);
            assert!(apply_q(&k, &f).unwrap().sup_norm() <= f.sup_norm() + 1e-12);
            let pos =
                FunctionSamples::new(grid, f.values().iter().map(|v| v.abs()).collect()).unwrap();
            assert!(apply_q(&k, &pos)
                .unwrap()
                .values()
                .iter()
                .all(|&v| v >= 0.0));
        }
        let other = CircleGrid::new(32).unwrap();
        assert!(matches!(
            apply_q(&k, &other.sample(f64::cos)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn generator_simple_cases() {
        let grid = CircleGrid::new(32).unwrap();
        let p = path("linear(0.7)");
        assert!(apply_generator(&grid.sample(|_| 2.0), 0.3, &p).sup_norm() < 1e-13);
        let still = path("constant(0.9)");
        let out = apply_generator(&grid.sample(f64::cos), 0.5, &still);
        assert!(out.sup_distance(&grid.sample(|t| -0.5 * t.cos())).unwrap() < 1e-13);
        // drifted: b g' + g''/2 with b = 0.7 cos(0.7 s - θ), g = sin
        let s = 0.4;
        let out = apply_generator(&grid.sample(f64::sin), s, &p);
        let expected = grid.sample(|t| 0.7 * (0.7 * s - t).cos() * t.cos() - 0.5 * t.sin());
        assert!(out.sup_distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn transport_of_constants_and_single_step() {
        let grid = CircleGrid::new(64).unwrap();
        let p = path("sine(0.8,3)");
        let part = Partition::make(0.1, 0.9, 7, PartitionScheme::Uniform).unwrap();
        let out = chernoff_transport(&part, &p, &grid.sample(|_| 1.0)).unwrap();
        assert!(out.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
        let single = Partition::make(0.2, 0.6, 1, PartitionScheme::Uniform).unwrap();
        let g = grid.sample(|t| (2.0 * t).sin());
        let via_transport = chernoff_transport(&single, &p, &g).unwrap();
        let direct = apply_q(&build_q_kernel(grid, 0.2, 0.6, &p).unwrap(), &g).unwrap();
        assert_eq!(via_transport, direct);
    }

    #[test]
    fn transport_is_contractive_and_rotation_equivariant() {
        let grid = CircleGrid::new(64).unwrap();
        let part = Partition::make(0.0, 1.0, 6, PartitionScheme::Uniform).unwrap();
        let g = random_samples(grid, 42);
        let moving = path("linear(0.7)");
        let out = chernoff_transport(&part, &moving, &g).unwrap();
        assert!(out.sup_norm() <= g.sup_norm() + 6.0 * 1e-12);

        let still = DriftPath::new(
            AngleProfile::Constant(0.0),
            TimeInterval::new(0.0, 1.0).unwrap(),
        );
        let a = chernoff_transport(&part, &still, &g.rotate(1)).unwrap();
        let b = chernoff_transport(&part, &still, &g).unwrap().rotate(1);
        assert!(a.sup_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn heat_mode_eigenvalue_expansion() {
        // c(Δτ) = Σ_k K[0,k] cos θ_k w_k = 1 - Δτ/2 + O(Δτ^{3/2})
        let grid = CircleGrid::new(1024).unwrap();
        let still = path("constant(0.0)");
        let mut prev = f64::INFINITY;
        for &dt in &[0.2, 0.1, 0.05, 0.025, 0.0125] {
            let k = build_q_kernel(grid, 0.5, 0.5 + dt, &still).unwrap();
            let c: f64 = k
                .row(0)
                .iter()
                .zip(grid.nodes())
                .map(|(e, th)| e * th.cos())
                .sum::<f64>()
                * grid.weight();
            let rem = (c - (1.0 - dt / 2.0)).abs();
            assert!(rem < prev);
            assert!(rem <= dt.powf(1.5));
            prev = rem;
        }
    }
}
