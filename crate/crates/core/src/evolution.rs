//! Contracts shared by every instantiation: time grids, state vectors,
//! generator and propagator families, the Chernoff product and the
//! diagnostics that probe its hypotheses empirically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A closed time interval `[start, end]` with `start <= end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start > end {
            return Err(Error::InvalidInterval(format!("[{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    Uniform,
    /// Sorted uniform interior nodes; node `i` is drawn from its own
    /// generator stream so the draw does not depend on evaluation order.
    RandomRefinement {
        seed: u64,
    },
}

/// Strictly increasing time grid `t_0 < t_1 < ... < t_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidCount(format!(
                "partition needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("partition nodes"));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInterval(format!(
                "partition nodes not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes })
    }

    pub fn make(s: f64, t: f64, n: usize, scheme: PartitionScheme) -> Result<Self> {
        if !(s < t) {
            return Err(Error::InvalidInterval(format!("s = {s} must be < t = {t}")));
        }
        if n == 0 {
            return Err(Error::InvalidCount("partition needs n >= 1".into()));
        }
        let len = t - s;
        let mut nodes = match scheme {
            PartitionScheme::Uniform => (0..=n).map(|j| s + len * j as f64 / n as f64).collect(),
            PartitionScheme::RandomRefinement { seed } => {
                let mut u: Vec<f64> = (0..n - 1)
                    .map(|i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(i as u64);
                        rng.random::<f64>()
                    })
                    .collect();
                u.sort_by(f64::total_cmp);
                let mut nodes = Vec::with_capacity(n + 1);
                nodes.push(s);
                nodes.extend(u.into_iter().map(|u| s + len * u));
                nodes.push(t);
                nodes
            }
        };
        // pin the endpoints exactly
        nodes[0] = s;
        nodes[n] = t;
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn mesh(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Consecutive `(t_j, t_{j+1})` pairs, left to right.
    pub fn steps(&self) -> impl DoubleEndedIterator<Item = (f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Matrix testbed coordinates.
    Euclidean,
    /// Function samples on a grid.
    Sup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    entries: Vec<f64>,
    norm: NormKind,
}

impl StateVector {
    pub fn new(entries: Vec<f64>, norm: NormKind) -> Self {
        Self { entries, norm }
    }

    pub fn euclidean(entries: Vec<f64>) -> Self {
        Self::new(entries, NormKind::Euclidean)
    }

    pub fn sup(entries: Vec<f64>) -> Self {
        Self::new(entries, NormKind::Sup)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.entries, self.norm)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// Norm of `self - other`, measured in `self`'s norm.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        let diff: Vec<f64> = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(norm_of(&diff, self.norm))
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &StateVector, b: f64) -> Result<StateVector> {
        check_dim(self.len(), other.len())?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(StateVector::new(entries, self.norm))
    }
}

pub(crate) fn norm_of(v: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// One-parameter family `t -> A_t` of (generally unbounded) generators,
/// realised on a finite state space.
pub trait GeneratorFamily: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector>;
}

/// Two-parameter family `Q_{t1,t2}` of bounded operators, `t1 < t2`.
pub trait PropagatorFamily: Sync {
    fn dim(&self) -> usize;
    fn norm_kind(&self) -> NormKind;
    fn apply(&self, t1: f64, t2: f64, x: &StateVector) -> Result<StateVector>;

    /// Smallest step the family can resolve. Samplers stay above it.
    fn min_step(&self) -> f64 {
        0.0
    }

    /// Largest step the family accepts anywhere in `[t1, t2]`. Samplers
    /// split longer gaps.
    fn max_step(&self, _t1: f64, _t2: f64) -> f64 {
        f64::INFINITY
    }

    /// Time domain the family is defined on, if restricted.
    fn time_domain(&self) -> Option<TimeInterval> {
        None
    }
}

/// Reference evolution family `U(s,t)`, `s <= t`.
pub trait EvolutionOracle {
    fn dim(&self) -> usize;
    fn evolve(&self, s: f64, t: f64, x: &StateVector) -> Result<StateVector>;
}

/// The identity family; useful as a neutral element in tests and probes.
#[derive(Debug, Clone, Copy)]
pub struct IdentityFamily {
    pub dim: usize,
    pub norm: NormKind,
}

impl PropagatorFamily for IdentityFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn norm_kind(&self) -> NormKind {
        self.norm
    }

    fn apply(&self, _t1: f64, _t2: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim, x.len())?;
        Ok(x.clone())
    }
}

impl GeneratorFamily for IdentityFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    /// The generator of the identity family is zero.
    fn apply(&self, _t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim, x.len())?;
        Ok(StateVector::new(vec![0.0; x.len()], x.norm_kind()))
    }
}

/// `Q_{t0,t1} Q_{t1,t2} ... Q_{t_{n-1},t_n} x`; the rightmost factor acts first.
pub fn chernoff_apply<Q>(q: &Q, p: &Partition, x: &StateVector) -> Result<StateVector>
where
    Q: PropagatorFamily + ?Sized,
{
    check_dim(q.dim(), x.len())?;
    let mut state = x.clone();
    for (t1, t2) in p.steps().rev() {
        state = q.apply(t1, t2, &state)?;
        if !state.is_finite() {
            return Err(Error::NonFinite("chernoff product factor"));
        }
    }
    Ok(state)
}

/// Empirical lower bound on `sup ||Q_{τ1,τ2} ... Q_{τ_{k-1},τ_k}||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEstimate {
    pub bound: f64,
    pub seed: u64,
    pub trials: usize,
}

/// Randomised probe of the uniform product bound: random node sequences
/// `s = τ_1 < ... < τ_k <= t` with at most `max_factors` factors, each
/// applied to a random unit vector. Trials run in parallel; the max
/// reduction is order independent.
pub fn product_bound_probe<Q>(
    q: &Q,
    interval: TimeInterval,
    trials: usize,
    max_factors: usize,
    seed: u64,
) -> Result<BoundEstimate>
where
    Q: PropagatorFamily + ?Sized,
{
    if trials == 0 || max_factors == 0 {
        return Err(Error::InvalidCount(
            "product_bound_probe needs trials >= 1 and max_factors >= 1".into(),
        ));
    }
    if interval.length() <= 0.0 {
        return Err(Error::InvalidInterval(
            "probe interval has zero length".into(),
        ));
    }
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let nodes = split_long_gaps(
                random_node_sequence(&mut rng, interval, max_factors, q.min_step()),
                q.max_step(interval.start(), interval.end()),
            );
            let x = random_unit_vector(&mut rng, q.dim(), q.norm_kind());
            let mut state = x.clone();
            for w in nodes.windows(2).rev() {
                state = q.apply(w[0], w[1], &state)?;
            }
            Ok(state.norm() / x.norm())
        })
        .collect::<Result<_>>()?;
    let bound = ratios.into_iter().fold(0.0, f64::max);
    Ok(BoundEstimate {
        bound,
        seed,
        trials,
    })
}

fn random_node_sequence(
    rng: &mut ChaCha8Rng,
    interval: TimeInterval,
    max_factors: usize,
    min_step: f64,
) -> Vec<f64> {
    let len = interval.length();
    let cap = if min_step > 0.0 {
        ((len / min_step).floor() as usize).clamp(1, max_factors)
    } else {
        max_factors
    };
    let factors = rng.random_range(1..=cap);
    // Dirichlet gaps plus one slack gap so that the last node may fall short of t
    let weights: Vec<f64> = (0..=factors)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let free = len - factors as f64 * min_step;
    let mut nodes = Vec::with_capacity(factors + 1);
    let mut t = interval.start();
    nodes.push(t);
    for w in &weights[..factors] {
        t += min_step + free * w / total;
        nodes.push(t.min(interval.end()));
    }
    nodes.dedup();
    nodes
}

fn split_long_gaps(nodes: Vec<f64>, max_step: f64) -> Vec<f64> {
    if !max_step.is_finite() {
        return nodes;
    }
    let mut out = vec![nodes[0]];
    for w in nodes.windows(2) {
        let pieces = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        out.extend((1..pieces).map(|i| w[0] + i as f64 * h));
        out.push(w[1]);
    }
    out
}

fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize, kind: NormKind) -> StateVector {
    loop {
        let raw: Vec<f64> = match kind {
            NormKind::Euclidean => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            NormKind::Sup => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        };
        let n = norm_of(&raw, kind);
        if n > 0.0 {
            return StateVector::new(raw.into_iter().map(|v| v / n).collect(), kind);
        }
    }
}

/// Defects `||(Q_{τ-Δτ,τ}x - x)/Δτ - A_τ x||`, indexed `[probe][tau][dtau]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectTable {
    pub taus: Vec<f64>,
    pub dtaus: Vec<f64>,
    pub probes: usize,
    values: Vec<f64>,
}

impl DefectTable {
    pub fn get(&self, probe: usize, tau: usize, dtau: usize) -> f64 {
        self.values[(probe * self.taus.len() + tau) * self.dtaus.len() + dtau]
    }

    /// Worst defect over all probes and all τ, one entry per Δτ.
    pub fn worst_per_step(&self) -> Vec<f64> {
        (0..self.dtaus.len())
            .map(|j| {
                (0..self.probes)
                    .flat_map(|p| (0..self.taus.len()).map(move |i| (p, i)))
                    .map(|(p, i)| self.get(p, i, j))
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

pub fn generator_consistency_probe<Q, A>(
    q: &Q,
    a: &A,
    probes: &[StateVector],
    tau_grid: &[f64],
    dtau_grid: &[f64],
) -> Result<DefectTable>
where
    Q: PropagatorFamily + ?Sized,
    A: GeneratorFamily + ?Sized,
{
    check_dim(q.dim(), a.dim())?;
    if let Some(bad) = dtau_grid.iter().find(|&&d| !(d > 0.0)) {
        return Err(Error::InvalidStep(format!("Δτ = {bad} must be positive")));
    }
    if let Some(domain) = q.time_domain() {
        for &tau in tau_grid {
            for &dt in dtau_grid {
                if !domain.contains(tau) || !domain.contains(tau - dt) {
                    return Err(Error::InvalidInterval(format!(
                        "[{}, {tau}] leaves the family's domain [{}, {}]",
                        tau - dt,
                        domain.start(),
                        domain.end()
                    )));
                }
            }
        }
    }
    let mut values = Vec::with_capacity(probes.len() * tau_grid.len() * dtau_grid.len());
    for x in probes {
        check_dim(q.dim(), x.len())?;
        for &tau in tau_grid {
            let ax = a.apply(tau, x)?;
            for &dt in dtau_grid {
                let qx = q.apply(tau - dt, tau, x)?;
                let quotient = qx.combine(1.0 / dt, x, -1.0 / dt)?;
                values.push(quotient.distance(&ax)?);
            }
        }
    }
    Ok(DefectTable {
        taus: tau_grid.to_vec(),
        dtaus: dtau_grid.to_vec(),
        probes: probes.len(),
        values,
    })
}

/// `||U(s,r) U(r,t) x - U(s,t) x||` for an evolution oracle.
pub fn composition_defect<U>(u: &U, s: f64, r: f64, t: f64, x: &StateVector) -> Result<f64>
where
    U: EvolutionOracle + ?Sized,
{
    if !(s <= r && r <= t) {
        return Err(Error::InvalidInterval(format!(
            "composition needs s <= r <= t, got ({s}, {r}, {t})"
        )));
    }
    let split = u.evolve(s, r, &u.evolve(r, t, x)?)?;
    let direct = u.evolve(s, t, x)?;
    split.distance(&direct)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln mesh, ln error)`. Records with zero error
/// are dropped; at least three usable records are required.
pub fn fit_rate(records: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(m, e)) = records
        .iter()
        .find(|(m, e)| !(m.is_finite() && *m > 0.0) || !(e.is_finite() && *e >= 0.0))
    {
        return Err(Error::InsufficientData(format!(
            "record (mesh {m}, error {e}) is not a positive mesh with nonnegative error"
        )));
    }
    let usable: Vec<(f64, f64)> = records
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(m, e)| (m.ln(), e.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 records with positive error, have {}",
            usable.len()
        )));
    }
    let mut meshes: Vec<f64> = usable.iter().map(|r| r.0).collect();
    meshes.sort_by(f64::total_cmp);
    if meshes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InsufficientData("meshes must be distinct".into()));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|r| r.0).sum::<f64>() / n;
    let my = usable.iter().map(|r| r.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub mesh: f64,
    pub error: f64,
}

/// `(mesh, error)` records, sorted by decreasing mesh, with the fitted
/// log-log rate when one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<ConvergenceRecord>,
    /// `None` when fewer than three records carry a positive error, or the
    /// records are not finite.
    pub fit: Option<RateFit>,
}

impl ConvergenceReport {
    pub fn from_records(mut records: Vec<ConvergenceRecord>) -> Self {
        records.sort_by(|a, b| b.mesh.total_cmp(&a.mesh));
        let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.mesh, r.error)).collect();
        let fit = fit_rate(&pairs).ok();
        Self { records, fit }
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.error)
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn nonincreasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].error <= w[0].error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partitions() {
        let p = Partition::make(0.0, 1.0, 2, PartitionScheme::Uniform).unwrap();
        assert_eq!(p.nodes(), &[0.0, 0.5, 1.0]);
        let p = Partition::make(0.0, 1.0, 1, PartitionScheme::Uniform).unwrap();
        assert_eq!(p.nodes(), &[0.0, 1.0]);
        let p = Partition::make(0.25, 1.0, 3, PartitionScheme::Uniform).unwrap();
        assert_eq!(p.nodes(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.mesh(), 0.25);
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            Partition::make(1.0, 1.0, 3, PartitionScheme::Uniform),
            Err(Error::InvalidInterval(_))
        ));
        assert!(matches!(
            Partition::make(0.0, 1.0, 0, PartitionScheme::Uniform),
            Err(Error::InvalidCount(_))
        ));
        assert!(Partition::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn random_refinement_is_reproducible() {
        let scheme = PartitionScheme::RandomRefinement { seed: 7 };
        let a = Partition::make(0.0, 2.0, 17, scheme).unwrap();
        let b = Partition::make(0.0, 2.0, 17, scheme).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 17);
        assert_eq!(a.start(), 0.0);
        assert_eq!(a.end(), 2.0);
        let c =
            Partition::make(0.0, 2.0, 17, PartitionScheme::RandomRefinement { seed: 8 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chernoff_single_factor_and_identity() {
        let id = IdentityFamily {
            dim: 3,
            norm: NormKind::Euclidean,
        };
        let x = StateVector::euclidean(vec![1.0, -2.0, 0.5]);
        let p = Partition::make(0.0, 1.0, 9, PartitionScheme::Uniform).unwrap();
        assert_eq!(chernoff_apply(&id, &p, &x).unwrap(), x);
        let bad = StateVector::euclidean(vec![1.0]);
        assert!(matches!(
            chernoff_apply(&id, &p, &bad),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn identity_bound_is_one() {
        let id = IdentityFamily {
            dim: 4,
            norm: NormKind::Sup,
        };
        let est = product_bound_probe(&id, TimeInterval::new(0.0, 1.0).unwrap(), 50, 6, 3).unwrap();
        assert!((est.bound - 1.0).abs() < 1e-15);
        assert_eq!(est.seed, 3);
    }

    #[test]
    fn zero_generator_identity_defect_is_zero() {
        let id = IdentityFamily {
            dim: 2,
            norm: NormKind::Euclidean,
        };
        let probes = vec![StateVector::euclidean(vec![1.0, 2.0])];
        let table =
            generator_consistency_probe(&id, &id, &probes, &[0.5, 1.0], &[0.1, 0.01]).unwrap();
        assert!(table.worst_per_step().iter().all(|&d| d == 0.0));
        assert!(matches!(
            generator_consistency_probe(&id, &id, &probes, &[0.5], &[0.0]),
            Err(Error::InvalidStep(_))
        ));
    }

    #[test]
    fn fit_rate_planted_slopes() {
        let meshes = [0.5, 0.25, 0.125, 0.0625];
        let lin: Vec<_> = meshes.iter().map(|&m| (m, m)).collect();
        assert!((fit_rate(&lin).unwrap().slope - 1.0).abs() < 1e-12);
        let quad: Vec<_> = meshes.iter().map(|&m| (m, m * m)).collect();
        assert!((fit_rate(&quad).unwrap().slope - 2.0).abs() < 1e-12);
        let half: Vec<_> = meshes.iter().map(|&m| (m, 0.3 * m.sqrt())).collect();
        let fit = fit_rate(&half).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_drops_zero_errors() {
        let recs = [(0.5, 0.5), (0.25, 0.0), (0.125, 0.125), (0.0625, 0.0625)];
        assert!((fit_rate(&recs).unwrap().slope - 1.0).abs() < 1e-12);
        let short = [(0.5, 0.5), (0.25, 0.0), (0.125, 0.125)];
        assert!(matches!(fit_rate(&short), Err(Error::InsufficientData(_))));
    }
}
