//! Runs one configured experiment: compute the convergence table, evaluate
//! the embedded checks, and write the table, plot and manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chernoff_core::circle::{
    asymptotics_probe, chernoff_transport, min_resolved_step, spectral_reference, CircleGenerator,
    CircleGrid, CircleKernelFamily, FunctionSamples, TrigInterpolant,
};
use chernoff_core::evolution::{
    chernoff_apply, generator_consistency_probe, product_bound_probe, ConvergenceRecord,
    ConvergenceReport, Partition, PartitionScheme, RateFit, StateVector, TimeInterval,
};
use chernoff_core::matrix::{
    build_propagator, commuting_evolution_oracle, ode_evolution_oracle, CommutingFamilySpec,
    MatrixGenerator,
};
use chernoff_core::sde::{cross_validate, mc_expectation, simulate_paths};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind, Observable, ProbeTarget};
use crate::emit::{format_slope, format_value, render_plot, render_table, write_file, SlopeColumn};
use crate::RunError;

/// One embedded pass/fail condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ConvergenceReport,
    pub slope_column: SlopeColumn,
    pub checks: Vec<Check>,
    pub seeds: Vec<(String, u64)>,
    pub stages: Vec<(String, Duration)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Fitted slope; `None` for exact runs, where a fit would only see round-off.
    pub fn slope(&self) -> Option<f64> {
        match self.slope_column {
            SlopeColumn::Exact => None,
            SlopeColumn::Fitted => self.report.fit.map(|f| f.slope),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub manifest: PathBuf,
}

struct Stages(Vec<(String, Duration)>);

impl Stages {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((name.to_string(), start.elapsed()));
        out
    }
}

fn records(pairs: impl IntoIterator<Item = (f64, f64)>) -> Vec<ConvergenceRecord> {
    pairs
        .into_iter()
        .map(|(mesh, error)| ConvergenceRecord { mesh, error })
        .collect()
}

fn slope_text(fit: Option<RateFit>) -> String {
    fit.map_or_else(|| "none".to_string(), |f| format_slope(f.slope))
}

/// Computes the table and checks for `cfg` without touching the filesystem.
pub fn compute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut stages = Stages(Vec::new());
    let mut seeds = vec![("seed".to_string(), cfg.seed)];
    let mut slope_column = SlopeColumn::Fitted;
    let (report, checks) = match cfg.kind {
        ExperimentKind::MatrixConvergence => {
            let u = stages.time("reference", || {
                ode_evolution_oracle(
                    &cfg.family,
                    cfg.interval.start(),
                    cfg.interval.end(),
                    cfg.matrix_reference_steps,
                )
            })?;
            let report = stages.time("chernoff", || matrix_table(cfg, &u))?;
            let slope = report.fit.map(|f| f.slope);
            let checks = vec![
                Check::new(
                    "errors strictly decreasing",
                    report.strictly_decreasing(),
                    format!("{:?}", report.errors().collect::<Vec<_>>()),
                ),
                Check::new(
                    "slope in [0.9, 1.1]",
                    slope.is_some_and(|s| (0.9..=1.1).contains(&s)),
                    slope_text(report.fit),
                ),
            ];
            (report, checks)
        }
        ExperimentKind::MatrixCommuting => {
            let spec = CommutingFamilySpec::from_family(&cfg.family).ok_or_else(|| {
                RunError::Config(format!(
                    "matrix family `{}` is not a single-term family",
                    cfg.matrix_family
                ))
            })?;
            let u = stages.time("reference", || {
                commuting_evolution_oracle(&spec, cfg.interval.start(), cfg.interval.end())
            })?;
            let report = stages.time("chernoff", || matrix_table(cfg, &u))?;
            let check = if spec.profile.is_constant() {
                let worst = report.errors().fold(0.0, f64::max);
                let exact = worst <= 1e-12;
                if exact {
                    slope_column = SlopeColumn::Exact;
                }
                Check::new(
                    "constant profile errors <= 1e-12",
                    exact,
                    format_value(worst),
                )
            } else {
                let slope = report.fit.map(|f| f.slope);
                Check::new(
                    "slope >= 0.9",
                    slope.is_some_and(|s| s >= 0.9),
                    slope_text(report.fit),
                )
            };
            (report, vec![check])
        }
        ExperimentKind::CircleConvergence => {
            let grid = CircleGrid::new(cfg.grid_n)?;
            let g = sample_observable(grid, cfg.observable);
            let (s, t) = (cfg.interval.start(), cfg.interval.end());
            let reference = stages.time("reference", || {
                spectral_reference(s, t, &cfg.drift, &g, cfg.circle_reference_steps)
            })?;
            let pairs = stages.time("chernoff", || {
                cfg.schedule
                    .iter()
                    .map(|&n| {
                        let p = Partition::make(s, t, n, PartitionScheme::Uniform)?;
                        let c = chernoff_transport(&p, &cfg.drift, &g)?;
                        Ok((p.mesh(), c.sup_distance(&reference)?))
                    })
                    .collect::<Result<Vec<_>, chernoff_core::Error>>()
            })?;
            let report = ConvergenceReport::from_records(records(pairs));
            let slope = report.fit.map(|f| f.slope);
            let checks = vec![
                Check::new(
                    "errors nonincreasing",
                    report.nonincreasing(),
                    format!("{:?}", report.errors().collect::<Vec<_>>()),
                ),
                Check::new(
                    "slope >= 0.4",
                    slope.is_some_and(|s| s >= 0.4),
                    slope_text(report.fit),
                ),
            ];
            (report, checks)
        }
        ExperimentKind::Asymptotics => {
            let grid = CircleGrid::new(cfg.grid_n)?;
            if cfg.node >= grid.len() {
                return Err(RunError::Config(format!(
                    "asymptotics.node {} outside grid of {}",
                    cfg.node,
                    grid.len()
                )));
            }
            let g = sample_observable(grid, cfg.observable);
            let rep = stages.time("expansion", || {
                asymptotics_probe(&g, cfg.node, cfg.tau, &cfg.drift, &cfg.dtaus)
            })?;
            let ones = stages.time("constant", || {
                asymptotics_probe(
                    &grid.sample(|_| 1.0),
                    cfg.node,
                    cfg.tau,
                    &cfg.drift,
                    &cfg.dtaus,
                )
            })?;
            let finite = rep.remainders.iter().all(|r| r.is_finite());
            let worst_one = ones.remainders.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
            let report = ConvergenceReport::from_records(records(
                rep.dtaus
                    .iter()
                    .copied()
                    .zip(rep.remainders.iter().map(|r| r.abs())),
            ));
            let slope = report.fit.map(|f| f.slope);
            let checks = vec![
                Check::new("remainders finite", finite, format!("{:?}", rep.remainders)),
                Check::new(
                    "|R| slope >= 0.45",
                    slope.is_some_and(|s| s >= 0.45),
                    slope_text(report.fit),
                ),
                Check::new(
                    "constant remainder <= 1e-10",
                    worst_one <= 1e-10,
                    format_value(worst_one),
                ),
            ];
            (report, checks)
        }
        ExperimentKind::McCrossval => mc_crossval(cfg, &mut stages, &mut seeds)?,
        ExperimentKind::AssumptionProbe => {
            let (report, checks, column) = assumption_probe(cfg, &mut stages, &mut seeds)?;
            slope_column = column;
            (report, checks)
        }
    };
    Ok(Outcome {
        report,
        slope_column,
        checks,
        seeds,
        stages: stages.0,
    })
}

fn sample_observable(grid: CircleGrid, g: Observable) -> FunctionSamples {
    grid.sample(|th| g.eval(th))
}

/// Worst column error `max_j |Q_P e_j - U e_j|` for each schedule entry.
fn matrix_table(
    cfg: &ExperimentConfig,
    u: &DMatrix<f64>,
) -> Result<ConvergenceReport, chernoff_core::Error> {
    let q = build_propagator(cfg.family.clone(), cfg.variant);
    let dim = cfg.family.dim();
    let (s, t) = (cfg.interval.start(), cfg.interval.end());
    let mut pairs = Vec::with_capacity(cfg.schedule.len());
    for &n in &cfg.schedule {
        let p = Partition::make(s, t, n, PartitionScheme::Uniform)?;
        let mut err: f64 = 0.0;
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            let got = chernoff_apply(&q, &p, &StateVector::euclidean(e))?;
            let col = StateVector::euclidean(u.column(j).iter().copied().collect());
            err = err.max(got.distance(&col)?);
        }
        pairs.push((p.mesh(), err));
    }
    Ok(ConvergenceReport::from_records(records(pairs)))
}

fn mc_crossval(
    cfg: &ExperimentConfig,
    stages: &mut Stages,
    seeds: &mut Vec<(String, u64)>,
) -> Result<(ConvergenceReport, Vec<Check>), RunError> {
    seeds.push(("mc.seed".to_string(), cfg.mc.seed));
    let grid = CircleGrid::new(cfg.grid_n)?;
    let g = sample_observable(grid, cfg.observable);
    let (s, t) = (cfg.interval.start(), cfg.interval.end());
    let terminals = stages.time("monte-carlo", || {
        simulate_paths(s, t, cfg.theta0, &cfg.drift, &cfg.mc)
    })?;
    let obs = cfg.observable;
    let est = mc_expectation(&terminals, |th| obs.eval(th), cfg.mc.pairing())?;
    let chernoff = stages.time("chernoff", || {
        cfg.schedule
            .iter()
            .map(|&n| {
                let p = Partition::make(s, t, n, PartitionScheme::Uniform)?;
                let c = chernoff_transport(&p, &cfg.drift, &g)?;
                Ok((p.mesh(), TrigInterpolant::new(&c).eval(cfg.theta0)))
            })
            .collect::<Result<Vec<_>, chernoff_core::Error>>()
    })?;
    let bias = cfg.mc.bias_allowance(s, t);
    let band = 3.0 * est.stderr + bias;
    let report = ConvergenceReport::from_records(records(
        chernoff.iter().map(|&(m, v)| (m, (v - est.mean).abs())),
    ));
    // the finest partition is the one compared against the sample mean
    let &(_, finest) = chernoff
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("schedule validated non-empty");
    let verdict = cross_validate(finest, &est, bias);
    let mut checks = vec![Check::new(
        "chernoff agrees with monte carlo",
        verdict.agrees(),
        format!(
            "chernoff {} mean {} stderr {} gap {} band {}",
            format_value(finest),
            format_value(est.mean),
            format_value(est.stderr),
            format_value(verdict.gap()),
            format_value(band)
        ),
    )];
    let still = (0..=64).all(|k| cfg.drift.dpsi(s + (t - s) * k as f64 / 64.0) == 0.0);
    if still && obs == Observable::Cos {
        let closed = (-(t - s) / 2.0).exp() * cfg.theta0.cos();
        let gap = (closed - est.mean).abs();
        checks.push(Check::new(
            "driftless mean matches closed form",
            gap <= band,
            format!(
                "closed {} gap {} band {}",
                format_value(closed),
                format_value(gap),
                format_value(band)
            ),
        ));
    }
    Ok((report, checks))
}

/// Worst defect below which a propagator reproduces its generator exactly.
const EXACT_DEFECT: f64 = 1e-12;

fn assumption_probe(
    cfg: &ExperimentConfig,
    stages: &mut Stages,
    seeds: &mut Vec<(String, u64)>,
) -> Result<(ConvergenceReport, Vec<Check>, SlopeColumn), RunError> {
    let (s, t) = (cfg.interval.start(), cfg.interval.end());
    let taus = [0.5 * (s + t), t];
    if let Some(d) = cfg.dtaus.iter().find(|&&d| d > 0.5 * (t - s)) {
        return Err(RunError::Config(format!(
            "probe step {d} longer than half the interval"
        )));
    }
    let (table, bound, slope_ok, slope_name): (_, _, fn(f64) -> bool, _) = match cfg.probe_target {
        ProbeTarget::Matrix => {
            let q = build_propagator(cfg.family.clone(), cfg.variant);
            let a = MatrixGenerator(&cfg.family);
            let dim = cfg.family.dim();
            let probes: Vec<StateVector> = (0..dim)
                .map(|j| {
                    StateVector::euclidean(
                        (0..dim).map(|i| if i == j { 1.0 } else { 0.0 }).collect(),
                    )
                })
                .collect();
            let table = stages.time("defects", || {
                generator_consistency_probe(&q, &a, &probes, &taus, &cfg.dtaus)
            })?;
            let bound = stages.time("bound", || {
                product_bound_probe(
                    &q,
                    cfg.interval,
                    cfg.probe_trials,
                    cfg.probe_max_factors,
                    cfg.seed,
                )
            })?;
            (
                table,
                bound,
                |x| (0.9..=1.1).contains(&x),
                "slope in [0.9, 1.1]",
            )
        }
        ProbeTarget::Circle => {
            let grid = CircleGrid::new(cfg.grid_n)?;
            let floor = min_resolved_step(grid);
            if let Some(d) = cfg.dtaus.iter().find(|&&d| d < floor) {
                return Err(RunError::Config(format!(
                    "probe step {d} below the kernel resolution {floor} at N = {}",
                    grid.len()
                )));
            }
            let path = cfg.drift.clone().with_domain(TimeInterval::new(s, t)?);
            let q = CircleKernelFamily {
                grid,
                path: path.clone(),
            };
            let a = CircleGenerator::new(grid, path);
            let probes: Vec<StateVector> = [Observable::Cos, Observable::Mixed]
                .into_iter()
                .map(|o| sample_observable(grid, o).to_state())
                .collect();
            let table = stages.time("defects", || {
                generator_consistency_probe(&q, &a, &probes, &taus, &cfg.dtaus)
            })?;
            let bound = stages.time("bound", || {
                product_bound_probe(
                    &q,
                    cfg.interval,
                    cfg.probe_trials,
                    cfg.probe_max_factors,
                    cfg.seed,
                )
            })?;
            (table, bound, |x| x >= 0.4, "slope >= 0.4")
        }
    };
    seeds.push(("probe.seed".to_string(), bound.seed));
    let worst = table.worst_per_step();
    let report = ConvergenceReport::from_records(records(
        table.dtaus.iter().copied().zip(worst.iter().copied()),
    ));
    let slope = report.fit.map(|f| f.slope);
    let largest = worst.iter().fold(0.0, |m: f64, &d| m.max(d));
    // explicit Euler frozen at the right endpoint has (Q - I)/Δτ = A(τ) exactly
    let exact = largest <= EXACT_DEFECT;
    let mut checks = if exact {
        vec![Check::new(
            "defects at round-off (exact consistency)",
            true,
            format_value(largest),
        )]
    } else {
        vec![
            Check::new(
                "defects decrease with the step",
                report.strictly_decreasing(),
                format!("{:?}", report.errors().collect::<Vec<_>>()),
            ),
            Check::new(
                slope_name,
                slope.is_some_and(slope_ok),
                slope_text(report.fit),
            ),
        ]
    };
    checks.push(Check::new(
        "product bound <= 1 + 1e-10",
        bound.bound <= 1.0 + 1e-10,
        format!("{} over {} trials", format_value(bound.bound), bound.trials),
    ));
    let column = if exact {
        SlopeColumn::Exact
    } else {
        SlopeColumn::Fitted
    };
    Ok((report, checks, column))
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Computes, then writes `<kind>.csv`, `<kind>.svg` (unless disabled) and
/// `manifest.txt` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let outcome = compute(cfg)?;
    let dir = &cfg.outdir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let kind = cfg.kind.name();

    let csv_text = render_table(&outcome.report.records, outcome.slope_column);
    let csv = dir.join(format!("{kind}.csv"));
    write_file(&csv, &csv_text)?;
    let mut sums = vec![(csv.clone(), sha256_hex(&csv_text))];

    let svg = if cfg.plot {
        let text = render_plot(
            kind,
            &outcome.report.records,
            outcome.slope().and(outcome.report.fit),
        );
        let path = dir.join(format!("{kind}.svg"));
        write_file(&path, &text)?;
        sums.push((path.clone(), sha256_hex(&text)));
        Some(path)
    } else {
        None
    };

    let mut m = String::new();
    let _ = writeln!(m, "chernoff-evolve {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "kind = {kind}");
    let _ = writeln!(m, "threads = {}", rayon::current_num_threads());
    let _ = writeln!(m, "\n[config]");
    m.push_str(&cfg.source.to_canonical_string());
    let _ = writeln!(m, "\n[seeds]");
    for (name, seed) in &outcome.seeds {
        let _ = writeln!(m, "{name} = {seed}");
    }
    let _ = writeln!(m, "\n[stages]");
    for (name, d) in &outcome.stages {
        let _ = writeln!(m, "{name} = {:.6} s", d.as_secs_f64());
    }
    let _ = writeln!(m, "\n[checks]");
    for c in &outcome.checks {
        let _ = writeln!(
            m,
            "{} = {} ({})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.detail
        );
    }
    let _ = writeln!(m, "\n[sha256]");
    for (path, sum) in &sums {
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        let _ = writeln!(m, "{name} = {sum}");
    }
    let manifest = dir.join("manifest.txt");
    write_file(&manifest, &m)?;

    Ok(RunSummary {
        outcome,
        csv,
        svg,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_string() {
        assert_eq!(
            sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn small_matrix_run_passes() {
        let cfg = ExperimentConfig::parse(
            "kind = matrix-convergence\n[partition]\nschedule = 8, 16, 32, 64\n[matrix]\nreference_steps = 2000\n",
            &[],
        )
        .unwrap();
        let out = compute(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.checks);
        assert_eq!(out.report.records.len(), 4);
    }

    #[test]
    fn commuting_constant_is_exact() {
        let cfg = ExperimentConfig::parse(
            "kind = matrix-commuting\n[partition]\nschedule = 2, 4, 8\n[matrix]\nfamily = commuting3-constant\n",
            &[],
        )
        .unwrap();
        let out = compute(&cfg).unwrap();
        assert!(out.passed());
        assert_eq!(out.slope_column, SlopeColumn::Exact);
    }

    #[test]
    fn unresolved_probe_step_is_a_config_error() {
        let cfg = ExperimentConfig::parse(
            "kind = assumption-probe\n[circle]\nN = 64\n[asymptotics]\ndtau = 0.1, 0.01, 0.001\n",
            &[],
        )
        .unwrap();
        assert!(matches!(compute(&cfg), Err(RunError::Config(_))));
    }
}
