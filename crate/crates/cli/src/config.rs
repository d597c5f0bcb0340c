use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chernoff_core::circle::{AngleProfile, DriftPath};
use chernoff_core::evolution::TimeInterval;
use chernoff_core::ini::KeyValueConfig;
use chernoff_core::matrix::{MatrixGeneratorFamily, PropagatorVariant};
use chernoff_core::sde::McConfig;

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    MatrixConvergence,
    MatrixCommuting,
    CircleConvergence,
    Asymptotics,
    McCrossval,
    AssumptionProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MatrixConvergence,
        ExperimentKind::MatrixCommuting,
        ExperimentKind::CircleConvergence,
        ExperimentKind::Asymptotics,
        ExperimentKind::McCrossval,
        ExperimentKind::AssumptionProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MatrixConvergence => "matrix-convergence",
            ExperimentKind::MatrixCommuting => "matrix-commuting",
            ExperimentKind::CircleConvergence => "circle-convergence",
            ExperimentKind::Asymptotics => "asymptotics",
            ExperimentKind::McCrossval => "mc-crossval",
            ExperimentKind::AssumptionProbe => "assumption-probe",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named test functions on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    One,
    Cos,
    Sin,
    /// `cos 2θ + 0.3 sin θ`
    Mixed,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::One,
        Observable::Cos,
        Observable::Sin,
        Observable::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::One => "one",
            Observable::Cos => "cos",
            Observable::Sin => "sin",
            Observable::Mixed => "mixed",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Observable::One => "1",
            Observable::Cos => "cos θ",
            Observable::Sin => "sin θ",
            Observable::Mixed => "cos 2θ + 0.3 sin θ",
        }
    }

    pub fn eval(self, theta: f64) -> f64 {
        match self {
            Observable::One => 1.0,
            Observable::Cos => theta.cos(),
            Observable::Sin => theta.sin(),
            Observable::Mixed => (2.0 * theta).cos() + 0.3 * theta.sin(),
        }
    }
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown observable `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeTarget {
    Matrix,
    Circle,
}

/// Everything one run needs, validated.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub interval: TimeInterval,
    pub schedule: Vec<usize>,
    pub matrix_family: String,
    pub family: MatrixGeneratorFamily,
    pub variant: PropagatorVariant,
    pub matrix_reference_steps: usize,
    pub grid_n: usize,
    pub drift: DriftPath,
    pub observable: Observable,
    pub circle_reference_steps: usize,
    pub mc: McConfig,
    pub theta0: f64,
    pub tau: f64,
    pub dtaus: Vec<f64>,
    pub node: usize,
    pub probe_target: ProbeTarget,
    pub probe_trials: usize,
    pub probe_max_factors: usize,
    pub outdir: PathBuf,
    pub plot: bool,
    /// Source text after overrides, echoed into the manifest.
    pub source: KeyValueConfig,
}

fn get<T: FromStr>(cfg: &KeyValueConfig, key: &str, default: T) -> Result<T, RunError>
where
    T::Err: fmt::Display,
{
    match cfg.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| RunError::Config(format!("`{key}` = `{v}`: {e}"))),
    }
}

fn list<T>(cfg: &KeyValueConfig, key: &str, default: &[T]) -> Result<Vec<T>, RunError>
where
    T: FromStr + Clone,
    T::Err: fmt::Display,
{
    match cfg.get(key) {
        None => Ok(default.to_vec()),
        Some(v) => v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| RunError::Config(format!("`{key}` entry `{s}`: {e}")))
            })
            .collect(),
    }
}

/// Applies `--section.key=value` style overrides.
pub fn apply_overrides(cfg: &mut KeyValueConfig, overrides: &[String]) -> Result<(), RunError> {
    for o in overrides {
        let body = o
            .strip_prefix("--")
            .ok_or_else(|| RunError::Config(format!("override `{o}` must start with `--`")))?;
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| RunError::Config(format!("override `{o}` must be `--key=value`")))?;
        if key.is_empty() {
            return Err(RunError::Config(format!("override `{o}` has an empty key")));
        }
        cfg.set(key.trim(), value.trim());
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, RunError> {
        let mut cfg = KeyValueConfig::parse(text).map_err(|e| RunError::Config(e.to_string()))?;
        apply_overrides(&mut cfg, overrides)?;
        Self::from_kv(cfg)
    }

    pub fn from_kv(cfg: KeyValueConfig) -> Result<Self, RunError> {
        let kind: ExperimentKind = cfg
            .get("kind")
            .ok_or_else(|| RunError::Config("missing `kind`".into()))?
            .parse()
            .map_err(RunError::Config)?;
        let seed: u64 = get(&cfg, "seed", 1)?;
        let s: f64 = get(&cfg, "interval.s", 0.0)?;
        let t: f64 = get(&cfg, "interval.t", 1.0)?;
        if s.partial_cmp(&t) != Some(std::cmp::Ordering::Less) {
            return Err(RunError::Config(format!(
                "interval needs s < t, got [{s}, {t}]"
            )));
        }
        let interval = TimeInterval::new(s, t).map_err(|e| RunError::Config(e.to_string()))?;

        let schedule: Vec<usize> = list(&cfg, "partition.schedule", &[])?;
        let needs_schedule = !matches!(
            kind,
            ExperimentKind::Asymptotics | ExperimentKind::AssumptionProbe
        );
        if needs_schedule && schedule.is_empty() {
            return Err(RunError::Config("partition schedule is empty".into()));
        }
        if schedule.contains(&0) || schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RunError::Config(format!(
                "partition schedule must be strictly increasing positive counts, got {schedule:?}"
            )));
        }

        let default_family = match kind {
            ExperimentKind::MatrixCommuting => "commuting3",
            _ => "dissipative3",
        };
        let matrix_family: String = get(&cfg, "matrix.family", default_family.to_string())?;
        // an inline family in the config takes precedence over a shipped preset
        let family = if cfg.contains(&format!("{matrix_family}.dim")) {
            MatrixGeneratorFamily::from_config(&cfg, &matrix_family)
        } else {
            MatrixGeneratorFamily::preset(&matrix_family)
        }
        .map_err(RunError::Config)?;
        let variant: PropagatorVariant =
            get(&cfg, "matrix.variant", PropagatorVariant::FrozenExponential)?;
        let matrix_reference_steps: usize = get(&cfg, "matrix.reference_steps", 4000)?;

        let grid_n: usize = get(&cfg, "circle.N", 256)?;
        if grid_n < 4 || !grid_n.is_multiple_of(2) {
            return Err(RunError::Config(format!(
                "circle.N must be even and >= 4, got {grid_n}"
            )));
        }
        let profile: AngleProfile = get(&cfg, "circle.drift", AngleProfile::Constant(0.0))?;
        let domain: Vec<f64> = list(&cfg, "circle.domain", &[0.0, 1.0])?;
        if domain.len() != 2 {
            return Err(RunError::Config("circle.domain needs two numbers".into()));
        }
        let domain =
            TimeInterval::new(domain[0], domain[1]).map_err(|e| RunError::Config(e.to_string()))?;
        let drift = DriftPath::new(profile, domain);
        let observable: Observable = get(&cfg, "circle.observable", Observable::Cos)?;
        let circle_reference_steps: usize = get(&cfg, "circle.reference_steps", 4000)?;

        let mc = McConfig {
            paths: get(&cfg, "mc.paths", 200_000)?,
            substeps: get(&cfg, "mc.substeps", 200)?,
            seed: get(&cfg, "mc.seed", seed)?,
            antithetic: get(&cfg, "mc.antithetic", false)?,
        };
        if kind == ExperimentKind::McCrossval {
            mc.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        let theta0: f64 = get(&cfg, "mc.theta0", 0.0)?;

        let tau: f64 = get(&cfg, "asymptotics.tau", 0.6)?;
        let default_dtaus: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
        let dtaus: Vec<f64> = list(&cfg, "asymptotics.dtau", &default_dtaus)?;
        if dtaus.len() < 3 || dtaus.iter().any(|d| d.is_nan() || *d <= 0.0) {
            return Err(RunError::Config(
                "asymptotics.dtau needs at least 3 positive steps".into(),
            ));
        }
        let node: usize = get(&cfg, "asymptotics.node", 0)?;

        let probe_target = match cfg.get("probe.target").unwrap_or("circle") {
            "circle" => ProbeTarget::Circle,
            "matrix" => ProbeTarget::Matrix,
            other => return Err(RunError::Config(format!("unknown probe.target `{other}`"))),
        };
        let probe_trials: usize = get(&cfg, "probe.trials", 200)?;
        let probe_max_factors: usize = get(&cfg, "probe.max_factors", 8)?;

        let outdir: PathBuf = get(&cfg, "output.dir", PathBuf::from("out"))?;
        let plot: bool = get(&cfg, "output.plot", true)?;

        Ok(Self {
            kind,
            seed,
            interval,
            schedule,
            matrix_family,
            family,
            variant,
            matrix_reference_steps,
            grid_n,
            drift,
            observable,
            circle_reference_steps,
            mc,
            theta0,
            tau,
            dtaus,
            node,
            probe_target,
            probe_trials,
            probe_max_factors,
            outdir,
            plot,
            source: cfg,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(
            "kind = circle-convergence\n[partition]\nschedule = 4, 8, 16\n",
            &[],
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::CircleConvergence);
        assert_eq!(cfg.schedule, vec![4, 8, 16]);
        assert_eq!(cfg.grid_n, 256);
        assert_eq!(cfg.observable, Observable::Cos);
    }

    #[test]
    fn overrides_win() {
        let over = vec![
            "--circle.drift=linear(0.7)".to_string(),
            "--partition.schedule=2,4,8".to_string(),
        ];
        let cfg = ExperimentConfig::parse(
            "kind = circle-convergence\n[partition]\nschedule = 4\n",
            &over,
        )
        .unwrap();
        assert_eq!(cfg.schedule, vec![2, 4, 8]);
        assert_eq!(cfg.drift.profile(), &AngleProfile::Linear(0.7));
        assert_eq!(cfg.source.get("circle.drift"), Some("linear(0.7)"));
    }

    #[test]
    fn validation_errors() {
        let bad = [
            "kind = nonsense\n",
            "kind = matrix-convergence\n",
            "kind = matrix-convergence\n[partition]\nschedule = 8, 4\n",
            "kind = matrix-convergence\n[partition]\nschedule = 4\n[matrix]\nfamily = missing\n",
            "kind = circle-convergence\n[partition]\nschedule = 4\n[circle]\nN = 255\n",
            "kind = circle-convergence\n[partition]\nschedule = 4\n[interval]\ns = 1\nt = 0.5\n",
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::parse(text, &[]), Err(RunError::Config(_))),
                "{text}"
            );
        }
        assert!(apply_overrides(&mut KeyValueConfig::default(), &["circle.N=4".into()]).is_err());
    }

    #[test]
    fn inline_matrix_family() {
        let text = "kind = matrix-convergence\n[partition]\nschedule = 4,8,16\n[matrix]\nfamily = mine\n[mine]\ndim = 2\nterm.0.profile = 1\nterm.0.matrix = -1 0; 0 -2\n";
        let cfg = ExperimentConfig::parse(text, &[]).unwrap();
        assert_eq!(cfg.family.dim(), 2);
    }
}
