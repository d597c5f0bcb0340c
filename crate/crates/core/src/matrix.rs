//! Finite-dimensional testbed: `E = R^n` with time-dependent matrix
//! generators, reference evolution families and three first-order
//! propagator families.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evolution::{
    check_dim, EvolutionOracle, GeneratorFamily, NormKind, PropagatorFamily, StateVector,
};
use crate::ini::KeyValueConfig;

/// Shipped generator presets, as config text.
pub const PRESETS: &str = include_str!("../presets/matrix.ini");

/// `exp(A)` by scaling and squaring around a truncated Taylor series.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix_exp input"));
    }
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * 1e-2 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trig {
    One,
    Cos(f64),
    Sin(f64),
}

/// `coeff * t^power * trig(t)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerm {
    pub coeff: f64,
    pub power: i32,
    pub trig: Trig,
}

/// Smooth scalar profile, a finite sum of [`ProfileTerm`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProfile {
    terms: Vec<ProfileTerm>,
}

impl ScalarProfile {
    pub fn new(terms: Vec<ProfileTerm>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![ProfileTerm {
            coeff: c,
            power: 0,
            trig: Trig::One,
        }])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let trig = match term.trig {
                    Trig::One => 1.0,
                    Trig::Cos(w) => (w * t).cos(),
                    Trig::Sin(w) => (w * t).sin(),
                };
                term.coeff * t.powi(term.power) * trig
            })
            .sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.power == 0 && t.trig == Trig::One)
    }

    /// `∫_s^t a(r) dr` by adaptive Simpson quadrature.
    pub fn integrate(&self, s: f64, t: f64, tol: f64) -> f64 {
        adaptive_simpson(&|r| self.eval(r), s, t, tol)
    }
}

impl FromStr for ScalarProfile {
    type Err = String;

    /// Parses `;`-separated terms of the form `coeff [t^p] [cos(w)|sin(w)]`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut terms = Vec::new();
        for raw in s.split(';') {
            let mut tokens = raw.split_whitespace();
            let coeff: f64 = tokens
                .next()
                .ok_or_else(|| format!("empty profile term in `{s}`"))?
                .parse()
                .map_err(|e| format!("bad coefficient in `{raw}`: {e}"))?;
            let mut term = ProfileTerm {
                coeff,
                power: 0,
                trig: Trig::One,
            };
            for tok in tokens {
                if tok == "t" {
                    term.power = 1;
                } else if let Some(p) = tok.strip_prefix("t^") {
                    term.power = p.parse().map_err(|e| format!("bad power `{tok}`: {e}"))?;
                } else if let Some(w) = tok.strip_prefix("cos(").and_then(|r| r.strip_suffix(')')) {
                    term.trig = Trig::Cos(w.parse().map_err(|e| format!("bad `{tok}`: {e}"))?);
                } else if let Some(w) = tok.strip_prefix("sin(").and_then(|r| r.strip_suffix(')')) {
                    term.trig = Trig::Sin(w.parse().map_err(|e| format!("bad `{tok}`: {e}"))?);
                } else {
                    return Err(format!("unrecognised profile token `{tok}`"));
                }
            }
            terms.push(term);
        }
        Ok(Self::new(terms))
    }
}

impl fmt::Display for ScalarProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}", term.coeff)?;
            if term.power != 0 {
                write!(f, " t^{}", term.power)?;
            }
            match term.trig {
                Trig::One => {}
                Trig::Cos(w) => write!(f, " cos({w})")?,
                Trig::Sin(w) => write!(f, " sin({w})")?,
            }
        }
        Ok(())
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `A(t) = Σ_i a_i(t) M_i` on `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGeneratorFamily {
    dim: usize,
    terms: Vec<(ScalarProfile, DMatrix<f64>)>,
}

impl MatrixGeneratorFamily {
    pub fn new(dim: usize, terms: Vec<(ScalarProfile, DMatrix<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCount("matrix dimension must be >= 1".into()));
        }
        for (_, m) in &terms {
            check_dim(dim, m.nrows())?;
            check_dim(dim, m.ncols())?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("matrix family coefficient"));
            }
        }
        Ok(Self { dim, terms })
    }

    /// Reads a family from `<name>.dim` and `<name>.term.<i>.{profile,matrix}`.
    pub fn from_config(cfg: &KeyValueConfig, name: &str) -> std::result::Result<Self, String> {
        let dim: usize = cfg
            .get(&format!("{name}.dim"))
            .ok_or_else(|| format!("matrix family `{name}` has no `dim`"))?
            .parse()
            .map_err(|e| format!("{name}.dim: {e}"))?;
        let mut terms = Vec::new();
        for i in 0.. {
            let Some(profile) = cfg.get(&format!("{name}.term.{i}.profile")) else {
                break;
            };
            let matrix = cfg
                .get(&format!("{name}.term.{i}.matrix"))
                .ok_or_else(|| format!("{name}.term.{i} has a profile but no matrix"))?;
            terms.push((profile.parse()?, parse_matrix(matrix, dim)?));
        }
        if terms.is_empty() {
            return Err(format!("matrix family `{name}` has no terms"));
        }
        Self::new(dim, terms).map_err(|e| e.to_string())
    }

    /// A named family from [`PRESETS`].
    pub fn preset(name: &str) -> std::result::Result<Self, String> {
        let cfg = KeyValueConfig::parse(PRESETS).map_err(|e| e.to_string())?;
        Self::from_config(&cfg, name)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for (profile, m) in &self.terms {
            a += m * profile.eval(t);
        }
        a
    }

    pub fn terms(&self) -> &[(ScalarProfile, DMatrix<f64>)] {
        &self.terms
    }
}

pub fn parse_matrix(text: &str, dim: usize) -> std::result::Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| format!("bad entry `{v}`: {e}"))
                })
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(format!("expected a {dim}x{dim} matrix, got `{text}`"));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Largest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn log_norm(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `A(t) = a(t) A₀`; all values of the family commute.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutingFamilySpec {
    pub base: DMatrix<f64>,
    pub profile: ScalarProfile,
}

impl CommutingFamilySpec {
    pub fn family(&self) -> Result<MatrixGeneratorFamily> {
        MatrixGeneratorFamily::new(
            self.base.nrows(),
            vec![(self.profile.clone(), self.base.clone())],
        )
    }

    /// A single-term family, read back as a commuting spec.
    pub fn from_family(family: &MatrixGeneratorFamily) -> Option<Self> {
        match family.terms() {
            [(profile, base)] => Some(Self {
                base: base.clone(),
                profile: profile.clone(),
            }),
            _ => None,
        }
    }
}

/// `U(s,t)` from the final-value problem `∂_σ U(σ,t) = -A(σ) U(σ,t)`,
/// `U(t,t) = I`, integrated from `σ = t` down to `σ = s` with classical RK4.
pub fn ode_evolution_oracle(
    family: &MatrixGeneratorFamily,
    s: f64,
    t: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    if s > t {
        return Err(Error::InvalidInterval(format!("s = {s} > t = {t}")));
    }
    if steps == 0 {
        return Err(Error::InvalidCount("ode oracle needs steps >= 1".into()));
    }
    let n = family.dim();
    let mut u = DMatrix::<f64>::identity(n, n);
    if s == t {
        return Ok(u);
    }
    // W(τ) = U(t - τ, t) solves W' = A(t - τ) W forward in τ
    let h = (t - s) / steps as f64;
    for k in 0..steps {
        let sigma = t - k as f64 * h;
        let a0 = family.eval(sigma);
        let ah = family.eval(sigma - 0.5 * h);
        let a1 = family.eval(sigma - h);
        let k1 = &a0 * &u;
        let k2 = &ah * (&u + &k1 * (0.5 * h));
        let k3 = &ah * (&u + &k2 * (0.5 * h));
        let k4 = &a1 * (&u + &k3 * h);
        u += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(u)
}

/// `exp((∫_s^t a) A₀)` with the scalar integral computed to 1e-13.
pub fn commuting_evolution_oracle(
    spec: &CommutingFamilySpec,
    s: f64,
    t: f64,
) -> Result<DMatrix<f64>> {
    if s > t {
        return Err(Error::InvalidInterval(format!("s = {s} > t = {t}")));
    }
    let integral = spec.profile.integrate(s, t, 1e-13);
    matrix_exp(&(&spec.base * integral))
}

/// Evolution family backed by [`ode_evolution_oracle`].
#[derive(Debug, Clone)]
pub struct OdeEvolution {
    pub family: MatrixGeneratorFamily,
    pub steps: usize,
}

impl EvolutionOracle for OdeEvolution {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn evolve(&self, s: f64, t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.family.dim(), x.len())?;
        if s == t {
            return Ok(x.clone());
        }
        let u = ode_evolution_oracle(&self.family, s, t, self.steps)?;
        Ok(mat_vec(&u, x))
    }
}

/// Evolution family backed by [`commuting_evolution_oracle`].
#[derive(Debug, Clone)]
pub struct CommutingEvolution {
    pub spec: CommutingFamilySpec,
}

impl EvolutionOracle for CommutingEvolution {
    fn dim(&self) -> usize {
        self.spec.base.nrows()
    }

    fn evolve(&self, s: f64, t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.spec.base.nrows(), x.len())?;
        if s == t {
            return Ok(x.clone());
        }
        let u = commuting_evolution_oracle(&self.spec, s, t)?;
        Ok(mat_vec(&u, x))
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &StateVector) -> StateVector {
    let v = m * DVector::from_column_slice(x.entries());
    StateVector::new(v.as_slice().to_vec(), x.norm_kind())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorVariant {
    FrozenExponential,
    ImplicitEuler,
    ExplicitEuler,
}

impl PropagatorVariant {
    pub const ALL: [PropagatorVariant; 3] = [
        PropagatorVariant::FrozenExponential,
        PropagatorVariant::ImplicitEuler,
        PropagatorVariant::ExplicitEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropagatorVariant::FrozenExponential => "frozen-exponential",
            PropagatorVariant::ImplicitEuler => "implicit-euler",
            PropagatorVariant::ExplicitEuler => "explicit-euler",
        }
    }
}

impl FromStr for PropagatorVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown propagator variant `{s}`"))
    }
}

/// `Q_{t1,t2}` built from `A(t2)`, the generator frozen at the right endpoint.
#[derive(Debug, Clone)]
pub struct MatrixPropagator {
    family: MatrixGeneratorFamily,
    variant: PropagatorVariant,
}

pub fn build_propagator(
    family: MatrixGeneratorFamily,
    variant: PropagatorVariant,
) -> MatrixPropagator {
    MatrixPropagator { family, variant }
}

impl MatrixPropagator {
    pub fn family(&self) -> &MatrixGeneratorFamily {
        &self.family
    }

    pub fn variant(&self) -> PropagatorVariant {
        self.variant
    }

    /// Largest admissible explicit-Euler step at time `t`: `1 / (2 ‖A(t)‖_max)`.
    pub fn explicit_step_cap(&self, t: f64) -> f64 {
        let amax = self.family.eval(t).amax();
        if amax == 0.0 {
            f64::INFINITY
        } else {
            0.5 / amax
        }
    }

    pub fn factor(&self, t1: f64, t2: f64) -> Result<DMatrix<f64>> {
        if !(t1 < t2) {
            return Err(Error::InvalidInterval(format!(
                "Q needs t1 < t2, got ({t1}, {t2})"
            )));
        }
        let dt = t2 - t1;
        let a = self.family.eval(t2);
        let n = self.family.dim();
        let id = DMatrix::<f64>::identity(n, n);
        match self.variant {
            PropagatorVariant::FrozenExponential => matrix_exp(&(a * dt)),
            PropagatorVariant::ImplicitEuler => (id - a * dt)
                .try_inverse()
                .filter(|m| m.iter().all(|v| v.is_finite()))
                .ok_or(Error::SingularStep { t1, t2 }),
            PropagatorVariant::ExplicitEuler => {
                let cap = self.explicit_step_cap(t2);
                if dt > cap {
                    return Err(Error::InvalidStep(format!(
                        "explicit-euler step {dt} on [{t1}, {t2}] exceeds cap {cap}"
                    )));
                }
                Ok(id + a * dt)
            }
        }
    }
}

impl PropagatorFamily for MatrixPropagator {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn norm_kind(&self) -> NormKind {
        NormKind::Euclidean
    }

    fn apply(&self, t1: f64, t2: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.family.dim(), x.len())?;
        Ok(mat_vec(&self.factor(t1, t2)?, x))
    }

    /// The explicit-Euler cap, sampled on `[t1, t2]` and shaved by 5%.
    fn max_step(&self, t1: f64, t2: f64) -> f64 {
        match self.variant {
            PropagatorVariant::ExplicitEuler => {
                let worst = (0..=1024)
                    .map(|k| self.family.eval(t1 + (t2 - t1) * k as f64 / 1024.0).amax())
                    .fold(0.0, f64::max);
                if worst == 0.0 {
                    f64::INFINITY
                } else {
                    0.95 * 0.5 / worst
                }
            }
            _ => f64::INFINITY,
        }
    }
}

/// The generator family `t -> A(t)` acting on state vectors.
#[derive(Debug, Clone)]
pub struct MatrixGenerator<'a>(pub &'a MatrixGeneratorFamily);

impl GeneratorFamily for MatrixGenerator<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.0.dim(), x.len())?;
        Ok(mat_vec(&self.0.eval(t), x))
    }
}
