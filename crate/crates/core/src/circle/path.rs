use std::fmt;
use std::str::FromStr;

use super::geometry::{embed, tangent, Point2};
use crate::error::{Error, Result};
use crate::evolution::TimeInterval;

#[derive(Debug, Clone, PartialEq)]
pub enum AngleProfile {
    /// `ψ(t) = ψ₀`
    Constant(f64),
    /// `ψ(t) = c t`
    Linear(f64),
    /// `ψ(t) = a sin(ω t)`
    Sine { amplitude: f64, frequency: f64 },
    /// `ψ(t) = Σ c_i t^i`
    Polynomial(Vec<f64>),
}

/// A `C²` angle path `ψ`, giving the moving point `φ(t) = (cos ψ, sin ψ)`
/// on the circle, defined on its own time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPath {
    profile: AngleProfile,
    domain: TimeInterval,
}

impl DriftPath {
    pub fn new(profile: AngleProfile, domain: TimeInterval) -> Self {
        Self { profile, domain }
    }

    pub fn profile(&self) -> &AngleProfile {
        &self.profile
    }

    pub fn domain(&self) -> TimeInterval {
        self.domain
    }

    pub fn with_domain(mut self, domain: TimeInterval) -> Self {
        self.domain = domain;
        self
    }

    pub fn psi(&self, t: f64) -> f64 {
        match &self.profile {
            AngleProfile::Constant(p) => *p,
            AngleProfile::Linear(c) => c * t,
            AngleProfile::Sine {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).sin(),
            AngleProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci),
        }
    }

    pub fn dpsi(&self, t: f64) -> f64 {
        match &self.profile {
            AngleProfile::Constant(_) => 0.0,
            AngleProfile::Linear(c) => *c,
            AngleProfile::Sine {
                amplitude,
                frequency,
            } => amplitude * frequency * (frequency * t).cos(),
            AngleProfile::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &ci)| acc * t + i as f64 * ci),
        }
    }

    pub fn ddpsi(&self, t: f64) -> f64 {
        match &self.profile {
            AngleProfile::Constant(_) | AngleProfile::Linear(_) => 0.0,
            AngleProfile::Sine {
                amplitude,
                frequency,
            } => -amplitude * frequency * frequency * (frequency * t).sin(),
            AngleProfile::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, &ci)| acc * t + (i * (i - 1)) as f64 * ci),
        }
    }

    pub fn phi(&self, t: f64) -> Point2 {
        embed(self.psi(t))
    }

    /// `φ'(t) = ψ'(t) e_θ(ψ(t))`
    pub fn dphi(&self, t: f64) -> Point2 {
        let e = tangent(self.psi(t));
        let d = self.dpsi(t);
        [d * e[0], d * e[1]]
    }

    /// `φ''(t) = ψ'' e_θ - ψ'² φ`
    pub fn ddphi(&self, t: f64) -> Point2 {
        let p = self.psi(t);
        let (e, x) = (tangent(p), embed(p));
        let (d1, d2) = (self.dpsi(t), self.ddpsi(t));
        [d2 * e[0] - d1 * d1 * x[0], d2 * e[1] - d1 * d1 * x[1]]
    }

    /// Drift field `b(t,θ) = φ'(t)·e_θ(θ) = ψ'(t) cos(ψ(t) - θ)`.
    pub fn drift(&self, t: f64, theta: f64) -> f64 {
        let v = self.dphi(t);
        let e = tangent(theta);
        v[0] * e[0] + v[1] * e[1]
    }

    /// `sup |φ''|` sampled at `samples + 1` points of the domain.
    pub fn sup_ddphi(&self, samples: usize) -> f64 {
        let d = self.domain;
        (0..=samples)
            .map(|i| {
                let a = self.ddphi(d.start() + d.length() * i as f64 / samples.max(1) as f64);
                a[0].hypot(a[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn check_times(&self, s: f64, t: f64) -> Result<()> {
        if !(self.domain.contains(s) && self.domain.contains(t)) {
            return Err(Error::InvalidInterval(format!(
                "[{s}, {t}] is outside the drift path domain [{}, {}]",
                self.domain.start(),
                self.domain.end()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AngleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AngleProfile::Constant(p) => write!(f, "constant({p})"),
            AngleProfile::Linear(c) => write!(f, "linear({c})"),
            AngleProfile::Sine {
                amplitude,
                frequency,
            } => write!(f, "sine({amplitude},{frequency})"),
            AngleProfile::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(f64::to_string).collect();
                write!(f, "poly({})", parts.join(","))
            }
        }
    }
}

impl FromStr for AngleProfile {
    type Err = String;

    /// `constant(ψ₀)`, `linear(c)`, `sine(a,ω)` or `poly(c0,c1,...)`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("drift preset `{s}` must look like name(args)"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("drift preset `{s}` is missing `)`"))?;
        let nums: Vec<f64> = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad number `{a}` in `{s}`: {e}"))
            })
            .collect::<std::result::Result<_, _>>()?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "`{name}` takes {n} argument(s), got {}",
                    nums.len()
                ))
            }
        };
        match name.trim() {
            "constant" => arity(1).map(|_| AngleProfile::Constant(nums[0])),
            "linear" => arity(1).map(|_| AngleProfile::Linear(nums[0])),
            "sine" => arity(2).map(|_| AngleProfile::Sine {
                amplitude: nums[0],
                frequency: nums[1],
            }),
            "poly" if !nums.is_empty() => Ok(AngleProfile::Polynomial(nums)),
            other => Err(format!("unknown drift preset `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::geometry::norm;
    use super::*;

    fn unit() -> TimeInterval {
        TimeInterval::new(0.0, 1.0).unwrap()
    }

    fn presets() -> Vec<DriftPath> {
        [
            "constant(0.3)",
            "linear(0.7)",
            "sine(0.8,3)",
            "poly(0.1,-0.5,2,0.7)",
        ]
        .iter()
        .map(|s| DriftPath::new(s.parse().unwrap(), unit()))
        .collect()
    }

    #[test]
    fn parse_round_trip() {
        for p in presets() {
            let back: AngleProfile = p.profile().to_string().parse().unwrap();
            assert_eq!(&back, p.profile());
        }
        assert!("wiggle(1)".parse::<AngleProfile>().is_err());
        assert!("linear(1,2)".parse::<AngleProfile>().is_err());
        assert!("linear 1".parse::<AngleProfile>().is_err());
    }

    #[test]
    fn stays_on_circle_and_derivatives_agree() {
        let h = 1e-6;
        for p in presets() {
            for i in 0..=20 {
                let t = 0.05 * i as f64 * 0.9;
                assert!((norm(p.phi(t)) - 1.0).abs() < 1e-15);
                let a = p.phi(t + h);
                let b = p.phi(t);
                let v = p.dphi(t);
                let fd = [(a[0] - b[0]) / h - v[0], (a[1] - b[1]) / h - v[1]];
                assert!(norm(fd) <= p.sup_ddphi(200) * h + 1e-8);
                let dd = (p.dpsi(t + h) - p.dpsi(t - h)) / (2.0 * h);
                assert!((dd - p.ddpsi(t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn drift_matches_cosine_form() {
        for p in presets() {
            for i in 0..50 {
                let t = i as f64 / 50.0;
                let th = 0.37 * i as f64;
                let expected = p.dpsi(t) * (p.psi(t) - th).cos();
                assert!((p.drift(t, th) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn difference_quotient_bound() {
        for p in presets() {
            let bound = 0.5 * p.sup_ddphi(2000);
            for &dt in &[0.1, 0.01, 0.001] {
                for i in 1..=10 {
                    let tau = 0.1 * i as f64;
                    if tau - dt < 0.0 {
                        continue;
                    }
                    let a = p.phi(tau);
                    let b = p.phi(tau - dt);
                    let v = p.dphi(tau);
                    let q = [(a[0] - b[0]) / dt - v[0], (a[1] - b[1]) / dt - v[1]];
                    assert!(norm(q) <= bound * dt * (1.0 + 1e-9) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn domain_validation() {
        let p = DriftPath::new(AngleProfile::Linear(1.0), unit());
        assert!(p.check_times(0.2, 1.0).is_ok());
        assert!(p.check_times(-0.1, 0.5).is_err());
    }
}
