//! `S¹` as the unit circle in `R²`.

use crate::error::{Error, Result};

/// Radius of the tubular neighbourhood on which the nearest-point
/// projection is used; below the curvature radius 1.
pub const TUBE_RADIUS: f64 = 0.5;

pub type Point2 = [f64; 2];

pub fn embed(theta: f64) -> Point2 {
    [theta.cos(), theta.sin()]
}

/// Unit tangent `e_θ = (-sin θ, cos θ)`.
pub fn tangent(theta: f64) -> Point2 {
    [-theta.sin(), theta.cos()]
}

pub fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Point2) -> f64 {
    dot(a, a).sqrt()
}

/// Nearest point of the circle: radial projection `x / |x|`.
pub fn project(x: Point2) -> Point2 {
    let r = norm(x);
    [x[0] / r, x[1] / r]
}

/// Splits a displacement `u` at `y ∈ S¹` into the part realised on the
/// circle, `u_M = P(y + u) - y`, and the remainder `u_⊥ = u - u_M`.
pub fn normal_decompose(u: Point2, y: Point2) -> Result<(Point2, Point2)> {
    let size = norm(u);
    if size >= TUBE_RADIUS {
        return Err(Error::OutsideTube {
            norm: size,
            radius: TUBE_RADIUS,
        });
    }
    let p = project([y[0] + u[0], y[1] + u[1]]);
    let on = [p[0] - y[0], p[1] - y[1]];
    Ok((on, [u[0] - on[0], u[1] - on[1]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn embed_and_tangent_values() {
        assert_eq!(embed(0.0), [1.0, 0.0]);
        assert_eq!(tangent(0.0), [-0.0, 1.0]);
        let e = embed(FRAC_PI_2);
        assert!(e[0].abs() < 1e-16 && (e[1] - 1.0).abs() < 1e-16);
        let t = tangent(FRAC_PI_2);
        assert!((t[0] + 1.0).abs() < 1e-16 && t[1].abs() < 1e-16);
    }

    #[test]
    fn tangent_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let th = rng.random_range(-10.0..10.0);
            assert!(dot(embed(th), tangent(th)).abs() < 1e-15);
            assert!((norm(embed(th)) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn decompose_zero_and_outside() {
        let y = embed(0.7);
        let (m, p) = normal_decompose([0.0, 0.0], y).unwrap();
        assert!(norm(m) < 1e-16 && norm(p) < 1e-16);
        assert!(matches!(
            normal_decompose([0.6, 0.0], y),
            Err(Error::OutsideTube { .. })
        ));
    }

    #[test]
    fn tangent_displacement_has_quadratic_normal_part() {
        let y = embed(1.1);
        let e = tangent(1.1);
        let perp = |h: f64| norm(normal_decompose([h * e[0], h * e[1]], y).unwrap().1);
        let (a, b) = (perp(1e-2), perp(5e-3));
        assert!(((a / b).log2() - 2.0).abs() < 0.05);
    }

    #[test]
    fn radial_displacement_is_all_normal() {
        let y = embed(-0.4);
        for c in [1e-3, 1e-4] {
            let u = [c * y[0], c * y[1]];
            let (m, p) = normal_decompose(u, y).unwrap();
            assert!(norm(m) < 1e-15);
            assert!(norm([p[0] - u[0], p[1] - u[1]]) < 1e-15);
        }
    }

    #[test]
    fn normal_part_scales_to_normal_projection() {
        let y = embed(2.0);
        let v = [0.3, -0.8];
        let pr = dot(v, y);
        let expected = [pr * y[0], pr * y[1]];
        let mut last = f64::INFINITY;
        for h in [1e-2, 1e-3, 1e-4] {
            let (_, p) = normal_decompose([h * v[0], h * v[1]], y).unwrap();
            let err = norm([p[0] / h - expected[0], p[1] / h - expected[1]]);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
    }
}
