use std::f64::consts::PI;

use super::spherical::{mean_at, sphere_mean_of, QuadRule};
use crate::fields::Field;
use crate::geom::{self, intersection_half_angle, Point};

/// Rotational ellipsoidal mean with foci `x`, `z` and string length `t`,
///
/// ```text
/// N[q](x,z,t) = (1/16π²) ∫ q(y) δ(|y−x| + |y−z| − t) / (|y−x||y−z|) dy.
/// ```
///
/// In prolate spheroidal coordinates the weight `1/(|y−x||y−z|)` cancels the
/// volume element, so `N = (1/8π)` times the mean of `q` over the unit
/// sphere pushed onto the spheroid by the axis-aligned affine map with
/// semi-axes `t/2` and `√(t²/4 − |x−z|²/4)`. For `x = z` this is
/// `(1/8π) M₂[q](x, t/2)`.
pub fn ellipsoidal_mean(q: &dyn Field, x: &Point, z: &Point, t: f64) -> f64 {
    ellipsoidal_mean_with(q, x, z, t, &QuadRule::for_field(q))
}

pub fn ellipsoidal_mean_with(q: &dyn Field, x: &Point, z: &Point, t: f64, rule: &QuadRule) -> f64 {
    let c = 0.5 * geom::dist(x, z);
    if t <= 2.0 * c {
        return 0.0;
    }
    let Some(supp) = q.support() else {
        return 0.0;
    };
    let a = 0.5 * t;
    let center = geom::scale(&geom::add(x, z), 0.5);
    // quick rejection: every point of the spheroid is at least b from its center
    let b = ((a - c) * (a + c)).sqrt();
    let dc = geom::dist(&supp.center, &center);
    if dc + supp.radius < b || dc - supp.radius > a {
        return 0.0;
    }
    if c < 1e-12 * a {
        return mean_at(q, &center, a, rule) / (8.0 * PI);
    }
    let e = geom::scale(&geom::sub(x, z), 0.5 / c);
    // preimage of the support center under y = center + L ω
    let rel = geom::sub(&supp.center, &center);
    let along = geom::dot(&rel, &e);
    let perp = geom::axpy(&rel, -along, &e);
    let pre = geom::axpy(&geom::scale(&perp, 1.0 / b), along / a, &e);
    let d0 = geom::norm(&pre);
    let Some(gamma) = intersection_half_angle(1.0, d0, supp.radius / b) else {
        return 0.0;
    };
    let axis = if d0 > 0.0 { geom::scale(&pre, 1.0 / d0) } else { e };
    let m = sphere_mean_of(3, &axis, gamma, a, rule, |w| {
        let s = geom::dot(w, &e);
        let y = geom::axpy(&geom::axpy(&center, a * s, &e), b, &geom::axpy(w, -s, &e));
        q.value(&y)
    });
    m / (8.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpSpec, BumpSum};

    fn bump() -> BumpSum {
        BumpSum::new(3, &[BumpSpec::with_peak(vec![0.1, 0.05, -0.1], 0.25, 1.0)])
    }

    #[test]
    fn zero_field() {
        let q = BumpSum::zero(3);
        assert_eq!(ellipsoidal_mean(&q, &[1.0, 0.0, 0.0], &[0.5, 0.0, 0.0], 1.5), 0.0);
    }

    #[test]
    fn spheroid_missing_support() {
        let q = bump();
        // too short a string to reach the bump
        assert_eq!(ellipsoidal_mean(&q, &[1.0, 0.0, 0.0], &[0.9, 0.0, 0.0], 0.2), 0.0);
        // too long: the spheroid encloses the bump
        assert_eq!(ellipsoidal_mean(&q, &[1.0, 0.0, 0.0], &[0.9, 0.0, 0.0], 5.0), 0.0);
        assert_eq!(ellipsoidal_mean(&q, &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], 0.5), 0.0);
    }

    #[test]
    fn degenerate_limit() {
        let q = bump();
        let x = [0.0, 0.0, 1.0];
        for t in [1.6, 2.0, 2.4] {
            let n = ellipsoidal_mean(&q, &x, &x, t);
            let m = mean_at(&q, &x, 0.5 * t, &QuadRule::for_field(&q)) / (8.0 * PI);
            assert!((n - m).abs() < 1e-14);
            let z = geom::axpy(&x, 1e-7, &[0.3, 0.0, -0.9]);
            let nz = ellipsoidal_mean(&q, &x, &z, t);
            assert!((nz - m).abs() < 1e-4 * m.abs().max(1e-12), "{nz} vs {m}");
        }
    }

    #[test]
    fn matches_mollified_delta_volume_sum() {
        let q = BumpSum::new(3, &[BumpSpec::with_peak(vec![0.1, 0.0, 0.0], 0.2, 1.0)]);
        let x = [1.0, 0.0, 0.0];
        let z = [0.2, 0.4, 0.0];
        let t = geom::dist(&x, &z) + 0.35;
        let v = ellipsoidal_mean(&q, &x, &z, t);
        // Riemann sum over the support cube with a narrow Gaussian for δ
        let eps = 0.004;
        let n = 240;
        let h = 0.4 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let y = [
                        -0.1 + (i as f64 + 0.5) * h,
                        -0.2 + (j as f64 + 0.5) * h,
                        -0.2 + (k as f64 + 0.5) * h,
                    ];
                    let qv = q.value(&y);
                    if qv == 0.0 {
                        continue;
                    }
                    let a = geom::dist(&y, &x);
                    let b = geom::dist(&y, &z);
                    let s = a + b - t;
                    let delta = (-0.5 * s * s / (eps * eps)).exp() / (eps * (2.0 * PI).sqrt());
                    acc += qv * delta / (a * b);
                }
            }
        }
        let oracle = acc * h * h * h / (16.0 * PI * PI);
        assert!(((v - oracle) / oracle).abs() < 1e-3, "{v} vs {oracle}");
    }
}
