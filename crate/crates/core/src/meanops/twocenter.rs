use std::f64::consts::{FRAC_PI_2, PI};

use super::spherical::QuadRule;
use crate::fields::Field;
use crate::geom::{self, Point};
use crate::quad::gauss_legendre;
use crate::specfun::agm;

/// Inner integral of the planar scattering kernel,
///
/// ```text
/// I(a, b, t) = ∫_a^{t−b} dτ / (√(τ² − a²) √((t−τ)² − b²)),   a + b < t,
/// ```
///
/// which is a complete elliptic integral with the closed form
/// `π / AGM(√(t² − (a−b)²), 2√(ab))`. Zero for `a + b ≥ t`.
#[inline]
pub fn pair_kernel(a: f64, b: f64, t: f64) -> f64 {
    if a + b >= t {
        return 0.0;
    }
    let p = ((t - a + b) * (t + a - b)).sqrt();
    let q = 2.0 * (a * b).sqrt();
    if q == 0.0 {
        return f64::INFINITY;
    }
    PI / agm(p, q)
}

/// The same integral after `τ = m + w sin φ`, which removes both
/// inverse-square-root endpoint singularities.
pub fn pair_kernel_sine_quadrature(a: f64, b: f64, t: f64, panels: usize) -> f64 {
    if a + b >= t {
        return 0.0;
    }
    let m = 0.5 * (a + t - b);
    let w = 0.5 * (t - b - a);
    let rule = gauss_legendre(20);
    let h = PI / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = -FRAC_PI_2 + p as f64 * h;
        for (phi, wt) in rule.mapped(lo, lo + h) {
            let tau = m + w * phi.sin();
            acc += wt / ((tau + a).sqrt() * (t - tau + b).sqrt());
        }
    }
    acc
}

/// Diagonal kernel `k(t, r) = I(r, r, t) = π / AGM(t, 2r)`, zero for `2r ≥ t`.
#[inline]
pub fn kernel_k(t: f64, r: f64) -> f64 {
    pair_kernel(r, r, t)
}

/// `W(x,z,t) = ∫ q(y) I(|x−y|, |z−y|, t) dy` over the elliptic region
/// `|x−y| + |y−z| < t`.
///
/// The area integral is written in polar coordinates about `z`. Each ray is
/// clipped to the support disc of `q` and to the ellipse, whose boundary on
/// the ray at angle `φ` is `ρ_max(φ) = (t² − d²) / (2(t − e(φ)·(x−z)))`. The
/// angular range is split where `ρ_max` crosses the chord ends, since the
/// radial integral has kinks there.
pub fn twocenter_kernel_2d(q: &dyn Field, x: &Point, z: &Point, t: f64) -> f64 {
    twocenter_kernel_2d_with(q, x, z, t, &QuadRule::for_field(q))
}

pub fn twocenter_kernel_2d_with(q: &dyn Field, x: &Point, z: &Point, t: f64, rule: &QuadRule) -> f64 {
    let w = geom::sub(x, z);
    let d = geom::norm(&w);
    if t <= d {
        return 0.0;
    }
    let Some(s) = q.support() else {
        return 0.0;
    };
    let c = s.center;
    let rho = s.radius;
    let lower = (geom::dist(&c, x) - rho).max(0.0) + (geom::dist(&c, z) - rho).max(0.0);
    if lower >= t {
        return 0.0;
    }
    let cz = geom::sub(&c, z);
    let dcz = geom::norm(&cz);
    let (phi0, phi1) = if dcz > rho {
        let mid = cz[1].atan2(cz[0]);
        let half = (rho / dcz).asin();
        (mid - half, mid + half)
    } else {
        (0.0, 2.0 * PI)
    };
    let t2d2 = t * t - d * d;
    let chord = |phi: f64| -> (f64, f64, f64, Point) {
        let e = geom::planar_direction(phi);
        let p = geom::dot(&e, &cz);
        let disc = p * p - dcz * dcz + rho * rho;
        let root = disc.max(0.0).sqrt();
        let r1 = (p - root).max(0.0);
        let r2 = (p + root).max(0.0);
        let rmax = t2d2 / (2.0 * (t - geom::dot(&e, &w)));
        (r1, r2, rmax, e)
    };

    // split points where the ellipse boundary crosses a chord end
    let mut cuts = vec![phi0, phi1];
    let probes = 64;
    let g = |phi: f64, which: usize| {
        let (r1, r2, rmax, _) = chord(phi);
        rmax - if which == 0 { r1 } else { r2 }
    };
    for which in 0..2 {
        if which == 0 && dcz <= rho {
            continue;
        }
        let mut prev_phi = phi0;
        let mut prev = g(phi0, which);
        for i in 1..=probes {
            let phi = phi0 + (phi1 - phi0) * i as f64 / probes as f64;
            let cur = g(phi, which);
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi, mut flo) = (prev_phi, phi, prev);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = g(mid, which);
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
            prev_phi = phi;
            prev = cur;
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let arc_scale = dcz.max(rho);
    let mut radial = |phi: f64| -> f64 {
        let (r1, r2, rmax, e) = chord(phi);
        let hi = r2.min(rmax);
        if hi <= r1 {
            return 0.0;
        }
        let integrand = |r: f64| {
            let y = geom::axpy(z, r, &e);
            let qv = q.value(&y);
            if qv == 0.0 {
                return 0.0;
            }
            let a = geom::dist(x, &y);
            qv * pair_kernel(a, r, t) * r
        };
        if r1 == 0.0 {
            // ρ = hi·u² tames the logarithmic singularity at y = z
            rule.integrate_scaled(0.0, 1.0, hi, &mut |u: f64| 2.0 * hi * u * integrand(hi * u * u))
        } else {
            rule.integrate_scaled(r1, hi, hi - r1, &mut |r: f64| integrand(r))
        }
    };
    let mut total = 0.0;
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a <= 0.0 {
            continue;
        }
        total += rule.integrate_scaled(a, b, (b - a) * arc_scale, &mut radial);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpSpec, BumpSum};
    use crate::meanops::spherical::mean_at;

    #[test]
    fn closed_form_matches_sine_quadrature() {
        for &(a, b, t) in &[(0.3, 0.5, 1.0), (0.01, 0.9, 1.0), (1.0, 1.0, 2.5), (0.2, 0.2, 0.41), (2.0, 0.1, 3.0)] {
            let c = pair_kernel(a, b, t);
            let o = pair_kernel_sine_quadrature(a, b, t, 16);
            assert!(((c - o) / o).abs() < 1e-12, "({a},{b},{t}): {c} vs {o}");
        }
        assert_eq!(pair_kernel(0.5, 0.6, 1.0), 0.0);
    }

    #[test]
    fn zero_field() {
        let q = BumpSum::zero(2);
        assert_eq!(twocenter_kernel_2d(&q, &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], 2.0), 0.0);
    }

    #[test]
    fn diagonal_reduces_to_polar_form() {
        let q = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.1, -0.05], 0.3, 1.0)]);
        let x = [1.0, 0.0, 0.0];
        for t in [1.4, 2.0, 2.6] {
            let rule = QuadRule::for_field(&q).refined(3.0);
            let w = twocenter_kernel_2d_with(&q, &x, &x, t, &rule);
            let polar = rule.integrate(0.0, 0.5 * t, |r| 2.0 * PI * r * mean_at(&q, &x, r, &rule) * kernel_k(t, r));
            assert!(((w - polar) / polar).abs() < 1e-8, "t={t}: {w} vs {polar}");
        }
    }

    #[test]
    fn matches_brute_force_with_z_inside_support() {
        let q = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.0, 0.1], 0.3, 1.0)]);
        let x = [0.0, -1.0, 0.0];
        let z = [0.05, 0.05, 0.0];
        let t = 1.35;
        let w = twocenter_kernel_2d(&q, &x, &z, t);
        // brute force in (y, τ): midpoint grid in y (cells avoid y = z), sine
        // substitution in τ
        let n = 1200;
        let h = 0.6 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = [-0.3 + (i as f64 + 0.5) * h, -0.2 + (j as f64 + 0.5) * h, 0.0];
                let qv = q.value(&y);
                if qv == 0.0 {
                    continue;
                }
                acc += qv * pair_kernel_sine_quadrature(geom::dist(&x, &y), geom::dist(&z, &y), t, 4);
            }
        }
        let oracle = acc * h * h;
        assert!(((w - oracle) / oracle).abs() < 1e-3, "{w} vs {oracle}");
    }

    #[test]
    fn refinement_converges_off_diagonal() {
        let q = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.2, 0.1], 0.25, 1.0)]);
        let x = [-0.6, -0.8, 0.0];
        let z = [0.7, 0.1, 0.0];
        for t in [1.7, 2.0, 2.5] {
            let base = QuadRule::for_field(&q);
            let a = twocenter_kernel_2d_with(&q, &x, &z, t, &base);
            let b = twocenter_kernel_2d_with(&q, &x, &z, t, &base.refined(3.0));
            let c = twocenter_kernel_2d_with(&q, &x, &z, t, &base.refined(6.0));
            assert!((a - c).abs() < 2e-6 * c.abs().max(1e-3), "t={t}: {a} vs {c}");
            assert!((b - c).abs() < 1e-7 * c.abs().max(1e-3), "t={t}: {b} vs {c}");
        }
    }
}
