use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fields::Field;
use crate::geom::{self, intersection_half_angle, Point};
use crate::quad::gauss_legendre;

/// Means over spheres (circles) about a set of centers; `values[ic * nr + ir]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanData {
    pub dim: usize,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl MeanData {
    pub fn zeros(dim: usize, centers: Vec<Point>, radii: Vec<f64>) -> Self {
        let n = centers.len() * radii.len();
        Self { dim, centers, radii, values: vec![0.0; n] }
    }

    pub fn row(&self, ic: usize) -> &[f64] {
        let nr = self.radii.len();
        &self.values[ic * nr..(ic + 1) * nr]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }
}

/// Composite Gauss rule: panels no longer than `panel`, `order` nodes each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadRule {
    pub panel: f64,
    pub order: usize,
}

impl QuadRule {
    /// High order on analytic fields, low order on sampled ones (which are
    /// only piecewise smooth).
    pub fn for_field(f: &dyn Field) -> Self {
        let rho = f.support().map(|b| b.radius).unwrap_or(1.0);
        match f.resolution() {
            Some(h) => Self { panel: 0.5 * h, order: 3 },
            None => Self { panel: rho / 4.0, order: 8 },
        }
    }

    pub fn refined(self, factor: f64) -> Self {
        Self { panel: self.panel / factor, order: self.order }
    }

    pub fn panels(&self, length: f64) -> usize {
        (length / self.panel).ceil().max(1.0) as usize
    }

    /// ∫_a^b f, composite Gauss.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate_scaled(a, b, (b - a).abs(), &mut f)
    }

    /// As [`integrate`](Self::integrate) with the panel count based on a
    /// physical `length` rather than `b − a`.
    pub fn integrate_scaled(&self, a: f64, b: f64, length: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        if b == a {
            return 0.0;
        }
        let n = self.panels(length);
        let rule = gauss_legendre(self.order);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for p in 0..n {
            let lo = a + p as f64 * h;
            for (x, w) in rule.mapped(lo, lo + h) {
                acc += w * f(x);
            }
        }
        acc
    }
}

/// Normalized mean over the cap `{ω : angle(ω, axis) ≤ γ}` of the unit
/// sphere `S^{dim−1}`, of a function of the unit vector `ω`. `scale` is the
/// physical radius used to size the quadrature.
pub fn sphere_mean_of(
    dim: usize,
    axis: &Point,
    gamma: f64,
    scale: f64,
    rule: &QuadRule,
    mut f: impl FnMut(&Point) -> f64,
) -> f64 {
    let gamma = gamma.min(PI);
    if dim == 2 {
        let perp = [-axis[1], axis[0], 0.0];
        let s = rule.integrate_scaled(-gamma, gamma, 2.0 * gamma * scale, &mut |phi: f64| {
            let (sn, cs) = phi.sin_cos();
            f(&[cs * axis[0] + sn * perp[0], cs * axis[1] + sn * perp[1], 0.0])
        });
        s / (2.0 * PI)
    } else {
        let (e1, e2) = geom::complete_frame(axis);
        let s = rule.integrate_scaled(0.0, gamma, gamma * scale, &mut |beta: f64| {
            let (sb, cb) = beta.sin_cos();
            let ring = 2.0 * PI * scale * sb;
            let n = ((ring / rule.panel) * rule.order as f64).ceil().max(8.0) as usize;
            let dphi = 2.0 * PI / n as f64;
            let mut acc = 0.0;
            for j in 0..n {
                let (sp, cp) = (j as f64 * dphi).sin_cos();
                let w = [
                    cb * axis[0] + sb * (cp * e1[0] + sp * e2[0]),
                    cb * axis[1] + sb * (cp * e1[1] + sp * e2[1]),
                    cb * axis[2] + sb * (cp * e1[2] + sp * e2[2]),
                ];
                acc += f(&w);
            }
            sb * acc * dphi
        });
        s / (4.0 * PI)
    }
}

/// Mean of `field` over the sphere of radius `r` about `x`, restricted to
/// the cap that can meet the support.
pub fn mean_at(field: &dyn Field, x: &Point, r: f64, rule: &QuadRule) -> f64 {
    let Some(s) = field.support() else {
        return 0.0;
    };
    if r <= 0.0 {
        return field.value(x);
    }
    let to_c = geom::sub(&s.center, x);
    let d0 = geom::norm(&to_c);
    let Some(gamma) = intersection_half_angle(r, d0, s.radius) else {
        return 0.0;
    };
    let axis = if d0 > 0.0 {
        geom::scale(&to_c, 1.0 / d0)
    } else if field.dim() == 2 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    sphere_mean_of(field.dim(), &axis, gamma, r, rule, |w| field.value(&geom::axpy(x, r, w)))
}

/// `M[u](x, r) = (1/|S^{n−1}|) ∫_{S^{n−1}} u(x + r y) ds(y)` for every
/// center and radius.
pub fn spherical_mean(field: &dyn Field, centers: &[Point], radii: &[f64]) -> MeanData {
    let rule = QuadRule::for_field(field);
    spherical_mean_with(field, centers, radii, &rule)
}

pub fn spherical_mean_with(field: &dyn Field, centers: &[Point], radii: &[f64], rule: &QuadRule) -> MeanData {
    let nr = radii.len();
    let mut out = MeanData::zeros(field.dim(), centers.to_vec(), radii.to_vec());
    out.values
        .par_chunks_mut(nr.max(1))
        .zip(centers.par_iter())
        .for_each(|(row, x)| {
            for (ir, &r) in radii.iter().enumerate() {
                row[ir] = mean_at(field, x, r, rule);
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpSpec, BumpSum, GridSpec, ScalarField};
    use crate::geom::Ball;

    struct Constant(usize, f64);
    impl Field for Constant {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, _: &Point) -> f64 {
            self.1
        }
        fn support(&self) -> Option<Ball> {
            Some(Ball::new([0.0; 3], 100.0))
        }
    }

    #[test]
    fn constant_has_unit_mean() {
        for dim in [2, 3] {
            let c = Constant(dim, 1.0);
            let m = spherical_mean(&c, &[[0.3, 0.1, 0.0], [1.0, 0.0, 0.0]], &[0.01, 0.5, 1.7]);
            for v in &m.values {
                assert!((v - 1.0).abs() < 1e-10, "dim {dim}: {v}");
            }
        }
    }

    #[test]
    fn radial_bump_about_its_center() {
        for dim in [2, 3] {
            let mut c = vec![0.0; dim];
            c[0] = 0.2;
            let b = BumpSum::new(dim, &[BumpSpec::with_peak(c, 0.4, 1.0)]);
            let m = spherical_mean(&b, &[[0.2, 0.0, 0.0]], &[0.1, 0.2, 0.39]);
            for (r, v) in m.radii.iter().zip(&m.values) {
                let prof = std::f64::consts::E * crate::fields::bump_profile(r * r / 0.16);
                assert!((v - prof).abs() < 1e-12, "{v} vs {prof}");
            }
        }
    }

    fn riemann_circle(f: &dyn Field, x: &Point, r: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| f.value(&geom::axpy(x, r, &geom::planar_direction(2.0 * PI * (i as f64 + 0.5) / n as f64))))
            .sum::<f64>()
            / n as f64
    }

    fn riemann_sphere(f: &dyn Field, x: &Point, r: f64, n: usize) -> f64 {
        // midpoint rule in (cos β, φ), which is area preserving
        let mut acc = 0.0;
        for i in 0..n {
            let u = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - u * u).sqrt();
            for j in 0..2 * n {
                let phi = PI * (j as f64 + 0.5) / n as f64;
                acc += f.value(&geom::axpy(x, r, &[s * phi.cos(), s * phi.sin(), u]));
            }
        }
        acc / (2 * n * n) as f64
    }

    #[test]
    fn generic_bump_matches_riemann_sums() {
        let b2 = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.1, 0.3], 0.25, 1.0)]);
        let x = [1.0, 0.0, 0.0];
        for r in [0.7, 0.95, 1.2] {
            let v = mean_at(&b2, &x, r, &QuadRule::for_field(&b2));
            let o = riemann_circle(&b2, &x, r, 400_000);
            assert!((v - o).abs() < 1e-6, "2D r={r}: {v} vs {o}");
        }
        let b3 = BumpSum::new(3, &[BumpSpec::with_peak(vec![0.1, -0.2, 0.15], 0.3, 1.0)]);
        let x = [0.0, 0.0, 1.0];
        for r in [0.8, 1.0] {
            let v = mean_at(&b3, &x, r, &QuadRule::for_field(&b3));
            let o = riemann_sphere(&b3, &x, r, 3000);
            assert!((v - o).abs() < 1e-6, "3D r={r}: {v} vs {o}");
        }
    }

    #[test]
    fn sampled_field_is_close_to_analytic() {
        let b = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.0, 0.2], 0.4, 1.0)]);
        let s = ScalarField::sample(GridSpec::cube(2, 257, 1.0), &b).unwrap();
        let x = [-1.0, 0.0, 0.0];
        for r in [0.8, 1.0, 1.3] {
            let a = mean_at(&b, &x, r, &QuadRule::for_field(&b));
            let c = mean_at(&s, &x, r, &QuadRule::for_field(&s));
            assert!((a - c).abs() < 2e-4, "{a} vs {c}");
        }
    }

    #[test]
    fn missing_the_support_gives_zero() {
        let b = BumpSum::new(3, &[BumpSpec::with_peak(vec![0.0, 0.0, 0.0], 0.2, 1.0)]);
        let m = spherical_mean(&b, &[[1.0, 0.0, 0.0]], &[0.5, 1.5]);
        assert_eq!(m.values, vec![0.0, 0.0]);
    }
}
