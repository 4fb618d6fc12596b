use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, GridSpec, IlluminationSet, ScalarField};
use crate::geom::{self, Point};

/// Plane integrals over `(r, θ)`; `values[iθ * nr + ir]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub dim: usize,
    pub r: Vec<f64>,
    pub theta: Vec<Point>,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(illum: &IlluminationSet) -> Self {
        Self {
            dim: illum.dim,
            r: illum.r_samples.clone(),
            theta: illum.theta_samples.clone(),
            values: vec![0.0; illum.r_samples.len() * illum.theta_samples.len()],
        }
    }

    #[inline]
    pub fn at(&self, itheta: usize, ir: usize) -> f64 {
        self.values[itheta * self.r.len() + ir]
    }
}

/// `R[f](r, θ) = ∫_{x·θ = r} f ds` by the trapezoid rule with node spacing
/// `step`, restricted to the support ball of `f`.
pub fn radon_forward(field: &dyn Field, illum: &IlluminationSet, step: f64) -> Sinogram {
    let mut sino = Sinogram::zeros(illum);
    let Some(support) = field.support() else {
        return sino;
    };
    let nr = illum.r_samples.len();
    sino.values
        .par_chunks_mut(nr)
        .zip(illum.theta_samples.par_iter())
        .for_each(|(row, theta)| {
            for (ir, &r) in illum.r_samples.iter().enumerate() {
                row[ir] = plane_integral(field, illum.dim, &support.center, support.radius, theta, r, step);
            }
        });
    sino
}

fn plane_integral(field: &dyn Field, dim: usize, c: &Point, rho: f64, theta: &Point, r: f64, step: f64) -> f64 {
    let d = r - geom::dot(theta, c);
    if d.abs() >= rho {
        return 0.0;
    }
    let w = (rho * rho - d * d).sqrt();
    let foot = geom::axpy(c, d, theta);
    let n = (2.0 * w / step).ceil().max(2.0) as usize;
    let h = 2.0 * w / n as f64;
    if dim == 2 {
        let perp = [-theta[1], theta[0], 0.0];
        let mut acc = 0.0;
        for i in 1..n {
            let s = -w + i as f64 * h;
            acc += field.value(&geom::axpy(&foot, s, &perp));
        }
        acc * h
    } else {
        let (u, v) = geom::complete_frame(theta);
        let mut acc = 0.0;
        for i in 1..n {
            let a = -w + i as f64 * h;
            let p = geom::axpy(&foot, a, &u);
            let b_max = (w * w - a * a).max(0.0).sqrt();
            for j in 1..n {
                let b = -w + j as f64 * h;
                if b.abs() < b_max {
                    acc += field.value(&geom::axpy(&p, b, &v));
                }
            }
        }
        acc * h * h
    }
}

/// A reconstruction together with the sampling warnings that were raised.
#[derive(Debug, Clone)]
pub struct RadonInversion {
    pub field: ScalarField,
    pub warnings: Vec<String>,
}

/// Precomputed backprojection geometry for a fixed sinogram layout and
/// output grid, reusable for many sinograms.
pub struct RadonInverter {
    dim: usize,
    nr: usize,
    dr: f64,
    r0: f64,
    theta: Vec<Point>,
    points: Vec<Point>,
    /// Ram-Lak taps `h[|n|]` (2D only).
    taps: Vec<f64>,
}

impl RadonInverter {
    pub fn new(dim: usize, r: &[f64], theta: &[Point], grid: &GridSpec) -> Result<Self> {
        Self::at_points(dim, r, theta, grid.nodes().collect())
    }

    /// As [`new`](Self::new), reconstructing at arbitrary points.
    pub fn at_points(dim: usize, r: &[f64], theta: &[Point], points: Vec<Point>) -> Result<Self> {
        if r.len() < 3 || theta.is_empty() {
            return Err(Error::Grid("sinogram needs at least 3 offsets and one direction".into()));
        }
        let dr = r[1] - r[0];
        if !(dr > 0.0) || r.windows(2).any(|w| ((w[1] - w[0]) - dr).abs() > 1e-9 * dr) {
            return Err(Error::Grid("offsets must be uniform and increasing".into()));
        }
        let nr = r.len();
        let taps = (0..nr)
            .map(|n| {
                if n == 0 {
                    0.25 / (dr * dr)
                } else if n % 2 == 1 {
                    -1.0 / ((n * n) as f64 * PI * PI * dr * dr)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { dim, nr, dr, r0: r[0], theta: theta.to_vec(), points, taps })
    }

    /// Filtered (2D) or twice differentiated (3D) projections, one row per θ.
    fn filter(&self, values: &[f64]) -> Vec<f64> {
        let nr = self.nr;
        let mut out = vec![0.0; values.len()];
        out.par_chunks_mut(nr).zip(values.par_chunks(nr)).for_each(|(q, p)| {
            if self.dim == 2 {
                for i in 0..nr {
                    let mut acc = 0.0;
                    for (m, pm) in p.iter().enumerate() {
                        if *pm != 0.0 {
                            acc += pm * self.taps[i.abs_diff(m)];
                        }
                    }
                    q[i] = acc * self.dr;
                }
            } else {
                let h2 = self.dr * self.dr;
                for i in 0..nr {
                    let left = if i > 0 { p[i - 1] } else { 0.0 };
                    let right = if i + 1 < nr { p[i + 1] } else { 0.0 };
                    q[i] = (left - 2.0 * p[i] + right) / h2;
                }
            }
        });
        out
    }

    /// Applies the inverse to one real sinogram laid out as in [`Sinogram`].
    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        let filtered = self.filter(values);
        let nth = self.theta.len();
        let scale = if self.dim == 2 {
            PI / nth as f64
        } else {
            -(2.0 * PI / nth as f64) / (4.0 * PI * PI)
        };
        self.points
            .par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for (it, th) in self.theta.iter().enumerate() {
                    let s = (geom::dot(x, th) - self.r0) / self.dr;
                    if s < 0.0 || s > (self.nr - 1) as f64 {
                        continue;
                    }
                    let j = (s.floor() as usize).min(self.nr - 2);
                    let f = s - j as f64;
                    let row = &filtered[it * self.nr..(it + 1) * self.nr];
                    acc += row[j] * (1.0 - f) + row[j + 1] * f;
                }
                acc * scale
            })
            .collect()
    }
}

/// Reconstructs a field from plane integrals by filtered backprojection
/// (2D, Ram-Lak filter) or the second-derivative backprojection (3D).
pub fn radon_invert(sino: &Sinogram, target: &GridSpec) -> Result<RadonInversion> {
    if sino.values.len() != sino.r.len() * sino.theta.len() {
        return Err(Error::Grid("sinogram size does not match its axes".into()));
    }
    let inv = RadonInverter::new(sino.dim, &sino.r, &sino.theta, target)?;
    let values = inv.invert(&sino.values);
    let mut warnings = Vec::new();
    if let Some(w) = undersampling_warning(sino) {
        warnings.push(w);
    }
    Ok(RadonInversion { field: ScalarField::new(target.clone(), values)?, warnings })
}

/// Backprojects a complex sinogram given as separate real and imaginary
/// parts.
pub fn radon_backproject_complex(inv: &RadonInverter, re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (inv.invert(re), inv.invert(im))
}

/// Angular Nyquist heuristic: directions should be spaced no wider than
/// `dr / ρ`, with `ρ` the largest offset carrying data.
fn undersampling_warning(sino: &Sinogram) -> Option<String> {
    let peak = sino.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return None;
    }
    let nr = sino.r.len();
    let mut rho: f64 = 0.0;
    for (i, v) in sino.values.iter().enumerate() {
        if v.abs() > 1e-6 * peak {
            rho = rho.max(sino.r[i % nr].abs());
        }
    }
    let dr = sino.r[1] - sino.r[0];
    let needed = if sino.dim == 2 {
        PI * rho / dr
    } else {
        2.0 * PI * (rho / dr).powi(2)
    };
    if (sino.theta.len() as f64) < needed {
        Some(format!(
            "angular sampling below the Nyquist heuristic: {} directions, about {} needed",
            sino.theta.len(),
            needed.ceil()
        ))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpSpec, BumpSum};

    fn bump(dim: usize, center: Vec<f64>, radius: f64) -> BumpSum {
        BumpSum::new(dim, &[BumpSpec::with_peak(center, radius, 1.0)])
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let n: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let d: f64 = b.iter().map(|y| y * y).sum();
        (n / d).sqrt()
    }

    #[test]
    fn plane_missing_support_is_zero() {
        let f = bump(2, vec![0.2, 0.0], 0.3);
        let illum = IlluminationSet { dim: 2, r_samples: vec![0.8], theta_samples: vec![[1.0, 0.0, 0.0]], slab_width: 0.01 };
        assert_eq!(radon_forward(&f, &illum, 0.01).values[0], 0.0);
    }

    #[test]
    fn radial_field_is_angle_independent() {
        let f = bump(2, vec![0.0, 0.0], 0.5);
        let illum = IlluminationSet::uniform(2, 21, 7, 0.6, 0.01).unwrap();
        let s = radon_forward(&f, &illum, 0.002);
        for it in 1..7 {
            for ir in 0..21 {
                assert!((s.at(it, ir) - s.at(0, ir)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn central_line_matches_riemann_sum() {
        let f = bump(2, vec![0.05, -0.1], 0.2);
        let th = geom::planar_direction(0.3);
        let illum = IlluminationSet { dim: 2, r_samples: vec![0.0], theta_samples: vec![th], slab_width: 0.01 };
        let v = radon_forward(&f, &illum, 1e-3).values[0];
        let perp = [-th[1], th[0], 0.0];
        let n = 200_000;
        let h = 2.0 / n as f64;
        let oracle: f64 = (0..n).map(|i| f.value(&geom::scale(&perp, -1.0 + (i as f64 + 0.5) * h))).sum::<f64>() * h;
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn three_d_plane_matches_riemann_sum() {
        let f = bump(3, vec![0.1, 0.0, 0.05], 0.3);
        let th = geom::normalize(&[0.3, -0.2, 0.9]);
        let illum = IlluminationSet { dim: 3, r_samples: vec![0.1], theta_samples: vec![th], slab_width: 0.01 };
        let v = radon_forward(&f, &illum, 2e-3).values[0];
        let (u, w) = geom::complete_frame(&th);
        let foot = geom::scale(&th, 0.1);
        let n = 1500;
        let h = 1.0 / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = geom::axpy(&geom::axpy(&foot, -0.5 + (i as f64 + 0.5) * h, &u), -0.5 + (j as f64 + 0.5) * h, &w);
                oracle += f.value(&p);
            }
        }
        oracle *= h * h;
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn linearity() {
        let f = bump(2, vec![0.1, 0.1], 0.3);
        let g = bump(2, vec![-0.2, 0.0], 0.25);
        let illum = IlluminationSet::uniform(2, 15, 6, 0.9, 0.01).unwrap();
        let s = crate::fields::Sum(&f, &g);
        let a = radon_forward(&f, &illum, 0.005);
        let b = radon_forward(&g, &illum, 0.005);
        let c = radon_forward(&s, &illum, 0.005);
        // the support ball of the sum differs, so agreement is at quadrature level
        for i in 0..c.values.len() {
            assert!((a.values[i] + b.values[i] - c.values[i]).abs() < 1e-8);
        }
        let f3 = f.scaled(2.5);
        let d = radon_forward(&f3, &illum, 0.005);
        for i in 0..d.values.len() {
            assert!((d.values[i] - 2.5 * a.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sinogram_inverts_to_zero() {
        let illum = IlluminationSet::uniform(2, 33, 16, 1.0, 0.01).unwrap();
        let s = Sinogram::zeros(&illum);
        let r = radon_invert(&s, &GridSpec::cube(2, 16, 1.0)).unwrap();
        assert!(r.field.values.iter().all(|v| *v == 0.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn round_trip_2d() {
        let f = bump(2, vec![0.0, 0.0], 0.5);
        let grid = GridSpec::cube(2, 64, 1.0);
        let illum = IlluminationSet::uniform(2, 129, 128, 1.0, 0.01).unwrap();
        let s = radon_forward(&f, &illum, 0.005);
        let r = radon_invert(&s, &grid).unwrap();
        let truth = ScalarField::sample(grid, &f).unwrap();
        let e = rel_l2(&r.field.values, &truth.values);
        assert!(e < 5e-2, "rel L2 {e}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn shifted_bump_keeps_centroid() {
        let f = bump(2, vec![0.3, -0.2], 0.35);
        let grid = GridSpec::cube(2, 64, 1.0);
        let illum = IlluminationSet::uniform(2, 129, 128, 1.0, 0.01).unwrap();
        let r = radon_invert(&radon_forward(&f, &illum, 0.005), &grid).unwrap();
        let truth = ScalarField::sample(grid.clone(), &f).unwrap();
        let centroid = |v: &[f64]| {
            let mut c = [0.0; 2];
            let mut m = 0.0;
            for (i, w) in v.iter().enumerate() {
                let p = grid.node(i);
                c[0] += w * p[0];
                c[1] += w * p[1];
                m += w;
            }
            [c[0] / m, c[1] / m]
        };
        let a = centroid(&r.field.values);
        let b = centroid(&truth.values);
        let h = grid.spacing[0];
        assert!((a[0] - b[0]).abs() < h && (a[1] - b[1]).abs() < h, "{a:?} vs {b:?}");
    }

    #[test]
    fn round_trip_3d() {
        let f = bump(3, vec![0.0, 0.0, 0.0], 0.6);
        let grid = GridSpec::cube(3, 24, 1.0);
        let illum = IlluminationSet::uniform(3, 61, 600, 0.8, 0.01).unwrap();
        let s = radon_forward(&f, &illum, 0.02);
        let r = radon_invert(&s, &grid).unwrap();
        let truth = ScalarField::sample(grid, &f).unwrap();
        let e = rel_l2(&r.field.values, &truth.values);
        assert!(e < 5e-2, "rel L2 {e}");
    }

    #[test]
    fn undersampling_is_reported() {
        let f = bump(2, vec![0.0, 0.0], 0.8);
        let illum = IlluminationSet::uniform(2, 129, 8, 1.0, 0.01).unwrap();
        let r = radon_invert(&radon_forward(&f, &illum, 0.01), &GridSpec::cube(2, 16, 1.0)).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
