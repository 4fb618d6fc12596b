use std::f64::consts::PI;

use rayon::prelude::*;

use super::spherical::MeanData;
use crate::error::{Error, Result};
use crate::fields::{DetectorSet, GridSpec, ScalarField};
use crate::geom;

/// The two Finch–Haltmeier–Rakesh inversion formulas for circular means on
/// a circle of radius `R`:
///
/// ```text
/// Laplacian: f(ξ) = (1/2πR) Δ_ξ ∫_Γ ∫_0^{2R} r M(p,r) log|r² − |ξ−p|²| dr ds(p)
/// Radial:    f(ξ) = (1/2πR)     ∫_Γ ∫_0^{2R} (∂_r r ∂_r M)(p,r) log|r² − |ξ−p|²| dr ds(p)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Fhr {
    Laplacian,
    Radial,
}

/// Samples on the extended grid `r_k = k dr`, `k = 0..=K`, with `K dr ≥ 2R`.
pub(crate) struct RadialGrid {
    pub dr: f64,
    pub k_end: usize,
}

/// Checks the radius grid and returns its spacing and extent.
pub(crate) fn radial_grid(data: &MeanData, radius: f64) -> Result<(RadialGrid, usize)> {
    let r = &data.radii;
    if r.len() < 3 {
        return Err(Error::Grid("need at least three radii".into()));
    }
    let dr = r[1] - r[0];
    if !(dr > 0.0) || r.windows(2).any(|w| ((w[1] - w[0]) - dr).abs() > 1e-9 * dr.max(1.0)) {
        return Err(Error::Grid("radii must be uniform and increasing".into()));
    }
    let k0f = r[0] / dr;
    let k0 = k0f.round();
    if r[0] < 0.0 || (k0f - k0).abs() > 1e-6 {
        return Err(Error::Grid("radii must lie on a grid k·dr".into()));
    }
    let r_max = r[r.len() - 1];
    if r_max < 2.0 * radius - 0.5 * dr {
        return Err(Error::Grid(format!(
            "radius grid ends at {r_max}, the inversion integrates up to 2R = {}",
            2.0 * radius
        )));
    }
    let k_end = ((2.0 * radius) / dr).ceil() as usize;
    Ok((RadialGrid { dr, k_end }, k0 as usize))
}

/// Row of `data` on the extended grid, zero below the first radius.
pub(crate) fn extended_row(data: &MeanData, ic: usize, grid: &RadialGrid, k0: usize) -> Vec<f64> {
    let row = data.row(ic);
    (0..=grid.k_end)
        .map(|k| {
            if k < k0 {
                0.0
            } else {
                row.get(k - k0).copied().unwrap_or(0.0)
            }
        })
        .collect()
}

/// `∫_0^{r_K} g(r) (log|r − d| + log(r + d)) dr` for `g` piecewise linear on
/// the nodes `k dr`, integrated exactly.
fn log_moment(g: &[f64], dr: f64, d: f64) -> f64 {
    // ∫ (α + βs) log|s| ds = α A(s) + β B(s)
    let a_fn = |s: f64| if s == 0.0 { 0.0 } else { s * s.abs().ln() - s };
    let b_fn = |s: f64| if s == 0.0 { 0.0 } else { 0.5 * s * s * s.abs().ln() - 0.25 * s * s };
    let mut total = 0.0;
    for shift in [d, -d] {
        let mut prev_a = a_fn(-shift);
        let mut prev_b = b_fn(-shift);
        for k in 0..g.len() - 1 {
            let r0 = k as f64 * dr;
            let s1 = r0 + dr - shift;
            let (a1, b1) = (a_fn(s1), b_fn(s1));
            let beta = (g[k + 1] - g[k]) / dr;
            let alpha = g[k] + beta * (shift - r0);
            total += alpha * (a1 - prev_a) + beta * (b1 - prev_b);
            prev_a = a1;
            prev_b = b1;
        }
    }
    total
}

/// Reconstructs `f` on `target` from circular means about the detectors.
/// Nodes outside the detector circle are set to zero.
pub fn invert_mean_2d(data: &MeanData, gamma: &DetectorSet, target: &GridSpec, variant: Fhr) -> Result<ScalarField> {
    if data.centers.len() != gamma.len() {
        return Err(Error::Grid("mean data centers do not match the detector set".into()));
    }
    let radius = gamma.radius;
    let (grid, k0) = radial_grid(data, radius)?;
    let dr = grid.dr;
    let nd = 4 * grid.k_end + 1;
    let dd = 2.0 * radius / (nd - 1) as f64;

    // per detector, the kernel integral as a function of d = |ξ − p|
    let profiles: Vec<Vec<f64>> = (0..gamma.len())
        .into_par_iter()
        .map(|ic| {
            let m = extended_row(data, ic, &grid, k0);
            let n = m.len();
            let g: Vec<f64> = match variant {
                Fhr::Laplacian => (0..n).map(|k| k as f64 * dr * m[k]).collect(),
                Fhr::Radial => (0..n)
                    .map(|k| {
                        if k == 0 {
                            return 0.0;
                        }
                        let mp = if k + 1 < n { m[k + 1] } else { 0.0 };
                        let rk = k as f64 * dr;
                        ((rk + 0.5 * dr) * (mp - m[k]) - (rk - 0.5 * dr) * (m[k] - m[k - 1])) / (dr * dr)
                    })
                    .collect(),
            };
            let h: Vec<f64> = (0..nd).map(|j| log_moment(&g, dr, j as f64 * dd)).collect();
            match variant {
                Fhr::Radial => h,
                Fhr::Laplacian => (0..nd)
                    .map(|j| {
                        // radial Laplacian h'' + h'/d, one-sided at the ends
                        let jj = j.clamp(1, nd - 2);
                        let d2 = (h[jj + 1] - 2.0 * h[jj] + h[jj - 1]) / (dd * dd);
                        let d1 = if j == 0 {
                            0.0
                        } else if j == nd - 1 {
                            (h[j] - h[j - 1]) / dd
                        } else {
                            (h[j + 1] - h[j - 1]) / (2.0 * dd)
                        };
                        let dv = j as f64 * dd;
                        if j == 0 {
                            2.0 * d2
                        } else {
                            d2 + d1 / dv
                        }
                    })
                    .collect(),
            }
        })
        .collect();

    let scale = 1.0 / (2.0 * PI * radius);
    let values: Vec<f64> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let xi = target.node(i);
            if geom::norm(&xi) >= radius {
                return 0.0;
            }
            let mut acc = 0.0;
            for (ic, p) in gamma.points.iter().enumerate() {
                let s = geom::dist(&xi, p) / dd;
                let j = (s.floor() as usize).min(nd - 2);
                let f = s - j as f64;
                let prof = &profiles[ic];
                acc += gamma.weights[ic] * (prof[j] * (1.0 - f) + prof[j + 1] * f);
            }
            acc * scale
        })
        .collect();
    ScalarField::new(target.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BumpSpec, BumpSum};
    use crate::meanops::spherical_mean;
    use crate::recon::metrics;

    fn setup(n_grid: usize, n_det: usize, center: Vec<f64>, radius: f64) -> (MeanData, DetectorSet, GridSpec, ScalarField) {
        let f = BumpSum::new(2, &[BumpSpec::with_peak(center, radius, 1.0)]);
        let gamma = DetectorSet::circle(n_det, 1.0);
        let grid = GridSpec::cube(2, n_grid, 1.0);
        let dr = grid.spacing[0];
        let radii: Vec<f64> = (1..=((2.0 / dr).ceil() as usize)).map(|k| k as f64 * dr).collect();
        let m = spherical_mean(&f, &gamma.points, &radii);
        let truth = ScalarField::sample(grid.clone(), &f).unwrap();
        (m, gamma, grid, truth)
    }

    #[test]
    fn centered_bump_round_trip() {
        let (m, gamma, grid, truth) = setup(64, 96, vec![0.0, 0.0], 0.5);
        for v in [Fhr::Radial, Fhr::Laplacian] {
            let r = invert_mean_2d(&m, &gamma, &grid, v).unwrap();
            let e = metrics(&r, &truth).unwrap().rel_l2;
            assert!(e < 5e-2, "{v:?}: {e}");
        }
    }

    #[test]
    fn zero_data() {
        let (m, gamma, grid, _) = setup(16, 16, vec![0.0, 0.0], 0.5);
        let r = invert_mean_2d(&m.scaled(0.0), &gamma, &grid, Fhr::Radial).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_data() {
        let (m, gamma, grid, _) = setup(24, 24, vec![0.1, 0.2], 0.4);
        let a = invert_mean_2d(&m, &gamma, &grid, Fhr::Radial).unwrap();
        let b = invert_mean_2d(&m.scaled(2.0), &gamma, &grid, Fhr::Radial).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn short_radius_grid_rejected() {
        let (mut m, gamma, grid, _) = setup(16, 16, vec![0.0, 0.0], 0.5);
        let keep = m.radii.len() / 2;
        m.radii.truncate(keep);
        m.values = (0..gamma.len()).flat_map(|_| vec![0.0; keep]).collect();
        assert!(matches!(invert_mean_2d(&m, &gamma, &grid, Fhr::Radial), Err(Error::Grid(_))));
    }

    #[test]
    fn exact_log_moment() {
        // g ≡ 1 on [0, 1]: ∫ log|r−d| + log(r+d) dr for d = 0.3
        let g = vec![1.0; 11];
        let d: f64 = 0.3;
        let prim = |s: f64| s * s.abs().ln() - s;
        let exact = prim(1.0 - d) - prim(-d) + prim(1.0 + d) - prim(d);
        assert!((log_moment(&g, 0.1, d) - exact).abs() < 1e-14);
    }
}
