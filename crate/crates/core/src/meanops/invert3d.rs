use std::f64::consts::PI;

use rayon::prelude::*;

use super::invert2d::{extended_row, radial_grid};
use super::spherical::MeanData;
use crate::error::{Error, Result};
use crate::fields::{DetectorSet, GridSpec, ScalarField};
use crate::geom;

/// Two of the Finch–Patch–Rakesh inversion formulas for spherical means on a
/// sphere of radius `R`:
///
/// ```text
/// SecondDerivative: f(x) = −(1/2πR) ∫_Γ [∂_t² (t² M)](p, |x−p|) / |x−p| ds(p)
/// Nested:           f(x) = −(1/2πR) ∫_Γ [∂_t t ∂_t (t M)](p, |x−p|) / |x−p| ds(p)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FinchRakesh {
    SecondDerivative,
    Nested,
}

/// Reconstructs `f` on `target` from spherical means about the detectors.
/// Nodes outside the detector sphere are set to zero.
pub fn invert_mean_3d(data: &MeanData, gamma: &DetectorSet, target: &GridSpec, variant: FinchRakesh) -> Result<ScalarField> {
    if data.centers.len() != gamma.len() {
        return Err(Error::Grid("mean data centers do not match the detector set".into()));
    }
    let radius = gamma.radius;
    let (grid, k0) = radial_grid(data, radius)?;
    let dt = grid.dr;

    let filtered: Vec<Vec<f64>> = (0..gamma.len())
        .into_par_iter()
        .map(|ic| {
            let m = extended_row(data, ic, &grid, k0);
            let n = m.len();
            let at = |v: &[f64], k: isize| if k < 0 || k as usize >= n { 0.0 } else { v[k as usize] };
            match variant {
                FinchRakesh::SecondDerivative => {
                    let u: Vec<f64> = (0..n).map(|k| (k as f64 * dt).powi(2) * m[k]).collect();
                    (0..n as isize)
                        .map(|k| {
                            let c = -(at(&u, k + 2) + at(&u, k - 2)) + 16.0 * (at(&u, k + 1) + at(&u, k - 1))
                                - 30.0 * at(&u, k);
                            c / (12.0 * dt * dt)
                        })
                        .collect()
                }
                FinchRakesh::Nested => {
                    let u: Vec<f64> = (0..n).map(|k| k as f64 * dt * m[k]).collect();
                    (0..n as isize)
                        .map(|k| {
                            let t = k as f64 * dt;
                            let up = (t + 0.5 * dt) * (at(&u, k + 1) - at(&u, k));
                            let dn = (t - 0.5 * dt) * (at(&u, k) - at(&u, k - 1));
                            (up - dn) / (dt * dt)
                        })
                        .collect()
                }
            }
        })
        .collect();

    let scale = -1.0 / (2.0 * PI * radius);
    let values: Vec<f64> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let x = target.node(i);
            if geom::norm(&x) >= radius {
                return 0.0;
            }
            let mut acc = 0.0;
            for (ic, p) in gamma.points.iter().enumerate() {
                let t = geom::dist(&x, p);
                acc += gamma.weights[ic] * cubic(&filtered[ic], t / dt) / t;
            }
            acc * scale
        })
        .collect();
    ScalarField::new(target.clone(), values)
}

/// Four-point Lagrange interpolation of `row` at fractional index `s`,
/// zero outside the samples.
fn cubic(row: &[f64], s: f64) -> f64 {
    let n = row.len() as isize;
    let j = s.floor() as isize;
    let f = s - j as f64;
    let at = |k: isize| if k < 0 || k >= n { 0.0 } else { row[k as usize] };
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    (0..4).map(|i| w[i] * at(j - 1 + i as isize)).sum()
}
