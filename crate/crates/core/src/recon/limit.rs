use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::forward::{free_term_2d, free_term_3d, CellRole, SeparatedData};
use crate::geom;

/// Extrapolated boundary values on the data time grid, one row per detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    pub values: Vec<Vec<f64>>,
    /// Largest RMS residual of the ladder fits, relative to the largest
    /// bracket value of that fit.
    pub max_fit_residual: f64,
    /// Largest `|M/f0|` seen on the ladder.
    pub data_scale: f64,
}

/// Least-squares polynomial of degree `min(2, n − 2)` through `(h, y)`;
/// returns the value at `h = 0` and the RMS residual.
pub fn richardson(h: &[f64], y: &[f64]) -> (f64, f64) {
    let n = h.len();
    let deg = 2.min(n.saturating_sub(2)).max(1).min(n - 1);
    let m = deg + 1;
    let scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    // normal equations in the scaled variable s = h/scale
    let mut a = vec![vec![0.0; m + 1]; m];
    for (hi, yi) in h.iter().zip(y) {
        let s = hi / scale;
        let pw: Vec<f64> = (0..m).map(|k| s.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][m] += pw[r] * yi;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..m).map(|k| a[k][m] / a[k][k]).collect();
    let rss: f64 = h
        .iter()
        .zip(y)
        .map(|(hi, yi)| {
            let s = hi / scale;
            let p: f64 = coef.iter().enumerate().map(|(k, c)| c * s.powi(k as i32)).sum();
            (p - yi).powi(2)
        })
        .sum();
    (coef[0], (rss / n as f64).sqrt())
}

/// The bracket whose `z → x` limit is the boundary datum: in 3D
/// `M/f0 − (t−a)⁺/(4πa) = N[q](x, z, t)`, in 2D
/// `4π² M/f0 − 2π(t arccosh(t/a) − √(t²−a²)) = W[q](x, z, t)`.
fn bracket(dim: usize, m_over_f0: f64, a: f64, t: f64) -> f64 {
    if dim == 3 {
        m_over_f0 - free_term_3d(a, t)
    } else {
        4.0 * PI * PI * m_over_f0 - 2.0 * PI * free_term_2d(a, t)
    }
}

/// Boundary limits for every detector and time sample.
pub fn boundary_limits(data: &SeparatedData, f0: &dyn Field) -> Result<LimitTable> {
    check_order(data)?;
    let f0_max = data.metadata.grid.nodes().map(|p| f0.value(&p).abs()).fold(0.0, f64::max);
    let rows: Vec<Result<(Vec<f64>, f64, f64)>> = (0..data.detectors.len())
        .into_par_iter()
        .map(|ix| limits_for_detector(data, f0, f0_max, ix))
        .collect();
    let mut values = Vec::with_capacity(rows.len());
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for r in rows {
        let (v, res, s) = r?;
        values.push(v);
        worst = worst.max(res);
        scale = scale.max(s);
    }
    Ok(LimitTable { values, max_fit_residual: worst, data_scale: scale })
}

/// `lim_{z→x}` of the bracket at detector `detector` and time `t` (which
/// must be a sample time of `data`).
pub fn limit_to_gamma(data: &SeparatedData, f0: &dyn Field, detector: usize, t: f64) -> Result<(f64, f64)> {
    check_order(data)?;
    let j = (t / data.times.dt).round();
    if (j * data.times.dt - t).abs() > 1e-9 * data.times.dt.max(t) || j < 0.0 || j as usize >= data.times.n {
        return Err(Error::Grid(format!("t = {t} is not a sample time")));
    }
    let f0_max = data.metadata.grid.nodes().map(|p| f0.value(&p).abs()).fold(0.0, f64::max);
    let (cells, h) = ladder(data, detector)?;
    let y = brackets(data, f0, f0_max, detector, &cells, &h, j as usize)?;
    Ok(richardson(&h, &y))
}

fn check_order(data: &SeparatedData) -> Result<()> {
    if data.integration_order != 3 {
        return Err(Error::Validation("boundary limits need data at integration order 3".into()));
    }
    Ok(())
}

fn ladder(data: &SeparatedData, detector: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let cells = data.ladder_cells(detector);
    if cells.len() < 2 {
        return Err(Error::Validation(format!("detector {detector} has fewer than two ladder cells")));
    }
    let h = cells
        .iter()
        .map(|&c| match data.cells[c].role {
            CellRole::Ladder { offset, .. } => offset,
            CellRole::Interior { .. } => unreachable!(),
        })
        .collect();
    Ok((cells, h))
}

fn brackets(
    data: &SeparatedData,
    f0: &dyn Field,
    f0_max: f64,
    detector: usize,
    cells: &[usize],
    h: &[f64],
    j: usize,
) -> Result<Vec<f64>> {
    let x = &data.detectors.points[detector];
    let t = data.times.time(j);
    cells
        .iter()
        .zip(h)
        .map(|(&c, _)| {
            let z = &data.cells[c].z;
            let f0z = f0.value(z);
            if f0z.abs() < 1e-6 * f0_max {
                return Err(Error::numerical("limit", "f0 vanishes near boundary"));
            }
            Ok(bracket(data.dim, data.row(c)[j] / f0z, geom::dist(x, z), t))
        })
        .collect()
}

fn limits_for_detector(data: &SeparatedData, f0: &dyn Field, f0_max: f64, ix: usize) -> Result<(Vec<f64>, f64, f64)> {
    let (cells, h) = ladder(data, ix)?;
    let mut out = Vec::with_capacity(data.times.n);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for j in 0..data.times.n {
        let y = brackets(data, f0, f0_max, ix, &cells, &h, j)?;
        for &c in &cells {
            let f0z = f0.value(&data.cells[c].z);
            scale = scale.max((data.row(c)[j] / f0z).abs());
        }
        let (v, res) = richardson(&h, &y);
        let ymax = y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if ymax > 0.0 {
            worst = worst.max(res / ymax);
        }
        out.push(v);
    }
    Ok((out, worst, scale))
}
