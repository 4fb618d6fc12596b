use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, GridSpec, ScalarField};
use crate::forward::{free_term_3d, CellRole, SeparatedData};
use crate::geom::{self, Point};
use crate::meanops::{ellipsoidal_mean_with, QuadRule};

/// `Ψ = M/f` samples at one grid node for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCell {
    pub node: usize,
    pub x: Point,
    pub z: Point,
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSamples {
    pub grid: GridSpec,
    pub cells: Vec<PsiCell>,
}

impl PsiSamples {
    /// Divides the interior cells of `data` by `f(z)`, keeping every
    /// `stride`-th sample with `t − |x−z| ≥ margin_steps · dt`.
    pub fn from_separated(data: &SeparatedData, f: &dyn Field, margin_steps: f64, stride: usize) -> Result<Self> {
        if data.dim != 3 {
            return Err(Error::Validation("the fixed-point iteration is three-dimensional".into()));
        }
        let dt = data.times.dt;
        let mut cells = Vec::new();
        for (ic, c) in data.cells.iter().enumerate() {
            let CellRole::Interior { node } = c.role else { continue };
            let x = data.detectors.points[c.detector];
            let a = geom::dist(&x, &c.z);
            let fz = f.value(&c.z);
            if fz == 0.0 {
                return Err(Error::numerical("fixed point", "f vanishes at an interior node"));
            }
            let row = data.row(ic);
            let (mut times, mut psi) = (Vec::new(), Vec::new());
            for j in (0..data.times.n).step_by(stride.max(1)) {
                let t = data.times.time(j);
                if t - a >= margin_steps * dt {
                    times.push(t);
                    psi.push(row[j] / fz);
                }
            }
            cells.push(PsiCell { node, x, z: c.z, times, psi });
        }
        Ok(Self { grid: data.metadata.grid.clone(), cells })
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub q_hat: ScalarField,
    /// `‖q_n − q_{n−1}‖∞` per iteration.
    pub history: Vec<f64>,
    pub converged: bool,
    pub warning: Option<String>,
}

/// One update: the least-squares `q_n(z)` for the affine free term after
/// removing `N[q_prev]`.
fn update(samples: &PsiSamples, q_prev: &ScalarField) -> Result<ScalarField> {
    let rule = QuadRule { panel: 2.0 * q_prev.grid.min_spacing(), order: 3 };
    let zero = q_prev.max_abs() == 0.0;
    let sums: Vec<(usize, f64, f64)> = samples
        .cells
        .par_iter()
        .map(|c| {
            let a = geom::dist(&c.x, &c.z);
            let (mut num, mut den) = (0.0, 0.0);
            for (&t, &psi) in c.times.iter().zip(&c.psi) {
                let g = free_term_3d(a, t);
                let n = if zero { 0.0 } else { ellipsoidal_mean_with(q_prev, &c.x, &c.z, t, &rule) };
                num += g * (psi - n);
                den += g * g;
            }
            (c.node, num, den)
        })
        .collect();
    let mut num = vec![0.0; samples.grid.len()];
    let mut den = vec![0.0; samples.grid.len()];
    for (node, n, d) in sums {
        num[node] += n;
        den[node] += d;
    }
    let values = num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d - 1.0 } else { 0.0 }).collect();
    ScalarField::new(samples.grid.clone(), values)
}

/// Fixed-point iteration `Ψ = (q_n + 1)(t−a)⁺/(4πa) + N[q_{n−1}]`, `q_0 = 0`.
pub fn fixed_point_q3d(samples: &PsiSamples, max_iters: usize, tol: f64) -> Result<FixedPointResult> {
    if samples.grid.dim != 3 {
        return Err(Error::Validation("the fixed-point iteration is three-dimensional".into()));
    }
    let mut q = ScalarField::zeros(samples.grid.clone());
    let mut history: Vec<f64> = Vec::new();
    let mut best = (f64::INFINITY, q.clone());
    let mut rising = 0;
    for _ in 0..max_iters {
        let next = update(samples, &q)?;
        let diff = next.values.iter().zip(&q.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !diff.is_finite() {
            return Err(Error::numerical("fixed point", "iterate is not finite"));
        }
        rising = if history.last().is_some_and(|&p| diff > p) { rising + 1 } else { 0 };
        history.push(diff);
        q = next;
        if diff < best.0 {
            best = (diff, q.clone());
        }
        if diff <= tol {
            return Ok(FixedPointResult { q_hat: q, history, converged: true, warning: None });
        }
        if rising >= 3 {
            let warning = Some(format!("no contraction: successive differences grew {rising} times in a row"));
            return Ok(FixedPointResult { q_hat: best.1, history, converged: false, warning });
        }
    }
    let warning = Some(format!("stopped after {max_iters} iterations without reaching tol {tol:e}"));
    Ok(FixedPointResult { q_hat: q, history, converged: false, warning })
}
