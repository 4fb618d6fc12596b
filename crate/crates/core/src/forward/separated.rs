use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{Cell, SamplingPlan, TimeGrid};
use crate::error::{Error, Result};
use crate::fields::{DetectorSet, Field, GridSpec, Phantom};
use crate::geom::{self, Ball, Point};
use crate::meanops::{ellipsoidal_mean_with, twocenter_kernel_2d_with, QuadRule};
use crate::persist::content_hash;
use crate::specfun::ramp_plus;
use crate::xforms::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub detector: usize,
    pub z: Point,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub phantom_hash: String,
    pub grid: GridSpec,
    /// The region `Ω` carrying `q` and `f1`.
    pub omega: Ball,
    pub mollification_width: f64,
    pub ladder: Vec<f64>,
    pub skipped: Vec<SkippedCell>,
    pub source: String,
}

/// `M(x, z, t)` per cell on a shared time grid; `series` holds one row of
/// `times.n` samples per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedData {
    pub dim: usize,
    pub integration_order: u8,
    pub times: TimeGrid,
    pub detectors: DetectorSet,
    pub cells: Vec<Cell>,
    pub series: Vec<f64>,
    pub metadata: Metadata,
}

impl SeparatedData {
    pub fn row(&self, cell: usize) -> &[f64] {
        let n = self.times.n;
        &self.series[cell * n..(cell + 1) * n]
    }

    pub fn time_series(&self, cell: usize) -> TimeSeries {
        TimeSeries { t0: 0.0, dt: self.times.dt, samples: self.row(cell).to_vec() }
    }

    /// Ladder cells of one detector, ordered by step.
    pub fn ladder_cells(&self, detector: usize) -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = self
            .cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c.role {
                super::CellRole::Ladder { step, .. } if c.detector == detector => Some((step, i)),
                _ => None,
            })
            .collect();
        v.sort();
        v.into_iter().map(|(_, i)| i).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.series.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { series: self.series.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// Triple time antiderivative of `∂_t [H(t−a)/√(t²−a²)]`, i.e.
/// `t arccosh(t/a) − √(t² − a²)` for `t > a`.
pub fn free_term_2d(a: f64, t: f64) -> f64 {
    if t <= a {
        return 0.0;
    }
    t * (t / a).acosh() - ((t - a) * (t + a)).sqrt()
}

/// Triple time antiderivative of the free-space part in 3D,
/// `(t − a)⁺ / (4π a)`.
pub fn free_term_3d(a: f64, t: f64) -> f64 {
    ramp_plus(t, a) / (4.0 * PI * a)
}

/// Triple antiderivative of the separated kernel for a given contrast
/// `q` with `q(z) = qz`:
///
/// ```text
/// 3D: (qz + 1)(t − a)⁺/(4πa) + N[q](x, z, t)
/// 2D: W[q](x, z, t)/(4π²) + (qz + 1)(t arccosh(t/a) − √(t² − a²))/(2π)
/// ```
pub fn separated_kernel(q: &dyn Field, qz: f64, x: &Point, z: &Point, t: f64, rule: &QuadRule) -> f64 {
    let a = geom::dist(x, z);
    if t <= a {
        return 0.0;
    }
    if q.dim() == 3 {
        (qz + 1.0) * free_term_3d(a, t) + ellipsoidal_mean_with(q, x, z, t, rule)
    } else {
        twocenter_kernel_2d_with(q, x, z, t, rule) / (4.0 * PI * PI) + (qz + 1.0) * free_term_2d(a, t) / (2.0 * PI)
    }
}

fn simulate(phantom: &Phantom, detectors: &DetectorSet, plan: &SamplingPlan, dim: usize) -> Result<SeparatedData> {
    if phantom.dim() != dim || plan.dim != dim || detectors.dim != dim {
        return Err(Error::Validation(format!("expected a {dim}D phantom, plan and detector set")));
    }
    let f = phantom.f_exact();
    let q = &phantom.q_exact;
    let rule = QuadRule::for_field(q);
    let tol = 1e-12 * phantom.b_radius;

    let mut cells = Vec::with_capacity(plan.cells.len());
    let mut skipped = Vec::new();
    for c in &plan.cells {
        let Some(x) = detectors.points.get(c.detector) else {
            return Err(Error::Validation(format!("cell refers to missing detector {}", c.detector)));
        };
        if geom::dist(x, &c.z) <= tol {
            skipped.push(SkippedCell { detector: c.detector, z: c.z, reason: "z coincides with the detector".into() });
        } else {
            cells.push(*c);
        }
    }
    let times = plan.times;
    let rows: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|c| {
            let x = &detectors.points[c.detector];
            let fz = f.value(&c.z);
            let qz = q.value(&c.z);
            (0..times.n).map(|j| fz * separated_kernel(q, qz, x, &c.z, times.time(j), &rule)).collect()
        })
        .collect();
    let series: Vec<f64> = rows.into_iter().flatten().collect();
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("forward", "non-finite separated data"));
    }
    log::debug!("separated {dim}D data: {} cells × {} times, {} skipped", cells.len(), times.n, skipped.len());
    Ok(SeparatedData {
        dim,
        integration_order: 3,
        times,
        detectors: detectors.clone(),
        cells,
        series,
        metadata: Metadata {
            phantom_hash: content_hash(&phantom.spec),
            grid: phantom.grid.clone(),
            omega: phantom.omega,
            mollification_width: plan.mollification,
            ladder: plan.ladder.clone(),
            skipped,
            source: "separated".into(),
        },
    })
}

/// 3D separated data `M = f(z) Ψ(x, z, t)` at integration order 3.
pub fn simulate_separated_3d(phantom: &Phantom, detectors: &DetectorSet, plan: &SamplingPlan) -> Result<SeparatedData> {
    simulate(phantom, detectors, plan, 3)
}

/// 2D separated data: the triple time antiderivative of `f(z) Ľ(x, z, t)`.
pub fn simulate_separated_2d(phantom: &Phantom, detectors: &DetectorSet, plan: &SamplingPlan) -> Result<SeparatedData> {
    simulate(phantom, detectors, plan, 2)
}

/// Dispatches on the phantom dimension.
pub fn simulate_separated(phantom: &Phantom, detectors: &DetectorSet, plan: &SamplingPlan) -> Result<SeparatedData> {
    simulate(phantom, detectors, plan, phantom.dim())
}
