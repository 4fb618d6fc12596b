use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DetectorSet, Phantom};
use crate::geom::{self, Point};

/// Uniform time grid `t_j = j dt`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > dt) {
            return Err(Error::Grid(format!("invalid time grid dt={dt}, T={t_end}")));
        }
        Ok(Self { dt, n: (t_end / dt).floor() as usize + 1 })
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n - 1)
    }
}

/// What a data cell is used for downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellRole {
    /// `z = x + offset·n(x)` on the boundary-limit ladder.
    Ladder { step: usize, offset: f64 },
    /// Grid node inside `Ω`.
    Interior { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub detector: usize,
    pub z: Point,
    pub role: CellRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanOptions {
    /// Time step; defaults to the grid spacing.
    pub dt: Option<f64>,
    /// Final time; defaults to covering every ellipse that reaches `Ω`.
    pub t_end: Option<f64>,
    pub ladder_points: usize,
    pub ladder_ratio: f64,
    /// Largest ladder offset as a fraction of `dist(Γ, Ω)`.
    pub ladder_reach: f64,
    /// Detectors paired with every interior node.
    pub interior_detectors: usize,
    pub mollification: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: None,
            ladder_points: 4,
            ladder_ratio: 2.0,
            ladder_reach: 0.25,
            interior_detectors: 8,
            mollification: 0.0,
        }
    }
}

/// The `(x, z, t)` samples a forward run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub dim: usize,
    pub times: TimeGrid,
    pub ladder: Vec<f64>,
    pub cells: Vec<Cell>,
    pub mollification: f64,
}

impl SamplingPlan {
    /// A ladder of offsets along the inward normal at every detector, and
    /// every grid node of `Ω` paired with an evenly spread subset of the
    /// detectors.
    pub fn standard(phantom: &Phantom, detectors: &DetectorSet, opts: &PlanOptions) -> Result<Self> {
        if detectors.dim != phantom.dim() {
            return Err(Error::Validation("detector and phantom dimensions differ".into()));
        }
        if opts.ladder_points < 2 || !(opts.ladder_ratio > 1.0) || !(opts.ladder_reach > 0.0 && opts.ladder_reach < 1.0) {
            return Err(Error::Validation("ladder needs ≥ 2 points, ratio > 1 and reach in (0, 1)".into()));
        }
        if !(opts.mollification >= 0.0) {
            return Err(Error::Validation("mollification width must be nonnegative".into()));
        }
        let dt = opts.dt.unwrap_or(phantom.grid.min_spacing());
        let omega = phantom.omega;
        let t_end = opts.t_end.unwrap_or(
            2.0 * (phantom.b_radius + geom::norm(&omega.center) + omega.radius) + 5.0 * opts.mollification + 2.0 * dt,
        );
        let times = TimeGrid::new(dt, t_end)?;

        let h_max = opts.ladder_reach * phantom.margin();
        let ladder: Vec<f64> = (0..opts.ladder_points)
            .map(|k| h_max / opts.ladder_ratio.powi((opts.ladder_points - 1 - k) as i32))
            .collect();

        let mut cells = Vec::new();
        for (ix, (x, n)) in detectors.points.iter().zip(&detectors.inward_normals).enumerate() {
            for (step, &h) in ladder.iter().enumerate() {
                cells.push(Cell { detector: ix, z: geom::axpy(x, h, n), role: CellRole::Ladder { step, offset: h } });
            }
        }
        let m = opts.interior_detectors.min(detectors.len());
        let chosen: Vec<usize> = (0..m).map(|i| i * detectors.len() / m.max(1)).collect();
        for node in 0..phantom.grid.len() {
            let z = phantom.grid.node(node);
            if geom::dist(&z, &omega.center) > omega.radius {
                continue;
            }
            for &ix in &chosen {
                cells.push(Cell { detector: ix, z, role: CellRole::Interior { node } });
            }
        }
        Ok(Self { dim: phantom.dim(), times, ladder, cells, mollification: opts.mollification })
    }
}
