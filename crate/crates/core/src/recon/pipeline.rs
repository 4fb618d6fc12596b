use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::limit::{boundary_limits, LimitTable};
use crate::error::{Error, Result};
use crate::fields::{Field, GridSpec, ScalarField};
use crate::forward::{separated_kernel, CellRole, SeparatedData};
use crate::geom::{self, Ball};
use crate::meanops::{invert_mean_2d, invert_mean_3d, Fhr, FinchRakesh, MeanData, QuadRule};
use crate::volterra::{differentiate_rhs, Kind, SecondKindSolver, VolterraProblem};
use crate::xforms::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconOptions {
    pub fhr: Fhr,
    pub finch_rakesh: FinchRakesh,
    /// Admissible samples satisfy `t − |x−z| ≥ t_margin_steps · dt`.
    pub t_margin_steps: f64,
    /// Admissible samples satisfy `|Ψ̂| ≥ psi_floor · max|Ψ̂|`.
    pub psi_floor: f64,
    /// Every `time_stride`-th sample enters the `f` estimate.
    pub time_stride: usize,
    /// `δ` as a fraction of `dist(Γ, Ω)`.
    pub delta_fraction: f64,
    /// Quadrature panel, in grid spacings, when reassembling `Ψ̂` from `q̂`.
    pub reassembly_panel: f64,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            fhr: Fhr::Radial,
            finch_rakesh: FinchRakesh::SecondDerivative,
            t_margin_steps: 5.0,
            psi_floor: 1e-8,
            time_stride: 4,
            delta_fraction: 0.5,
            reassembly_panel: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub limit_fit_residual: f64,
    pub limit_data_scale: f64,
    /// Largest `|·|` of the boundary datum handed to the mean inversion.
    pub limit_max: f64,
    pub volterra_residual: f64,
    pub f_samples_min: usize,
    pub f_samples_median: usize,
    pub unrecovered: Vec<usize>,
    pub skipped_cells: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub q_hat: ScalarField,
    pub f1_hat: ScalarField,
    pub diagnostics: Diagnostics,
}

/// Mean data on radii `k·dr`, `k = 1..=K` with `K·dr ≥ 2R`, taking
/// `rows[ix][k]` where available and zero beyond (the means vanish there
/// because `q` is supported in `Ω`).
fn mean_data(data: &SeparatedData, dr: f64, rows: &[Vec<f64>]) -> MeanData {
    let k_end = (2.0 * data.detectors.radius / dr).ceil() as usize + 1;
    let radii: Vec<f64> = (1..=k_end).map(|k| k as f64 * dr).collect();
    let mut m = MeanData::zeros(data.dim, data.detectors.points.clone(), radii);
    for (ix, row) in rows.iter().enumerate() {
        for k in 1..=k_end {
            if let Some(v) = row.get(k) {
                m.values[ix * k_end + (k - 1)] = *v;
            }
        }
    }
    m
}

fn restrict(field: &ScalarField, omega: &Ball) -> ScalarField {
    field.map(|p, v| if geom::dist(p, &omega.center) <= omega.radius { v } else { 0.0 })
}

/// Step (iv)/(v): `f̂(z)` as the median of `M/Ψ̂` over admissible `(x, t)`.
fn recover_f(
    data: &SeparatedData,
    q_hat: &ScalarField,
    f0: &dyn Field,
    opts: &ReconOptions,
    diag: &mut Diagnostics,
) -> Result<ScalarField> {
    let grid: &GridSpec = &data.metadata.grid;
    let omega = data.metadata.omega;
    let q_omega = restrict(q_hat, &omega);
    let rule = QuadRule { panel: opts.reassembly_panel * grid.min_spacing(), order: 3 };
    let dt = data.times.dt;
    let stride = opts.time_stride.max(1);

    let interior: Vec<(usize, usize)> = data
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c.role {
            CellRole::Interior { node } => Some((node, i)),
            CellRole::Ladder { .. } => None,
        })
        .collect();
    // (node, ratio, |Ψ̂|) for every candidate sample
    let samples: Vec<Vec<(usize, f64, f64)>> = interior
        .par_iter()
        .map(|&(node, ic)| {
            let c = &data.cells[ic];
            let x = &data.detectors.points[c.detector];
            let a = geom::dist(x, &c.z);
            let qz = q_omega.value(&c.z);
            let row = data.row(ic);
            let mut out = Vec::new();
            for j in (0..data.times.n).step_by(stride) {
                let t = data.times.time(j);
                if t - a < opts.t_margin_steps * dt {
                    continue;
                }
                let psi = separated_kernel(&q_omega, qz, x, &c.z, t, &rule);
                if psi != 0.0 {
                    out.push((node, row[j] / psi, psi.abs()));
                }
            }
            out
        })
        .collect();
    let psi_max = samples.iter().flatten().fold(0.0f64, |m, s| m.max(s.2));
    let floor = opts.psi_floor * psi_max;
    let mut per_node: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(node, _) in &interior {
        per_node.entry(node).or_default();
    }
    for s in samples.iter().flatten() {
        if s.2 >= floor && s.1.is_finite() {
            per_node.get_mut(&s.0).unwrap().push(s.1);
        }
    }

    let mut f1 = vec![0.0; grid.len()];
    let mut counts = Vec::with_capacity(per_node.len());
    for (node, mut ratios) in per_node {
        counts.push(ratios.len());
        if ratios.is_empty() {
            diag.unrecovered.push(node);
            continue;
        }
        ratios.sort_by(f64::total_cmp);
        let n = ratios.len();
        let med = if n % 2 == 1 { ratios[n / 2] } else { 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]) };
        f1[node] = med - f0.value(&grid.node(node));
    }
    counts.sort_unstable();
    diag.f_samples_min = counts.first().copied().unwrap_or(0);
    diag.f_samples_median = counts.get(counts.len() / 2).copied().unwrap_or(0);
    if !diag.unrecovered.is_empty() {
        diag.warnings.push(format!("{} interior nodes had no admissible samples", diag.unrecovered.len()));
    }
    ScalarField::new(grid.clone(), f1)
}

fn check(data: &SeparatedData, dim: usize) -> Result<()> {
    if data.dim != dim {
        return Err(Error::Validation(format!("expected {dim}D data, got {}D", data.dim)));
    }
    if data.integration_order != 3 {
        return Err(Error::Validation("reconstruction needs data at integration order 3".into()));
    }
    Ok(())
}

fn base_diagnostics(data: &SeparatedData, limits: &LimitTable) -> Diagnostics {
    Diagnostics {
        limit_fit_residual: limits.max_fit_residual,
        limit_data_scale: limits.data_scale,
        skipped_cells: data.metadata.skipped.len(),
        ..Default::default()
    }
}

/// Stages (i)–(ii) in 3D: boundary limits, then `q̂` from
/// `8π · limit = M₂[q](x, t/2)`.
pub fn recon3d_q(data: &SeparatedData, f0: &dyn Field, opts: &ReconOptions) -> Result<(ScalarField, Diagnostics)> {
    check(data, 3)?;
    let limits = boundary_limits(data, f0)?;
    let mut diag = base_diagnostics(data, &limits);
    let rows: Vec<Vec<f64>> = limits.values.iter().map(|r| r.iter().map(|v| 8.0 * PI * v).collect()).collect();
    diag.limit_max = limits.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let means = mean_data(data, 0.5 * data.times.dt, &rows);
    let q_hat = invert_mean_3d(&means, &data.detectors, &data.metadata.grid, opts.finch_rakesh)?;
    Ok((q_hat, diag))
}

/// The 3D pipeline: boundary limits, spherical-mean inversion for `q̂`,
/// reassembly of `Ψ̂` and the median ratio for `f̂`.
pub fn recon3d(data: &SeparatedData, f0: &dyn Field, opts: &ReconOptions) -> Result<ReconResult> {
    let (q_hat, mut diag) = recon3d_q(data, f0, opts)?;
    let f1_hat = recover_f(data, &q_hat, f0, opts, &mut diag)?;
    Ok(ReconResult { q_hat, f1_hat, diagnostics: diag })
}

/// `Φ(x, s) = W(x, x, 2s)/(2π)` on `s_j = j·dt/2` from the boundary limits.
pub fn phi_from_limits(limits: &LimitTable) -> Vec<Vec<f64>> {
    limits.values.iter().map(|r| r.iter().map(|w| w / (2.0 * PI)).collect()).collect()
}

/// Solves the second-kind equation for every detector: `M₁[q](x, s_j)` for
/// `j ≥ j0`, zero below.
pub fn volterra_stage(phi: &[Vec<f64>], ds: f64, j0: usize) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = phi.first().map_or(0, |r| r.len());
    if n < j0 + 5 {
        return Err(Error::Grid("too few time samples above δ for the Volterra solve".into()));
    }
    let solver = SecondKindSolver::new(j0 as f64 * ds, ds, n - j0);
    let out: Vec<Result<(Vec<f64>, f64)>> = phi
        .par_iter()
        .map(|row| {
            let rhs = TimeSeries::new(j0 as f64 * ds, ds, row[j0..].to_vec())?;
            let p = differentiate_rhs(&VolterraProblem::new(rhs, Kind::First)?)?;
            let sol = solver.solve(&p.rhs.samples)?;
            let mut m1 = vec![0.0; j0];
            m1.extend(sol.m1.samples);
            Ok((m1, sol.max_residual))
        })
        .collect();
    let mut rows = Vec::with_capacity(out.len());
    let mut worst = 0.0f64;
    for r in out {
        let (m, res) = r?;
        worst = worst.max(res);
        rows.push(m);
    }
    Ok((rows, worst))
}

/// Stages (i)–(iii) in 2D: boundary limits give `Φ`, the Volterra solve
/// gives `M₁[q]`, the circular-mean inversion gives `q̂`.
pub fn recon2d_q(data: &SeparatedData, f0: &dyn Field, opts: &ReconOptions) -> Result<(ScalarField, Diagnostics)> {
    check(data, 2)?;
    let limits = boundary_limits(data, f0)?;
    let mut diag = base_diagnostics(data, &limits);
    let phi = phi_from_limits(&limits);
    diag.limit_max = phi.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let margin = data.detectors.radius - geom::norm(&data.metadata.omega.center) - data.metadata.omega.radius;
    let delta = opts.delta_fraction * margin;
    if !(delta > 0.0) {
        return Err(Error::Validation("δ must be positive: Ω has to stay away from Γ".into()));
    }
    let ds = 0.5 * data.times.dt;
    let j0 = (delta / ds).ceil() as usize;
    let (m1, res) = volterra_stage(&phi, ds, j0)?;
    diag.volterra_residual = res;
    let q_hat = q_from_m1(data, &m1, opts.fhr)?;
    Ok((q_hat, diag))
}

/// Stage (iii) alone, for injecting circular means directly.
pub fn q_from_m1(data: &SeparatedData, m1: &[Vec<f64>], fhr: Fhr) -> Result<ScalarField> {
    let means = mean_data(data, 0.5 * data.times.dt, m1);
    invert_mean_2d(&means, &data.detectors, &data.metadata.grid, fhr)
}

/// The 2D pipeline.
pub fn recon2d(data: &SeparatedData, f0: &dyn Field, opts: &ReconOptions) -> Result<ReconResult> {
    let (q_hat, mut diag) = recon2d_q(data, f0, opts)?;
    let f1_hat = recover_f(data, &q_hat, f0, opts, &mut diag)?;
    Ok(ReconResult { q_hat, f1_hat, diagnostics: diag })
}

/// Dispatches on the data dimension.
pub fn reconstruct(data: &SeparatedData, f0: &dyn Field, opts: &ReconOptions) -> Result<ReconResult> {
    match data.dim {
        2 => recon2d(data, f0, opts),
        3 => recon3d(data, f0, opts),
        d => Err(Error::Validation(format!("unsupported dimension {d}"))),
    }
}
