//! Grids, phantoms and measurement geometry.
//!
//! `B` is always a ball centered at the origin, `Ω ⊂ B` a ball and
//! `Γ = ∂B` the detector surface.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Ball, Point};

/// Regular grid geometry. Axes beyond `dim` are unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl GridSpec {
    /// `n` nodes per axis covering `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / (n.max(2) - 1) as f64;
        Self {
            dim,
            shape: vec![n; dim],
            origin: vec![-half_width; dim],
            spacing: vec![h; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.shape.len() != self.dim || self.origin.len() != self.dim || self.spacing.len() != self.dim {
            return Err(Error::Grid("shape/origin/spacing length must equal dim".into()));
        }
        if self.shape.iter().any(|&n| n < 2) {
            return Err(Error::Grid("every axis needs at least two nodes".into()));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Grid("spacing must be positive and finite".into()));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Grid("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Volume (area) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for ax in (0..self.dim).rev() {
            idx[ax] = flat % self.shape[ax];
            flat /= self.shape[ax];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize; 3]) -> usize {
        let mut flat = 0;
        for ax in 0..self.dim {
            flat = flat * self.shape[ax] + idx[ax];
        }
        flat
    }

    /// Physical position of node `flat`.
    pub fn node(&self, flat: usize) -> Point {
        let idx = self.unravel(flat);
        let mut p = [0.0; 3];
        for ax in 0..self.dim {
            p[ax] = self.origin[ax] + idx[ax] as f64 * self.spacing[ax];
        }
        p
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }
}

/// Anything that can be evaluated pointwise.
pub trait Field: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    /// A ball containing the support, `None` for the zero field.
    fn support(&self) -> Option<Ball>;
    /// Length scale below which the field carries no detail (grid spacing
    /// for sampled fields).
    fn resolution(&self) -> Option<f64> {
        None
    }
}

/// Samples on a regular grid, multilinearly interpolated and zero outside
/// the bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    support: Option<Ball>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                stage: "field".into(),
                message: "non-finite sample".into(),
            });
        }
        let support = nonzero_bound(&grid, &values);
        Ok(Self { grid, values, support })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], support: None }
    }

    /// Samples `f` at every node.
    pub fn sample(grid: GridSpec, f: &dyn Field) -> Result<Self> {
        let values = grid.nodes().map(|p| f.value(&p)).collect();
        Self::new(grid, values)
    }

    pub fn map(&self, mut f: impl FnMut(&Point, f64) -> f64) -> Self {
        let values: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(&self.grid.node(i), v))
            .collect();
        let support = nonzero_bound(&self.grid, &values);
        Self { grid: self.grid.clone(), values, support }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Bounding ball of the cells touching nonzero samples.
fn nonzero_bound(grid: &GridSpec, values: &[f64]) -> Option<Ball> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut any = false;
    for (i, v) in values.iter().enumerate() {
        if *v != 0.0 {
            any = true;
            let p = grid.node(i);
            for ax in 0..grid.dim {
                lo[ax] = lo[ax].min(p[ax] - grid.spacing[ax]);
                hi[ax] = hi[ax].max(p[ax] + grid.spacing[ax]);
            }
        }
    }
    if !any {
        return None;
    }
    let mut c = [0.0; 3];
    let mut r2 = 0.0;
    for ax in 0..grid.dim {
        c[ax] = 0.5 * (lo[ax] + hi[ax]);
        r2 += (0.5 * (hi[ax] - lo[ax])).powi(2);
    }
    Some(Ball::new(c, r2.sqrt()))
}

impl Field for ScalarField {
    fn dim(&self) -> usize {
        self.grid.dim
    }

    fn value(&self, x: &Point) -> f64 {
        let g = &self.grid;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for ax in 0..g.dim {
            let s = (x[ax] - g.origin[ax]) / g.spacing[ax];
            let n = g.shape[ax];
            if !(s >= 0.0) || s > (n - 1) as f64 {
                return 0.0;
            }
            let i = (s.floor() as usize).min(n - 2);
            base[ax] = i;
            frac[ax] = s - i as f64;
        }
        let corners = 1usize << g.dim;
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = base;
            for ax in 0..g.dim {
                if c >> ax & 1 == 1 {
                    w *= frac[ax];
                    idx[ax] += 1;
                } else {
                    w *= 1.0 - frac[ax];
                }
            }
            if w != 0.0 {
                acc += w * self.values[g.ravel(&idx)];
            }
        }
        acc
    }

    fn support(&self) -> Option<Ball> {
        self.support
    }

    fn resolution(&self) -> Option<f64> {
        Some(self.grid.min_spacing())
    }
}

/// Multilinear interpolation; zero outside the bounding box.
pub fn eval_field(field: &ScalarField, x: &Point) -> f64 {
    field.value(x)
}

/// One smooth bump `amplitude * exp(-1 / (1 - |x-c|²/ρ²))` for `|x-c| < ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl BumpSpec {
    pub fn center_point(&self) -> Point {
        let mut c = [0.0; 3];
        for (i, v) in self.center.iter().take(3).enumerate() {
            c[i] = *v;
        }
        c
    }

    /// Amplitude giving peak value `peak`.
    pub fn with_peak(center: Vec<f64>, radius: f64, peak: f64) -> Self {
        Self { center, radius, amplitude: peak * std::f64::consts::E }
    }
}

/// Analytic sum of bumps.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSum {
    pub dim: usize,
    bumps: Vec<(Point, f64, f64)>,
}

impl BumpSum {
    pub fn new(dim: usize, specs: &[BumpSpec]) -> Self {
        let bumps = specs
            .iter()
            .map(|b| (b.center_point(), b.radius, b.amplitude))
            .collect();
        Self { dim, bumps }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, bumps: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.2 == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            bumps: self.bumps.iter().map(|&(c, r, a)| (c, r, a * s)).collect(),
        }
    }

    /// Peak of `|value|` bounded by the sum of peak magnitudes, exact when
    /// bumps do not overlap.
    pub fn sup_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.2.abs() / std::f64::consts::E).sum()
    }
}

#[inline]
pub fn bump_profile(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s2)).exp()
    }
}

impl Field for BumpSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Point) -> f64 {
        let mut acc = 0.0;
        for (c, r, a) in &self.bumps {
            let d = geom::sub(x, c);
            let s2 = geom::dot(&d, &d) / (r * r);
            acc += a * bump_profile(s2);
        }
        acc
    }

    fn support(&self) -> Option<Ball> {
        let live: Vec<_> = self.bumps.iter().filter(|b| b.2 != 0.0).collect();
        if live.is_empty() {
            return None;
        }
        if live.len() == 1 {
            return Some(Ball::new(live[0].0, live[0].1));
        }
        let mut c = [0.0; 3];
        for b in &live {
            c = geom::axpy(&c, 1.0 / live.len() as f64, &b.0);
        }
        let r = live
            .iter()
            .map(|b| geom::dist(&c, &b.0) + b.1)
            .fold(0.0, f64::max);
        Some(Ball::new(c, r))
    }
}

/// Restriction of a field to a ball.
pub struct Masked<'a> {
    pub inner: &'a dyn Field,
    pub ball: Ball,
}

impl Field for Masked<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        if self.ball.contains(x) {
            self.inner.value(x)
        } else {
            0.0
        }
    }

    fn resolution(&self) -> Option<f64> {
        self.inner.resolution()
    }

    fn support(&self) -> Option<Ball> {
        let s = self.inner.support()?;
        let d = geom::dist(&s.center, &self.ball.center);
        if d >= s.radius + self.ball.radius {
            None
        } else if d + s.radius <= self.ball.radius {
            Some(s)
        } else {
            Some(self.ball)
        }
    }
}

/// Sum of two fields.
pub struct Sum<'a>(pub &'a dyn Field, pub &'a dyn Field);

impl Field for Sum<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        self.0.value(x) + self.1.value(x)
    }

    fn resolution(&self) -> Option<f64> {
        match (self.0.resolution(), self.1.resolution()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn support(&self) -> Option<Ball> {
        match (self.0.support(), self.1.support()) {
            (None, s) | (s, None) => s,
            (Some(a), Some(b)) => {
                let d = geom::dist(&a.center, &b.center);
                if d + b.radius <= a.radius {
                    Some(a)
                } else if d + a.radius <= b.radius {
                    Some(b)
                } else {
                    let r = 0.5 * (d + a.radius + b.radius);
                    let dir = geom::normalize(&geom::sub(&b.center, &a.center));
                    Some(Ball::new(geom::axpy(&a.center, r - a.radius, &dir), r))
                }
            }
        }
    }
}

/// Detector positions on `Γ` with inward normals and surface weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSet {
    pub dim: usize,
    pub radius: f64,
    pub points: Vec<Point>,
    pub inward_normals: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DetectorSet {
    /// `n` equispaced points on the circle of radius `radius`.
    pub fn circle(n: usize, radius: f64) -> Self {
        let w = 2.0 * PI * radius / n as f64;
        let points: Vec<Point> = (0..n)
            .map(|i| geom::scale(&geom::planar_direction(2.0 * PI * i as f64 / n as f64), radius))
            .collect();
        Self::from_points(2, radius, points, vec![w; n])
    }

    /// `n` points of the Fibonacci lattice on the sphere, equal weights.
    pub fn sphere(n: usize, radius: f64) -> Self {
        let w = 4.0 * PI * radius * radius / n as f64;
        let golden = PI * (3.0 - 5f64.sqrt());
        let points = (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z]
            })
            .collect();
        Self::from_points(3, radius, points, vec![w; n])
    }

    pub fn new(dim: usize, n: usize, radius: f64) -> Self {
        if dim == 2 {
            Self::circle(n, radius)
        } else {
            Self::sphere(n, radius)
        }
    }

    fn from_points(dim: usize, radius: f64, points: Vec<Point>, weights: Vec<f64>) -> Self {
        let inward_normals = points.iter().map(|p| geom::scale(&geom::normalize(p), -1.0)).collect();
        Self { dim, radius, points, inward_normals, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Sliced-illumination planes `E(r, θ) = {x : x·θ = r}`, θ on a half sphere
/// and `r` signed, so each plane appears once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationSet {
    pub dim: usize,
    pub r_samples: Vec<f64>,
    pub theta_samples: Vec<Point>,
    pub slab_width: f64,
}

impl IlluminationSet {
    /// `nr` offsets uniformly spanning `[-r_max, r_max]` and `ntheta`
    /// directions: equispaced angles in `[0, π)` in 2D, the upper half of a
    /// Fibonacci sphere in 3D.
    pub fn uniform(dim: usize, nr: usize, ntheta: usize, r_max: f64, slab_width: f64) -> Result<Self> {
        if !(slab_width > 0.0) {
            return Err(Error::Validation("slab_width must be positive".into()));
        }
        if nr < 2 || ntheta < 1 {
            return Err(Error::Validation("need at least 2 offsets and 1 direction".into()));
        }
        let dr = 2.0 * r_max / (nr - 1) as f64;
        let r_samples = (0..nr).map(|i| -r_max + i as f64 * dr).collect();
        let theta_samples = if dim == 2 {
            (0..ntheta)
                .map(|j| geom::planar_direction(PI * j as f64 / ntheta as f64))
                .collect()
        } else {
            let full = DetectorSet::sphere(2 * ntheta, 1.0);
            full.points.into_iter().filter(|p| p[2] > 0.0).collect()
        };
        Ok(Self { dim, r_samples, theta_samples, slab_width })
    }

    pub fn dr(&self) -> f64 {
        if self.r_samples.len() < 2 {
            0.0
        } else {
            self.r_samples[1] - self.r_samples[0]
        }
    }

    /// Mollified plane delta `δ_ε(x·θ − r)`, a unit-mass Gaussian in the
    /// signed distance.
    #[inline]
    pub fn slab_weight(&self, signed_distance: f64) -> f64 {
        let e = self.slab_width;
        (-(0.5 * signed_distance * signed_distance) / (e * e)).exp() / (e * (2.0 * PI).sqrt())
    }
}

/// Input document for [`make_phantom`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub dim: usize,
    /// Nodes per axis of the grid covering `[-b_radius, b_radius]^dim`.
    pub grid_n: usize,
    pub b_radius: f64,
    pub omega_center: Vec<f64>,
    pub omega_radius: f64,
    pub detectors: usize,
    #[serde(default)]
    pub f0: Vec<BumpSpec>,
    #[serde(default)]
    pub f1: Vec<BumpSpec>,
    #[serde(default)]
    pub q: Vec<BumpSpec>,
    #[serde(default = "default_q_max")]
    pub q_max: f64,
    /// Minimum `dist(Γ, Ω)` as a fraction of `b_radius`.
    #[serde(default = "default_margin")]
    pub margin_fraction: f64,
    /// `|f0 + f1|` must exceed this fraction of its maximum on `B̄`.
    #[serde(default = "default_f_floor")]
    pub f_floor: f64,
}

fn default_q_max() -> f64 {
    0.1
}

fn default_margin() -> f64 {
    0.2
}

fn default_f_floor() -> f64 {
    1e-6
}

impl PhantomSpec {
    /// Unit disc (ball), centered `Ω` of radius 0.5, a wide constant-sign
    /// `f0` and no perturbations.
    pub fn basic(dim: usize, grid_n: usize, detectors: usize) -> Self {
        let center = vec![0.0; dim];
        Self {
            dim,
            grid_n,
            b_radius: 1.0,
            omega_center: center.clone(),
            omega_radius: 0.5,
            detectors,
            f0: vec![BumpSpec::with_peak(center, 3.0, 1.0)],
            f1: Vec::new(),
            q: Vec::new(),
            q_max: default_q_max(),
            margin_fraction: default_margin(),
            f_floor: default_f_floor(),
        }
    }
}

/// Validated phantom. The analytic bump sums are kept next to their
/// sampled versions so forward models can avoid interpolation error.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub grid: GridSpec,
    pub f0: ScalarField,
    pub f1: ScalarField,
    pub q: ScalarField,
    pub f0_exact: BumpSum,
    pub f1_exact: BumpSum,
    pub q_exact: BumpSum,
    pub omega: Ball,
    pub b_radius: f64,
    pub gamma: DetectorSet,
}

impl Phantom {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// `dist(Γ, Ω)`.
    pub fn margin(&self) -> f64 {
        self.b_radius - geom::norm(&self.omega.center) - self.omega.radius
    }

    /// Exact `f = f0 + f1`.
    pub fn f_exact(&self) -> Sum<'_> {
        Sum(&self.f0_exact, &self.f1_exact)
    }
}

fn to_point(v: &[f64], dim: usize) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::Validation(format!(
            "expected a {dim}-component position, got {}",
            v.len()
        )));
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

/// Builds and validates a phantom.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let dim = spec.dim;
    if !(2..=3).contains(&dim) {
        return Err(Error::Validation(format!("dim must be 2 or 3, got {dim}")));
    }
    if !(spec.b_radius > 0.0) || !(spec.omega_radius > 0.0) {
        return Err(Error::Validation("radii must be positive".into()));
    }
    if spec.grid_n < 4 {
        return Err(Error::Validation("grid_n must be at least 4".into()));
    }
    if spec.detectors < 3 {
        return Err(Error::Validation("need at least 3 detectors".into()));
    }
    let omega = Ball::new(to_point(&spec.omega_center, dim)?, spec.omega_radius);
    let margin = spec.b_radius - geom::norm(&omega.center) - omega.radius;
    if margin < spec.margin_fraction * spec.b_radius || margin <= 0.0 {
        return Err(Error::Validation(format!(
            "dist(Γ, Ω) = {margin} below the required {}",
            spec.margin_fraction * spec.b_radius
        )));
    }
    for (name, bumps) in [("f0", &spec.f0), ("f1", &spec.f1), ("q", &spec.q)] {
        for b in bumps.iter() {
            to_point(&b.center, dim)?;
            if !(b.radius > 0.0) || !b.amplitude.is_finite() {
                return Err(Error::Validation(format!("{name} bump needs positive radius and finite amplitude")));
            }
        }
    }
    for (name, bumps) in [("f1", &spec.f1), ("q", &spec.q)] {
        for b in bumps.iter() {
            let c = b.center_point();
            if geom::dist(&c, &omega.center) + b.radius > omega.radius + 1e-12 {
                return Err(Error::Validation(format!(
                    "{name} bump at {:?} (radius {}) is not inside Ω",
                    b.center, b.radius
                )));
            }
        }
    }

    let grid = GridSpec::cube(dim, spec.grid_n, spec.b_radius);
    let f0_exact = BumpSum::new(dim, &spec.f0);
    let f1_exact = BumpSum::new(dim, &spec.f1);
    let q_exact = BumpSum::new(dim, &spec.q);
    let f0 = ScalarField::sample(grid.clone(), &f0_exact)?;
    let f1 = ScalarField::sample(grid.clone(), &f1_exact)?;
    let q = ScalarField::sample(grid.clone(), &q_exact)?;

    let q_peak = q.max_abs().max(
        spec.q
            .iter()
            .map(|b| BumpSum::new(dim, std::slice::from_ref(b)).value(&b.center_point()).abs())
            .fold(0.0, f64::max),
    );
    if q_peak > spec.q_max * (1.0 + 1e-12) {
        return Err(Error::Validation(format!(
            "‖q‖∞ = {q_peak} exceeds the Born bound {}",
            spec.q_max
        )));
    }

    let gamma = DetectorSet::new(dim, spec.detectors, spec.b_radius);
    let f = Sum(&f0_exact, &f1_exact);
    let mut samples: Vec<f64> = grid
        .nodes()
        .filter(|p| geom::norm(p) <= spec.b_radius)
        .map(|p| f.value(&p))
        .collect();
    samples.extend(gamma.points.iter().map(|p| f.value(p)));
    let fmax = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fmin = samples.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(fmax > 0.0) || fmin <= spec.f_floor * fmax {
        return Err(Error::Validation(format!(
            "f0 + f1 vanishes on the closure of B (min |f| = {fmin}, max |f| = {fmax})"
        )));
    }
    let signs_mixed = samples.iter().any(|v| *v > 0.0) && samples.iter().any(|v| *v < 0.0);
    if signs_mixed {
        return Err(Error::Validation("f0 + f1 changes sign on the closure of B".into()));
    }

    Ok(Phantom {
        spec: spec.clone(),
        grid,
        f0,
        f1,
        q,
        f0_exact,
        f1_exact,
        q_exact,
        omega,
        b_radius: spec.b_radius,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2() -> GridSpec {
        GridSpec { dim: 2, shape: vec![5, 7], origin: vec![-1.0, 0.5], spacing: vec![0.5, 0.25] }
    }

    #[test]
    fn ravel_roundtrip() {
        let g = grid2();
        for i in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(i)), i);
        }
        assert_eq!(g.node(g.len() - 1), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn nodes_are_reproduced() {
        let g = grid2();
        let vals: Vec<f64> = (0..g.len()).map(|i| (i as f64).sin()).collect();
        let f = ScalarField::new(g.clone(), vals.clone()).unwrap();
        for i in 0..g.len() {
            assert_eq!(f.value(&g.node(i)), vals[i]);
        }
    }

    #[test]
    fn constant_and_outside() {
        let g = grid2();
        let f = ScalarField::new(g.clone(), vec![2.5; g.len()]).unwrap();
        assert!((f.value(&[0.13, 1.77, 0.0]) - 2.5).abs() < 1e-14);
        assert_eq!(f.value(&[5.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn cell_midpoint_is_corner_mean() {
        let g = GridSpec::cube(3, 4, 1.0);
        let f = ScalarField::sample(g.clone(), &Affine([1.0, -2.0, 0.5], 0.3)).unwrap();
        let h = g.spacing[0];
        let corner = g.node(g.ravel(&[1, 1, 1]));
        let mid = geom::axpy(&corner, 0.5 * h, &[1.0, 1.0, 1.0]);
        let mut mean = 0.0;
        for c in 0..8 {
            let idx = [1 + (c & 1), 1 + (c >> 1 & 1), 1 + (c >> 2 & 1)];
            mean += f.values[g.ravel(&idx)] / 8.0;
        }
        assert!((f.value(&mid) - mean).abs() < 1e-14);
    }

    struct Affine(Point, f64);
    impl Field for Affine {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, x: &Point) -> f64 {
            geom::dot(&self.0, x) + self.1
        }
        fn support(&self) -> Option<Ball> {
            None
        }
    }

    #[test]
    fn detector_weights() {
        let c = DetectorSet::circle(64, 1.3);
        assert!((c.total_weight() - 2.0 * PI * 1.3).abs() < 1e-8);
        let s = DetectorSet::sphere(266, 0.9);
        assert!((s.total_weight() - 4.0 * PI * 0.81).abs() < 1e-8);
        for p in s.points.iter().chain(c.points.iter()) {
            let r = geom::norm(p);
            assert!((r - 0.9).abs() < 1e-12 || (r - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn phantom_without_q() {
        let p = make_phantom(&PhantomSpec::basic(2, 16, 8)).unwrap();
        assert!(p.q.values.iter().all(|v| *v == 0.0));
        assert!(p.q_exact.is_zero());
    }

    #[test]
    fn phantom_rejects_q_outside_omega() {
        let mut s = PhantomSpec::basic(2, 16, 8);
        s.q.push(BumpSpec::with_peak(vec![0.7, 0.0], 0.1, 0.05));
        assert!(matches!(make_phantom(&s), Err(Error::Validation(_))));
    }

    #[test]
    fn phantom_rejects_vanishing_f() {
        let mut s = PhantomSpec::basic(2, 16, 8);
        s.f0 = vec![BumpSpec::with_peak(vec![0.0, 0.0], 0.9, 1.0)];
        assert!(matches!(make_phantom(&s), Err(Error::Validation(_))));
    }

    #[test]
    fn phantom_rejects_strong_contrast() {
        let mut s = PhantomSpec::basic(2, 16, 8);
        s.q.push(BumpSpec::with_peak(vec![0.0, 0.0], 0.3, 0.5));
        assert!(matches!(make_phantom(&s), Err(Error::Validation(_))));
    }

    #[test]
    fn phantom_spec_rejects_unknown_keys() {
        let j = r#"{"dim":2,"grid_n":8,"b_radius":1,"omega_center":[0,0],"omega_radius":0.5,"detectors":8,"bogus":1}"#;
        assert!(serde_json::from_str::<PhantomSpec>(j).is_err());
    }

    #[test]
    fn masked_support() {
        let b = BumpSum::new(2, &[BumpSpec::with_peak(vec![0.0, 0.0], 0.3, 1.0)]);
        let m = Masked { inner: &b, ball: Ball::new([2.0, 0.0, 0.0], 0.5) };
        assert!(m.support().is_none());
        assert_eq!(m.value(&[0.0, 0.0, 0.0]), 0.0);
    }

    proptest! {
        #[test]
        fn affine_reproduced(ax in -2.0f64..2.0, ay in -2.0f64..2.0, c in -1.0f64..1.0,
                             x in -0.99f64..0.99, y in -0.99f64..0.99) {
            let g = GridSpec::cube(2, 9, 1.0);
            let f = ScalarField::sample(g, &Affine([ax, ay, 0.0], c)).unwrap();
            let exact = ax * x + ay * y + c;
            prop_assert!((f.value(&[x, y, 0.0]) - exact).abs() < 1e-12);
        }

        #[test]
        fn random_specs_satisfy_invariants(
            dim in 2usize..4,
            qx in -0.2f64..0.2, qr in 0.05f64..0.25, qa in -0.1f64..0.1,
            fx in -0.2f64..0.2, fr in 0.05f64..0.25, fa in -0.5f64..0.5,
        ) {
            let mut s = PhantomSpec::basic(dim, 9, 12);
            let mut c = vec![0.0; dim];
            c[0] = qx;
            s.q.push(BumpSpec::with_peak(c.clone(), qr, qa));
            c[0] = fx;
            s.f1.push(BumpSpec::with_peak(c, fr, fa));
            let p = make_phantom(&s).unwrap();
            prop_assert!(p.q.max_abs() <= s.q_max);
            for (i, v) in p.q.values.iter().enumerate() {
                if *v != 0.0 {
                    prop_assert!(p.omega.contains(&p.grid.node(i)));
                }
            }
            for (i, v) in p.f1.values.iter().enumerate() {
                if *v != 0.0 {
                    prop_assert!(p.omega.contains(&p.grid.node(i)));
                }
            }
            prop_assert!(p.margin() >= 0.2 * p.b_radius);
        }
    }
}
