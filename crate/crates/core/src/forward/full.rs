use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{Cell, SamplingPlan, TimeGrid};
use super::separated::{Metadata, SeparatedData, SkippedCell};
use crate::error::{Error, Result};
use crate::fields::{DetectorSet, Field, GridSpec, IlluminationSet, Phantom};
use crate::geom::{self, Ball, Point};
use crate::persist::content_hash;
use crate::quad::gauss_legendre;
use crate::specfun::hankel1_0_positive;
use crate::xforms::{RadonInverter, Spectrum};

/// Nonnegative wavenumbers `k_m = m dk`, `m = 0..=n`; negative ones follow
/// from Hermitian symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KGrid {
    pub dk: f64,
    pub n: usize,
}

impl KGrid {
    pub fn new(dk: f64, n: usize) -> Result<Self> {
        if !(dk > 0.0) || n == 0 {
            return Err(Error::Grid(format!("invalid k grid dk={dk}, n={n}")));
        }
        Ok(Self { dk, n })
    }

    /// Spacing `2π/P` for a period `P = period_factor · t_end` and modes up
    /// to `k_max`.
    pub fn for_record(t_end: f64, k_max: f64, period_factor: f64) -> Result<Self> {
        if !(period_factor >= 1.0) {
            return Err(Error::Validation("the period must cover the record".into()));
        }
        let dk = 2.0 * PI / (period_factor * t_end);
        Self::new(dk, (k_max / dk).floor() as usize)
    }

    #[inline]
    pub fn k(&self, m: usize) -> f64 {
        m as f64 * self.dk
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullOptions {
    /// Largest wavenumber; defaults to `π/(2 dr)` of the illumination.
    pub k_max: Option<f64>,
    /// Fourier period as a multiple of the record length.
    pub period_factor: f64,
    /// Radial and angular nodes of the product rule over `supp q`.
    pub y_radial: usize,
    pub y_angular: usize,
    /// Gauss order per slice panel; panels are one wavelength at `k_max`.
    pub order: usize,
    /// Upper bound on the predicted number of kernel evaluations.
    pub cost_cap: f64,
}

impl Default for FullOptions {
    fn default() -> Self {
        Self { k_max: None, period_factor: 4.0, y_radial: 12, y_angular: 32, order: 8, cost_cap: 2e10 }
    }
}

impl FullOptions {
    pub fn k_max_for(&self, illum: &IlluminationSet) -> f64 {
        self.k_max.unwrap_or(0.5 * PI / illum.dr())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinogramMetadata {
    pub phantom_hash: String,
    pub grid: GridSpec,
    pub omega: Ball,
    pub predicted_cost: f64,
}

/// `m̂^{r,θ}(x, k)` for `k ≥ 0`; `values[((ix·nk + m)·nθ + iθ)·nr + ir]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinogramData {
    pub dim: usize,
    pub illum: IlluminationSet,
    pub detectors: DetectorSet,
    pub k: KGrid,
    pub values: Vec<Complex64>,
    pub metadata: SinogramMetadata,
}

impl SinogramData {
    fn index(&self, ix: usize, m: usize, it: usize, ir: usize) -> usize {
        let (nt, nr) = (self.illum.theta_samples.len(), self.illum.r_samples.len());
        ((ix * self.k.len() + m) * nt + it) * nr + ir
    }

    /// Value at signed mode `m`, using `m̂(−k) = conj m̂(k)`.
    pub fn at(&self, ix: usize, m: isize, it: usize, ir: usize) -> Complex64 {
        let v = self.values[self.index(ix, m.unsigned_abs(), it, ir)];
        if m < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Two-sided spectrum at one detector and plane.
    pub fn spectrum(&self, ix: usize, it: usize, ir: usize) -> Spectrum {
        let n = self.k.n as isize;
        let samples = (-n..=n).map(|m| self.at(ix, m, it, ir)).collect();
        Spectrum { k0: -(n as f64) * self.k.dk, dk: self.k.dk, samples }
    }

    /// One `(r, θ)` sinogram of real or imaginary parts at `(ix, m)`.
    fn plane_slice(&self, ix: usize, m: usize, imag: bool) -> Vec<f64> {
        let len = self.illum.theta_samples.len() * self.illum.r_samples.len();
        let start = self.index(ix, m, 0, 0);
        self.values[start..start + len].iter().map(|c| if imag { c.im } else { c.re }).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }
}

/// Radiating fundamental solution of `Δ + k²` at distance `d > 0`.
#[inline]
fn phi_k(dim: usize, k: f64, d: f64) -> Complex64 {
    if dim == 2 {
        Complex64::new(0.0, 0.25) * hankel1_0_positive(k * d)
    } else {
        Complex64::from_polar(1.0 / (4.0 * PI * d), k * d)
    }
}

/// Quadrature nodes on `E(r, θ) ∩ ball`, clustered about the foot of `p` to
/// tame the singularity of `Φ_k(p, ·)`.
fn slice_nodes(dim: usize, r: f64, theta: &Point, ball: &Ball, p: &Point, panel: f64, order: usize) -> Vec<(Point, f64)> {
    let off = r - geom::dot(theta, &ball.center);
    if off.abs() >= ball.radius {
        return Vec::new();
    }
    let rho = (ball.radius * ball.radius - off * off).sqrt();
    let gl = gauss_legendre(order);
    let mut out = Vec::new();
    if dim == 2 {
        let tau = [-theta[1], theta[0], 0.0];
        let base = geom::scale(theta, r);
        let sc = geom::dot(&tau, &ball.center);
        let (s1, s2) = (sc - rho, sc + rho);
        let foot = geom::dot(&tau, p).clamp(s1, s2);
        for (sign, len) in [(1.0, s2 - foot), (-1.0, foot - s1)] {
            if len <= 0.0 {
                continue;
            }
            // s = foot ± len·u³
            let n = (3.0 * len / panel).ceil().max(1.0) as usize;
            // uniform panels, the first one graded geometrically towards the foot
            let h = 1.0 / n as f64;
            let mut cuts: Vec<f64> = (0..4).map(|g| h / 8.0 * 2f64.powi(g)).collect();
            cuts.insert(0, 0.0);
            cuts.extend((2..=n).map(|j| j as f64 * h));
            for win in cuts.windows(2) {
                for (u, w) in gl.mapped(win[0], win[1]) {
                    let s = foot + sign * len * u * u * u;
                    out.push((geom::axpy(&base, s, &tau), w * 3.0 * len * u * u));
                }
            }
        }
        return out;
    }
    let (e1, e2) = geom::complete_frame(theta);
    let shift = geom::dot(theta, p) - r;
    let pf = geom::axpy(p, -shift, theta);
    let cc = geom::axpy(&ball.center, off, theta);
    let v = geom::sub(&cc, &pf);
    let dv = geom::norm(&v);
    let ray = |phi: f64| {
        let e = geom::add(&geom::scale(&e1, phi.cos()), &geom::scale(&e2, phi.sin()));
        let pp = geom::dot(&e, &v);
        let disc = (pp * pp - dv * dv + rho * rho).max(0.0).sqrt();
        (e, (pp - disc).max(0.0), (pp + disc).max(0.0))
    };
    let radial = |phi: f64, wphi: f64, out: &mut Vec<(Point, f64)>| {
        let (e, r1, r2) = ray(phi);
        if r2 <= r1 {
            return;
        }
        let n = ((r2 - r1) / panel).ceil().max(1.0) as usize;
        let h = (r2 - r1) / n as f64;
        for j in 0..n {
            for (s, w) in gl.mapped(r1 + j as f64 * h, r1 + (j + 1) as f64 * h) {
                out.push((geom::axpy(&pf, s, &e), wphi * w * s));
            }
        }
    };
    if dv < rho {
        let n = ((2.0 * PI * (dv + rho) / panel).ceil() as usize * order).max(8);
        for j in 0..n {
            radial(2.0 * PI * j as f64 / n as f64, 2.0 * PI / n as f64, &mut out);
        }
    } else {
        let mid = geom::dot(&v, &e2).atan2(geom::dot(&v, &e1));
        let half = (rho / dv).asin();
        // φ = mid + half·sin ψ absorbs the square-root edges
        let n = (2.0 * half * (dv + rho) / panel).ceil().max(1.0) as usize;
        for j in 0..n {
            let (a, b) = (-0.5 * PI + PI * j as f64 / n as f64, -0.5 * PI + PI * (j + 1) as f64 / n as f64);
            for (psi, w) in gl.mapped(a, b) {
                radial(mid + half * psi.sin(), w * half * psi.cos(), &mut out);
            }
        }
    }
    out
}

/// Product rule over a ball: `(y, weight)`.
fn ball_nodes(dim: usize, ball: &Ball, nr: usize, na: usize) -> Vec<(Point, f64)> {
    let gr = gauss_legendre(nr);
    let mut out = Vec::new();
    if dim == 2 {
        for (s, w) in gr.mapped(0.0, ball.radius) {
            for j in 0..na {
                let e = geom::planar_direction(2.0 * PI * j as f64 / na as f64);
                out.push((geom::axpy(&ball.center, s, &e), w * s * 2.0 * PI / na as f64));
            }
        }
    } else {
        let gc = gauss_legendre(na.div_ceil(2).max(2));
        for (s, w) in gr.mapped(0.0, ball.radius) {
            for (c, wc) in gc.mapped(-1.0, 1.0) {
                let sn = (1.0 - c * c).max(0.0).sqrt();
                for j in 0..na {
                    let a = 2.0 * PI * j as f64 / na as f64;
                    let e = [sn * a.cos(), sn * a.sin(), c];
                    out.push((geom::axpy(&ball.center, s, &e), w * s * s * wc * 2.0 * PI / na as f64));
                }
            }
        }
    }
    out
}

/// Five-point Gauss–Hermite rule for `∫ g(s) δ_ε(s) ds` with a Gaussian
/// `δ_ε`; one point when the slab is thin on the scale of `1/k_max`.
fn slab_offsets(width: f64, k_max: f64) -> Vec<(f64, f64)> {
    if width * k_max <= 0.05 {
        return vec![(0.0, 1.0)];
    }
    let xi = [-2.020_182_870_456_086, -0.958_572_464_613_819, 0.0, 0.958_572_464_613_819, 2.020_182_870_456_086];
    let w = [0.019_953_242_059_046, 0.393_619_323_152_241, 0.945_308_720_482_942, 0.393_619_323_152_241, 0.019_953_242_059_046];
    xi.iter().zip(&w).map(|(x, w)| (std::f64::consts::SQRT_2 * width * x, w / PI.sqrt())).collect()
}

/// Regular lattice over a ball, padded for a four-point stencil.
struct Lattice {
    dim: usize,
    origin: Point,
    h: f64,
    n: usize,
}

impl Lattice {
    fn covering(dim: usize, ball: &Ball, h: f64) -> Self {
        let n = (2.0 * ball.radius / h).ceil() as usize + 5;
        let half = 0.5 * (n - 1) as f64 * h;
        let mut origin = ball.center;
        for c in origin.iter_mut().take(dim) {
            *c -= half;
        }
        Self { dim, origin, h, n }
    }

    fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn point(&self, l: usize) -> Point {
        let mut p = self.origin;
        let mut rest = l;
        for c in (0..self.dim).rev() {
            p[c] += (rest % self.n) as f64 * self.h;
            rest /= self.n;
        }
        p
    }

    /// Lattice indices and Lagrange weights of the tensor cubic stencil at `z`.
    fn stencil(&self, z: &Point, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let mut base = [0usize; 3];
        let mut w = [[0.0; 4]; 3];
        for c in 0..self.dim {
            let u = (z[c] - self.origin[c]) / self.h;
            let i = (u.floor() as usize).clamp(1, self.n - 3);
            let s = u - i as f64;
            base[c] = i - 1;
            w[c] = [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ];
        }
        let taps = 4usize.pow(self.dim as u32);
        for t in 0..taps {
            let (mut l, mut wt, mut rest) = (0, 1.0, t);
            for c in 0..self.dim {
                let o = rest % 4;
                rest /= 4;
                l = l * self.n + base[c] + o;
                wt *= w[c][o];
            }
            out.push((l, wt));
        }
    }
}

/// Lattice spacing for the two-centre kernel table.
fn lattice_spacing(k_max: f64) -> f64 {
    2.0 * PI / k_max / 8.0
}

/// Plain Gauss nodes on `E(r, θ) ∩ ball`.
fn plain_slice_nodes(dim: usize, r: f64, theta: &Point, ball: &Ball, panel: f64, order: usize) -> Vec<(Point, f64)> {
    if dim == 3 {
        let c = geom::axpy(&ball.center, r - geom::dot(theta, &ball.center), theta);
        return slice_nodes(dim, r, theta, ball, &c, panel, order);
    }
    let off = r - geom::dot(theta, &ball.center);
    if off.abs() >= ball.radius {
        return Vec::new();
    }
    let rho = (ball.radius * ball.radius - off * off).sqrt();
    let tau = [-theta[1], theta[0], 0.0];
    let base = geom::scale(theta, r);
    let sc = geom::dot(&tau, &ball.center);
    // s = sc + ρ sin ψ absorbs the square-root ends of the chord
    let n = (PI * rho / panel).ceil().max(1.0) as usize;
    let gl = gauss_legendre(order);
    let mut out = Vec::new();
    for j in 0..n {
        let (a, b) = (-0.5 * PI + PI * j as f64 / n as f64, -0.5 * PI + PI * (j + 1) as f64 / n as f64);
        for (psi, w) in gl.mapped(a, b) {
            out.push((geom::axpy(&base, sc + rho * psi.sin(), &tau), w * rho * psi.cos()));
        }
    }
    out
}

/// Predicted kernel evaluations of [`simulate_fourier_full`].
pub fn predicted_cost(phantom: &Phantom, illum: &IlluminationSet, detectors: &DetectorSet, k: &KGrid, opts: &FullOptions) -> f64 {
    let dim = phantom.dim();
    let k_max = opts.k_max_for(illum);
    let panel = 2.0 * PI / k_max;
    let rho = phantom.f_exact().support().map_or(0.0, |b| b.radius);
    let per_slice = if dim == 2 {
        2.0 * ((2.0 * rho / panel).ceil() + 1.0) * opts.order as f64
    } else {
        PI * rho * rho / (panel * panel) * (opts.order * opts.order) as f64
    };
    let planes = (illum.r_samples.len() * illum.theta_samples.len()) as f64;
    let gh = slab_offsets(illum.slab_width, k_max).len() as f64;
    let nd = detectors.len() as f64;
    let nk = k.len() as f64;
    let mut cost = planes * gh * nk * nd * per_slice;
    if !phantom.q_exact.is_zero() {
        let na = opts.y_angular as f64;
        let ny = (opts.y_radial as f64) * if dim == 2 { na } else { na * (opts.y_angular.div_ceil(2)) as f64 };
        let nz = ((2.0 * rho / lattice_spacing(k_max)).ceil() + 5.0).powi(dim as i32);
        let taps = 4f64.powi(dim as i32);
        cost += nk * ny * (nd + nz * (1.0 + nd)) + planes * gh * per_slice * taps * nd * nk;
    }
    cost
}

/// Born-model sinogram `m̂^{r,θ}(x, k) = R[f L(x, ·, k)](r, θ)` with
///
/// ```text
/// L(x, z, k) = −ik (1 + q(z)) Φ_k(x, z) + (−ik)³ V_k(x, z),
/// V_k(x, z) = ∫ q(y) Φ_k(x, y) Φ_k(y, z) dy,
/// ```
///
/// the plane integrals mollified by the slab profile of `illum`. `V_k` is
/// tabulated once on a lattice over `supp f` and interpolated.
pub fn simulate_fourier_full(
    phantom: &Phantom,
    illum: &IlluminationSet,
    detectors: &DetectorSet,
    k: &KGrid,
    opts: &FullOptions,
) -> Result<SinogramData> {
    let dim = phantom.dim();
    if illum.dim != dim || detectors.dim != dim {
        return Err(Error::Validation("illumination, detectors and phantom dimensions differ".into()));
    }
    if opts.order < 2 || opts.y_radial < 2 || opts.y_angular < 4 {
        return Err(Error::Validation("quadrature orders too small".into()));
    }
    let cost = predicted_cost(phantom, illum, detectors, k, opts);
    if cost > opts.cost_cap {
        return Err(Error::CostCap { predicted: cost, cap: opts.cost_cap });
    }
    let f = phantom.f_exact();
    let q = &phantom.q_exact;
    let k_max = opts.k_max_for(illum);
    let panel = 2.0 * PI / k_max;
    let nk = k.len();
    let nd = detectors.len();
    let block = nd * nk;
    let Some(fball) = f.support() else {
        return Err(Error::Validation("absorption density vanishes".into()));
    };
    let ynodes: Vec<(Point, f64)> = match q.support() {
        Some(b) => ball_nodes(dim, &b, opts.y_radial, opts.y_angular)
            .into_iter()
            .map(|(y, w)| (y, w * q.value(&y)))
            .filter(|(_, w)| *w != 0.0)
            .collect(),
        None => Vec::new(),
    };
    let ny = ynodes.len();
    let lattice = Lattice::covering(dim, &fball, lattice_spacing(k_max));
    let reach = fball.radius + 3.0 * lattice.h * (dim as f64).sqrt();
    // V[l·block + ix·nk + m]
    let table: Vec<Complex64> = if ny == 0 {
        Vec::new()
    } else {
        let phix: Vec<Complex64> = detectors
            .points
            .par_iter()
            .flat_map_iter(|x| ynodes.iter().flat_map(move |(y, w)| (0..nk).map(move |m| (x, y, w, m))))
            .map(|(x, y, w, m)| if m == 0 { Complex64::default() } else { *w * phi_k(dim, k.k(m), geom::dist(x, y)) })
            .collect();
        (0..lattice.len())
            .into_par_iter()
            .flat_map_iter(|l| {
                let z = lattice.point(l);
                let mut v = vec![Complex64::default(); block];
                if geom::dist(&z, &fball.center) <= reach {
                    let mut b = vec![Complex64::default(); nk];
                    for (i, (y, _)) in ynodes.iter().enumerate() {
                        let d = geom::dist(y, &z);
                        if d == 0.0 {
                            continue;
                        }
                        for (m, bm) in b.iter_mut().enumerate().skip(1) {
                            *bm = phi_k(dim, k.k(m), d);
                        }
                        for ix in 0..nd {
                            let px = &phix[(ix * ny + i) * nk..(ix * ny + i + 1) * nk];
                            let vx = &mut v[ix * nk..(ix + 1) * nk];
                            for m in 1..nk {
                                vx[m] += px[m] * b[m];
                            }
                        }
                    }
                }
                v
            })
            .collect()
    };
    let offsets = slab_offsets(illum.slab_width, k_max);

    let nt = illum.theta_samples.len();
    let nr = illum.r_samples.len();
    let planes: Vec<Vec<Complex64>> = (0..nt * nr)
        .into_par_iter()
        .map(|ip| {
            let th = &illum.theta_samples[ip / nr];
            let r0 = illum.r_samples[ip % nr];
            let mut out = vec![Complex64::default(); block];
            let mut acc = vec![Complex64::default(); block];
            let mut taps = Vec::new();
            for &(off, gw) in &offsets {
                let r = r0 + off;
                for (ix, x) in detectors.points.iter().enumerate() {
                    let a = &mut acc[..nk];
                    a.iter_mut().for_each(|v| *v = Complex64::default());
                    for (z, w) in slice_nodes(dim, r, th, &fball, x, panel, opts.order) {
                        let c = w * f.value(&z) * (1.0 + q.value(&z));
                        let d = geom::dist(x, &z);
                        if c == 0.0 || d == 0.0 {
                            continue;
                        }
                        for (m, am) in a.iter_mut().enumerate().skip(1) {
                            *am += c * phi_k(dim, k.k(m), d);
                        }
                    }
                    for m in 1..nk {
                        out[ix * nk + m] += gw * Complex64::new(0.0, -k.k(m)) * a[m];
                    }
                }
                if ny == 0 {
                    continue;
                }
                acc.iter_mut().for_each(|v| *v = Complex64::default());
                for (z, w) in plain_slice_nodes(dim, r, th, &fball, panel, opts.order) {
                    let c = w * f.value(&z);
                    if c == 0.0 {
                        continue;
                    }
                    lattice.stencil(&z, &mut taps);
                    for &(l, wl) in &taps {
                        let cw = c * wl;
                        for (a, v) in acc.iter_mut().zip(&table[l * block..(l + 1) * block]) {
                            *a += cw * v;
                        }
                    }
                }
                for ix in 0..nd {
                    for m in 1..nk {
                        let km = k.k(m);
                        // (−ik)³ = i k³
                        out[ix * nk + m] += gw * Complex64::new(0.0, km * km * km) * acc[ix * nk + m];
                    }
                }
            }
            out
        })
        .collect();

    let mut values = vec![Complex64::default(); nd * nk * nt * nr];
    for (ip, plane) in planes.iter().enumerate() {
        for ix in 0..nd {
            for m in 0..nk {
                values[((ix * nk + m) * nt + ip / nr) * nr + ip % nr] = plane[ix * nk + m];
            }
        }
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::numerical("forward-full", "non-finite sinogram"));
    }
    Ok(SinogramData {
        dim,
        illum: illum.clone(),
        detectors: detectors.clone(),
        k: *k,
        values,
        metadata: SinogramMetadata {
            phantom_hash: content_hash(&phantom.spec),
            grid: phantom.grid.clone(),
            omega: phantom.omega,
            predicted_cost: cost,
        },
    })
}

/// `∭₀ᵗ e^{−iks}` with zero initial values.
fn triple_antiderivative_mode(k: f64, t: f64) -> Complex64 {
    let z = Complex64::new(0.0, -k * t);
    if z.norm() < 0.5 {
        // t³ Σ_j z^j/(j+3)!
        let mut term = Complex64::new(1.0 / 6.0, 0.0);
        let mut acc = term;
        for j in 1..14 {
            term *= z / (j + 3) as f64;
            acc += term;
        }
        return acc * t * t * t;
    }
    let ik = Complex64::new(0.0, -k);
    (z.exp() - 1.0 - z - 0.5 * z * z) / (ik * ik * ik)
}

/// Recovers the triple time antiderivative of `f(z) Ľ(x, z, t)` at the
/// cells of `plan`: Radon inversion in `(r, θ)` per detector and mode,
/// then the tapered inverse Fourier series, integrated three times in
/// closed form.
pub fn separate_data(sino: &SinogramData, plan: &SamplingPlan) -> Result<SeparatedData> {
    if plan.dim != sino.dim {
        return Err(Error::Validation("plan and sinogram dimensions differ".into()));
    }
    let tol = 1e-12;
    let mut cells: Vec<Cell> = Vec::with_capacity(plan.cells.len());
    let mut skipped = Vec::new();
    for c in &plan.cells {
        let Some(x) = sino.detectors.points.get(c.detector) else {
            return Err(Error::Validation(format!("cell refers to missing detector {}", c.detector)));
        };
        if geom::dist(x, &c.z) <= tol {
            skipped.push(SkippedCell { detector: c.detector, z: c.z, reason: "z coincides with the detector".into() });
        } else {
            cells.push(*c);
        }
    }
    let times: TimeGrid = plan.times;
    let nk = sino.k.len();
    let k_cut = sino.k.k(nk);
    let taper: Vec<f64> = (0..nk).map(|m| (0.5 * PI * sino.k.k(m) / k_cut).cos().powi(2)).collect();
    let modes: Vec<Vec<Complex64>> = (0..times.n)
        .map(|j| (0..nk).map(|m| triple_antiderivative_mode(sino.k.k(m), times.time(j))).collect())
        .collect();

    let mut series = vec![0.0; cells.len() * times.n];
    for ix in 0..sino.detectors.len() {
        let mine: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].detector == ix).collect();
        if mine.is_empty() {
            continue;
        }
        let pts = mine.iter().map(|&i| cells[i].z).collect();
        let inv = RadonInverter::at_points(sino.dim, &sino.illum.r_samples, &sino.illum.theta_samples, pts)?;
        // ĝ_m at the cells, mode-major
        let g: Vec<Vec<Complex64>> = (1..nk)
            .map(|m| {
                let re = inv.invert(&sino.plane_slice(ix, m, false));
                let im = inv.invert(&sino.plane_slice(ix, m, true));
                re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
            })
            .collect();
        for (c, &cell) in mine.iter().enumerate() {
            let row = &mut series[cell * times.n..(cell + 1) * times.n];
            for (j, v) in row.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for m in 1..nk {
                    acc += taper[m] * g[m - 1][c] * modes[j][m];
                }
                *v = sino.k.dk / PI * acc.re;
            }
        }
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("separate", "non-finite separated data"));
    }
    Ok(SeparatedData {
        dim: sino.dim,
        integration_order: 3,
        times,
        detectors: sino.detectors.clone(),
        cells,
        series,
        metadata: Metadata {
            phantom_hash: sino.metadata.phantom_hash.clone(),
            grid: sino.metadata.grid.clone(),
            omega: sino.metadata.omega,
            mollification_width: sino.illum.slab_width,
            ladder: plan.ladder.clone(),
            skipped,
            source: "fourier-full".into(),
        },
    })
}
