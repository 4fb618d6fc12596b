//! Volterra equations for the circular means of the contrast.
//!
//! On the diagonal of the planar data,
//!
//! ```text
//! Φ(t) = ∫_δ^t k̃(t, r) M₁(r) dr,          k̃(t, r) = ρ K(1 − ρ),  ρ = 2r/(t + r)
//! Φ'(t) = (π/2) M₁(t) + ∫_δ^t ∂_t k̃(t, r) M₁(r) dr
//! ```
//!
//! The first-kind equation is only used as a forward model; the solver works
//! on the differentiated, second-kind form.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::specfun::{agm, complete_elliptic_k, elliptic_k_derivative};
use crate::xforms::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraProblem {
    pub delta: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Samples at `delta + j dt`.
    pub rhs: TimeSeries,
    pub kind: Kind,
}

impl VolterraProblem {
    pub fn new(rhs: TimeSeries, kind: Kind) -> Result<Self> {
        if !(rhs.t0 > 0.0) {
            return Err(Error::Validation("the lower limit δ must be positive".into()));
        }
        if rhs.len() < 2 {
            return Err(Error::Validation("need at least two samples".into()));
        }
        if rhs.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("right-hand side is not finite".into()));
        }
        Ok(Self {
            delta: rhs.t0,
            t_end: rhs.time(rhs.len() - 1),
            dt: rhs.dt,
            rhs,
            kind,
        })
    }
}

/// `k̃(t, r) = ρ K(1 − ρ)` with `ρ = 2r/(t + r)`, evaluated through the
/// equivalent form `π r / (2 AGM(t, r))`. Zero outside `0 < r ≤ t`.
pub fn kernel_ktilde(t: f64, r: f64) -> f64 {
    if !(t > 0.0) || r <= 0.0 || r > t {
        return 0.0;
    }
    std::f64::consts::PI * r / (2.0 * agm(t, r))
}

/// `ρ K(1 − ρ)` literally; agrees with [`kernel_ktilde`] and is kept for
/// cross-checking.
pub fn kernel_ktilde_modulus_form(t: f64, r: f64) -> f64 {
    if !(t > 0.0) || r <= 0.0 || r > t {
        return 0.0;
    }
    let rho = 2.0 * r / (t + r);
    rho * complete_elliptic_k(1.0 - rho).unwrap_or(f64::INFINITY)
}

/// `∂_t k̃(t, r) = −(ρ/(t + r)) [K(κ) − ρ K'(κ)]`, `κ = 1 − ρ`. `K'` comes
/// from the AGM values of `K` and `E`, or from the Maclaurin series near the
/// diagonal where `κ → 0`.
pub fn kernel_ktilde_dt(t: f64, r: f64) -> f64 {
    if !(t > 0.0) || r <= 0.0 || r > t {
        return 0.0;
    }
    let rho = 2.0 * r / (t + r);
    let kappa = (t - r) / (t + r);
    match (complete_elliptic_k(kappa), elliptic_k_derivative(kappa)) {
        (Ok(k), Ok(dk)) => -(rho / (t + r)) * (k - rho * dk),
        _ => 0.0,
    }
}

/// Forward first-kind quadrature `Φ(t) = ∫_δ^t k̃(t, r) m(r) dr` at the
/// given times, by composite Gauss–Legendre with `panels` per unit length.
pub fn first_kind_forward(m: impl Fn(f64) -> f64, delta: f64, times: &[f64], panels_per_unit: usize) -> Vec<f64> {
    let rule = gauss_legendre(10);
    times
        .iter()
        .map(|&t| {
            if t <= delta {
                return 0.0;
            }
            let n = ((t - delta) * panels_per_unit as f64).ceil().max(1.0) as usize;
            let h = (t - delta) / n as f64;
            let mut acc = 0.0;
            for p in 0..n {
                let lo = delta + p as f64 * h;
                for (r, w) in rule.mapped(lo, lo + h) {
                    acc += w * kernel_ktilde(t, r) * m(r);
                }
            }
            acc
        })
        .collect()
}

/// Fourth-order differentiation of the right-hand side, turning a
/// first-kind problem into a second-kind one.
pub fn differentiate_rhs(problem: &VolterraProblem) -> Result<VolterraProblem> {
    if problem.kind != Kind::First {
        return Err(Error::Validation("problem is already of the second kind".into()));
    }
    let y = &problem.rhs.samples;
    let n = y.len();
    if n < 5 {
        return Err(Error::Validation("differentiation needs at least 5 samples".into()));
    }
    let h = problem.rhs.dt;
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if i >= 2 && i + 2 < n {
            (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
        } else if i < 2 {
            let c: [f64; 5] = if i == 0 {
                [-25.0, 48.0, -36.0, 16.0, -3.0]
            } else {
                [-3.0, -10.0, 18.0, -6.0, 1.0]
            };
            c.iter().enumerate().map(|(k, ck)| ck * y[k]).sum::<f64>() / (12.0 * h)
        } else {
            let s = n - 1 - i;
            let c: [f64; 5] = if s == 0 {
                [25.0, -48.0, 36.0, -16.0, 3.0]
            } else {
                [3.0, 10.0, -18.0, 6.0, -1.0]
            };
            c.iter().enumerate().map(|(k, ck)| ck * y[n - 1 - k]).sum::<f64>() / (12.0 * h)
        };
    }
    Ok(VolterraProblem {
        rhs: TimeSeries { t0: problem.rhs.t0, dt: h, samples: d },
        kind: Kind::Second,
        ..problem.clone()
    })
}

/// Product-trapezoid marching solver for
/// `(π/2) u(t) + ∫_δ^t ∂_t k̃(t, r) u(r) dr = g(t)`. The kernel matrix
/// depends only on the time grid, so one solver serves many right-hand
/// sides.
pub struct SecondKindSolver {
    t0: f64,
    dt: f64,
    n: usize,
    /// Lower-triangular kernel rows, `rows[i][j] = ∂_t k̃(t_i, t_j)`.
    rows: Vec<Vec<f64>>,
}

/// Solution together with the largest per-step residual of the discrete
/// equations.
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub m1: TimeSeries,
    pub max_residual: f64,
}

impl SecondKindSolver {
    pub fn new(t0: f64, dt: f64, n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let ti = t0 + i as f64 * dt;
                (0..=i).map(|j| kernel_ktilde_dt(ti, t0 + j as f64 * dt)).collect()
            })
            .collect();
        Self { t0, dt, n, rows }
    }

    pub fn solve(&self, g: &[f64]) -> Result<VolterraSolution> {
        if g.len() != self.n {
            return Err(Error::Grid("right-hand side length does not match the solver grid".into()));
        }
        let h = self.dt;
        let mut u = vec![0.0; self.n];
        let mut max_res: f64 = 0.0;
        for i in 0..self.n {
            let row = &self.rows[i];
            let mut hist = 0.0;
            if i > 0 {
                hist += 0.5 * row[0] * u[0];
                for j in 1..i {
                    hist += row[j] * u[j];
                }
            }
            let diag = FRAC_PI_2 + if i > 0 { 0.5 * h * row[i] } else { 0.0 };
            u[i] = (g[i] - h * hist) / diag;
            let res = (diag * u[i] + h * hist - g[i]).abs();
            max_res = max_res.max(res / g[i].abs().max(1.0));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("volterra", "non-finite solution"));
        }
        Ok(VolterraSolution { m1: TimeSeries { t0: self.t0, dt: self.dt, samples: u }, max_residual: max_res })
    }
}

/// Solves a second-kind problem on its own grid.
pub fn solve_second_kind(problem: &VolterraProblem) -> Result<VolterraSolution> {
    if problem.kind != Kind::Second {
        return Err(Error::Validation("solve_second_kind needs a second-kind problem".into()));
    }
    SecondKindSolver::new(problem.rhs.t0, problem.rhs.dt, problem.rhs.len()).solve(&problem.rhs.samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanops::{kernel_k, pair_kernel_sine_quadrature};
    use std::f64::consts::PI;

    #[test]
    fn diagonal_and_origin() {
        for t in [0.1, 1.0, 7.5] {
            assert!((kernel_ktilde(t, t) - FRAC_PI_2).abs() < 1e-12);
            assert!((kernel_ktilde_modulus_form(t, t) - FRAC_PI_2).abs() < 1e-12);
            assert_eq!(kernel_ktilde(t, 0.0), 0.0);
            assert!(kernel_ktilde(t, 1e-9 * t) < 1e-7);
        }
        assert_eq!(kernel_ktilde(1.0, 1.5), 0.0);
        assert_eq!(kernel_ktilde(1.0, -0.1), 0.0);
    }

    #[test]
    fn forms_agree() {
        for i in 1..40 {
            let r = i as f64 / 40.0;
            let a = kernel_ktilde(1.0, r);
            let b = kernel_ktilde_modulus_form(1.0, r);
            assert!(((a - b) / a).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_defining_integral() {
        // k̃(t, r) = r k(2t, r) with k the equal-radius kernel
        let (t, r) = (2.0, 1.0);
        let direct = r * pair_kernel_sine_quadrature(r, r, 2.0 * t, 16);
        assert!(((kernel_ktilde(t, r) - direct) / direct).abs() < 1e-12);
        assert!(((kernel_ktilde(t, r) - r * kernel_k(2.0 * t, r)) / direct).abs() < 1e-13);
    }

    #[test]
    fn dt_matches_central_differences() {
        for &(t, r) in &[(1.0, 0.5), (1.0, 0.999), (1.0, 0.01), (2.0, 1.9999), (1.0, 1.0)] {
            let h = 1e-6;
            let fd = if r < t - h {
                (kernel_ktilde(t + h, r) - kernel_ktilde(t - h, r)) / (2.0 * h)
            } else {
                (kernel_ktilde(t + 2.0 * h, r) - kernel_ktilde(t + h, r)) / h
            };
            let a = kernel_ktilde_dt(t, r);
            if r < t - h {
                assert!((a - fd).abs() < 1e-7 * a.abs().max(1.0), "({t},{r}): {a} vs {fd}");
            } else {
                assert!((a - fd).abs() < 1e-4, "({t},{r}): {a} vs {fd}");
            }
        }
        assert!((kernel_ktilde_dt(2.0, 2.0) + PI / 8.0).abs() < 1e-14);
    }

    fn bump(r: f64) -> f64 {
        let (c, w) = (1.2, 0.4);
        let s = (r - c) / w;
        crate::fields::bump_profile(s * s)
    }

    fn problem(delta: f64, t_end: f64, n: usize) -> VolterraProblem {
        let dt = (t_end - delta) / n as f64;
        let times: Vec<f64> = (0..=n).map(|j| delta + j as f64 * dt).collect();
        let phi = first_kind_forward(bump, delta, &times, 40);
        VolterraProblem::new(TimeSeries::new(delta, dt, phi).unwrap(), Kind::First).unwrap()
    }

    fn sup_error(sol: &VolterraSolution) -> f64 {
        sol.m1
            .samples
            .iter()
            .enumerate()
            .map(|(i, v)| (v - bump(sol.m1.time(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_rhs() {
        let p = VolterraProblem::new(TimeSeries::new(0.2, 0.01, vec![0.0; 50]).unwrap(), Kind::Second).unwrap();
        let s = solve_second_kind(&p).unwrap();
        assert!(s.m1.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn differentiation_is_fourth_order() {
        let dt = 0.01;
        let rhs = TimeSeries::new(0.5, dt, (0..60).map(|i| (0.5 + i as f64 * dt).powi(2)).collect()).unwrap();
        let p = VolterraProblem::new(rhs, Kind::First).unwrap();
        let d = differentiate_rhs(&p).unwrap();
        for (i, v) in d.rhs.samples.iter().enumerate() {
            assert!((v - 2.0 * d.rhs.time(i)).abs() < 1e-10);
        }
        let c = VolterraProblem::new(TimeSeries::new(0.5, dt, vec![3.0; 10]).unwrap(), Kind::First).unwrap();
        assert!(differentiate_rhs(&c).unwrap().rhs.samples.iter().all(|v| v.abs() < 1e-12));
        let short = VolterraProblem::new(TimeSeries::new(0.5, dt, vec![3.0; 4]).unwrap(), Kind::First).unwrap();
        assert!(differentiate_rhs(&short).is_err());
    }

    #[test]
    fn differentiated_rhs_matches_direct_derivative() {
        let p = problem(0.3, 2.0, 800);
        let d = differentiate_rhs(&p).unwrap();
        let rule = gauss_legendre(10);
        for i in (0..d.rhs.len()).step_by(37) {
            let t = d.rhs.time(i);
            let n = ((t - 0.3) * 40.0).ceil().max(1.0) as usize;
            let h = (t - 0.3) / n as f64;
            let mut acc = FRAC_PI_2 * bump(t);
            for k in 0..n {
                let lo = 0.3 + k as f64 * h;
                for (r, w) in rule.mapped(lo, lo + h) {
                    acc += w * kernel_ktilde_dt(t, r) * bump(r);
                }
            }
            assert!((d.rhs.samples[i] - acc).abs() < 1e-6, "t={t}: {} vs {acc}", d.rhs.samples[i]);
        }
    }

    #[test]
    fn manufactured_round_trip_converges() {
        let e1 = sup_error(&solve_second_kind(&differentiate_rhs(&problem(0.3, 2.0, 500)).unwrap()).unwrap());
        let e2 = sup_error(&solve_second_kind(&differentiate_rhs(&problem(0.3, 2.0, 1000)).unwrap()).unwrap());
        assert!(e2 < 1e-3);
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "errors {e1} {e2}, order {order}");
    }

    #[test]
    fn linear_in_rhs() {
        let p = differentiate_rhs(&problem(0.3, 1.5, 200)).unwrap();
        let a = solve_second_kind(&p).unwrap();
        assert!(a.max_residual < 1e-12);
        let mut q = p.clone();
        q.rhs.samples.iter_mut().for_each(|v| *v *= -3.0);
        let b = solve_second_kind(&q).unwrap();
        for (x, y) in a.m1.samples.iter().zip(&b.m1.samples) {
            assert!((-3.0 * x - y).abs() < 1e-10);
        }
    }
}
