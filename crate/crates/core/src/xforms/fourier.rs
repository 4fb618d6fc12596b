use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Uniformly sampled real signal `samples[n] = f(t0 + n dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::Grid(format!("invalid time grid t0={t0}, dt={dt}")));
        }
        Ok(Self { t0, dt, samples })
    }

    /// Builds a series from explicit sample times, which must be uniform.
    pub fn from_times(times: &[f64], samples: Vec<f64>) -> Result<Self> {
        if times.len() != samples.len() || times.len() < 2 {
            return Err(Error::Grid("need at least two matching times and samples".into()));
        }
        let dt = times[1] - times[0];
        let tol = 1e-9 * dt.abs().max(times[times.len() - 1].abs());
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > tol {
                return Err(Error::Grid("time grid is not uniform".into()));
            }
        }
        Self::new(times[0], dt, samples)
    }

    pub fn zeros(t0: f64, dt: f64, n: usize) -> Self {
        Self { t0, dt, samples: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    /// Linear interpolation, zero outside the sampled range.
    pub fn interp(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.dt;
        if !(s >= 0.0) || s > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (s.floor() as usize).min(self.len().saturating_sub(2));
        let f = s - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }
}

/// Complex spectrum `samples[m] = F(k0 + m dk)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub k0: f64,
    pub dk: f64,
    pub samples: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        self.k0 + m as f64 * self.dk
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub enum Transformed {
    Spectrum(Spectrum),
    Series(TimeSeries),
}

/// Padded length: a power of two at least twice the input length.
fn padded_len(n: usize) -> usize {
    (2 * n).next_power_of_two().max(2)
}

/// `F f(k) = ∫ f(t) e^{ikt} dt` by the rectangle rule on a zero-padded
/// grid. The returned spectrum is ordered by increasing `k` and covers
/// `[-π/dt, π/dt)`.
pub fn fourier_forward(series: &TimeSeries) -> Result<Spectrum> {
    if series.is_empty() {
        return Err(Error::Grid("empty series".into()));
    }
    let n = padded_len(series.len());
    let dt = series.dt;
    let dk = 2.0 * PI / (n as f64 * dt);
    let half = n / 2;
    let k0 = -(half as f64) * dk;
    let mut buf: Vec<Complex64> = series
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    // Σ_n f_n e^{+2πi mn/N}
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let samples = (0..n)
        .map(|m| {
            let k = k0 + m as f64 * dk;
            let idx = (m + half) % n;
            buf[idx] * Complex64::from_polar(dt, k * series.t0)
        })
        .collect();
    Ok(Spectrum { k0, dk, samples })
}

/// `f(t) = (1/2π) ∫ F(k) e^{-ikt} dk` sampled at `t0 + n·2π/(N dk)`,
/// `n = 0..N`. The real part is returned.
pub fn fourier_inverse(spec: &Spectrum, t0: f64) -> Result<TimeSeries> {
    let (re, _) = fourier_inverse_complex(spec, t0)?;
    Ok(re)
}

/// As [`fourier_inverse`], returning real and imaginary parts.
pub fn fourier_inverse_complex(spec: &Spectrum, t0: f64) -> Result<(TimeSeries, TimeSeries)> {
    if spec.is_empty() || !(spec.dk > 0.0) {
        return Err(Error::Grid("invalid spectrum grid".into()));
    }
    let n = spec.len();
    let dt = 2.0 * PI / (n as f64 * spec.dk);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|m| spec.samples[m] * Complex64::from_polar(1.0, -(m as f64) * spec.dk * t0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = spec.dk / (2.0 * PI);
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for (j, b) in buf.iter().enumerate() {
        let t = t0 + j as f64 * dt;
        let v = b * Complex64::from_polar(scale, -spec.k0 * t);
        re.push(v.re);
        im.push(v.im);
    }
    Ok((
        TimeSeries { t0, dt, samples: re },
        TimeSeries { t0, dt, samples: im },
    ))
}

/// Direction-dispatching wrapper; the inverse starts at `t = 0`.
pub fn fourier(input: Transformed, direction: Direction) -> Result<Transformed> {
    match (input, direction) {
        (Transformed::Series(s), Direction::Forward) => fourier_forward(&s).map(Transformed::Spectrum),
        (Transformed::Spectrum(s), Direction::Inverse) => fourier_inverse(&s, 0.0).map(Transformed::Series),
        _ => Err(Error::Validation("input kind does not match transform direction".into())),
    }
}

/// Transform of `H(t−a)/(2π√(t²−a²))` at wavenumber `k > 0`, by quadrature in
/// `t = a cosh s` with a smooth cutoff of the tail.
pub fn sqrt_pulse_transform(a: f64, k: f64) -> Complex64 {
    let t_end = 400.0 / k.max(0.05) + 10.0 * a;
    let t_taper = 0.5 * t_end;
    let s_end = (t_end / a).acosh();
    let period = 2.0 * PI / k;
    // panels sized to the local oscillation period in s (dt/ds = a sinh s)
    let mut acc = Complex64::new(0.0, 0.0);
    let mut s = 0.0;
    while s < s_end {
        let local = period / (a * s.sinh()).max(a * 1e-3);
        let ds = local.min(0.05).min(s_end - s).max(1e-12);
        acc += quad::gauss_legendre(12).mapped(s, s + ds).fold(Complex64::new(0.0, 0.0), |acc, (x, w)| {
            let t = a * x.cosh();
            let win = if t <= t_taper {
                1.0
            } else {
                let u = (t - t_taper) / (t_end - t_taper);
                (0.5 * PI * u).cos().powi(2)
            };
            acc + Complex64::from_polar(w * win, k * t)
        });
        s += ds;
    }
    acc / (2.0 * PI)
}
