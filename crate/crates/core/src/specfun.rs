//! Special functions needed by the scattering kernels: the complete elliptic
//! integrals, Bessel/Neumann/Hankel functions of order zero and the ramp
//! `(t - a)^+`.
//!
//! Elliptic integrals use the modulus convention
//!
//! ```text
//! K(α) = ∫₀^{π/2} dφ / √(1 − α² sin²φ)
//! ```
//!
//! and are evaluated with the arithmetic-geometric mean.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex sample values (Hankel functions, spectra).
pub type ComplexValue = Complex64;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Arguments with |z| below this use the ascending series, above it the
/// Hankel asymptotic expansion.
const BESSEL_SERIES_LIMIT: f64 = 12.0;

/// Arithmetic-geometric mean of two nonnegative numbers.
pub fn agm(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 4.0 * f64::EPSILON * an {
            return 0.5 * (an + bn);
        }
        a = an;
        b = bn;
    }
    a
}

fn check_modulus(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "complete elliptic integral requires |alpha| < 1, got {alpha}"
        )));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind.
pub fn complete_elliptic_k(alpha: f64) -> Result<f64> {
    check_modulus(alpha)?;
    if alpha == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let comp = ((1.0 - alpha) * (1.0 + alpha)).sqrt();
    Ok(PI / (2.0 * agm(1.0, comp)))
}

/// Complete elliptic integral of the second kind,
/// `E(α) = ∫₀^{π/2} √(1 − α² sin²φ) dφ`.
pub fn complete_elliptic_e(alpha: f64) -> Result<f64> {
    check_modulus(alpha)?;
    if alpha == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let mut a = 1.0;
    let mut b = ((1.0 - alpha) * (1.0 + alpha)).sqrt();
    let mut c = alpha;
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
    }
    Ok(PI / (2.0 * a) * (1.0 - sum))
}

/// Coefficients `((2n-1)!! / (2n)!!)^2` of the Maclaurin series of `K`.
fn k_series_coefficient(n: usize) -> f64 {
    let mut c = 1.0;
    for j in 1..=n {
        let r = (2 * j - 1) as f64 / (2 * j) as f64;
        c *= r * r;
    }
    c
}

/// `dK/dα`. For small moduli the differentiated Maclaurin series is used to
/// avoid the cancellation in `E/(α α'²) − K/α`.
pub fn elliptic_k_derivative(alpha: f64) -> Result<f64> {
    check_modulus(alpha)?;
    let x = alpha.abs();
    let sign = alpha.signum();
    if x < 0.25 {
        let x2 = x * x;
        let mut c = 1.0;
        let mut pow = x; // x^{2n-1}
        let mut sum = 0.0;
        for n in 1..60 {
            let r = (2 * n - 1) as f64 / (2 * n) as f64;
            c *= r * r;
            let term = 2.0 * n as f64 * c * pow;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pow *= x2;
        }
        return Ok(sign * FRAC_PI_2 * sum);
    }
    let k = complete_elliptic_k(x)?;
    let e = complete_elliptic_e(x)?;
    let comp2 = (1.0 - x) * (1.0 + x);
    Ok(sign * (e / (x * comp2) - k / x))
}

/// Maclaurin series of `K` truncated at `terms`; used by tests and as a
/// cross-check near the origin.
pub fn elliptic_k_series(alpha: f64, terms: usize) -> f64 {
    let a2 = alpha * alpha;
    let mut pow = 1.0;
    let mut sum = 0.0;
    for n in 0..terms {
        sum += k_series_coefficient(n) * pow;
        pow *= a2;
    }
    FRAC_PI_2 * sum
}

/// Which order-zero cylinder function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Cylinder {
    J0,
    Y0,
    H0_1,
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for l in 1..200 {
        term *= -q / (l * l) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && l > 2 {
            break;
        }
    }
    sum
}

/// Y0 for x > 0 by the ascending series
/// `Y0 = (2/π)[ln(x/2) + γ] J0 + (2/π) Σ_{k≥1} (−1)^{k+1} H_k (x²/4)^k / (k!)²`.
fn y0_series(x: f64, j0: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0; // (x²/4)^k / (k!)²
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        harmonic += 1.0 / k as f64;
        let t = if k % 2 == 1 { term * harmonic } else { -term * harmonic };
        sum += t;
        if t.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
    }
    2.0 / PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + sum)
}

/// Hankel asymptotic expansion, returns (J0, Y0) for x ≥ 12.
fn bessel_asymptotic(x: f64) -> (f64, f64) {
    // a_k(0) = a_{k-1}(0) · (−(2k−1)²) / (8k)
    let mut a = 1.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut xpow = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..80 {
        if k > 0 {
            let kf = k as f64;
            a *= -(2.0 * kf - 1.0).powi(2) / (8.0 * kf);
            xpow *= x;
        }
        let term = a / xpow;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // P = Σ (−1)^m a_{2m}/x^{2m}, Q = Σ (−1)^m a_{2m+1}/x^{2m+1}
        let m = k / 2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let w = x - FRAC_PI_4;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = w.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// Bessel function J0 for real arguments.
pub fn bessel_j0(z: f64) -> f64 {
    let x = z.abs();
    if x <= BESSEL_SERIES_LIMIT {
        j0_series(x)
    } else {
        bessel_asymptotic(x).0
    }
}

/// (J0(x), Y0(x)) for x > 0.
fn bessel_pair_positive(x: f64) -> (f64, f64) {
    if x <= BESSEL_SERIES_LIMIT {
        let j = j0_series(x);
        (j, y0_series(x, j))
    } else {
        bessel_asymptotic(x)
    }
}

/// Order-zero cylinder functions of a real argument.
///
/// Negative arguments follow the principal branch of `ln` continued from the
/// upper half-plane, so `Y0(−x) = Y0(x) + 2i J0(x)` and
/// `H0⁽¹⁾(−x) = −conj(H0⁽¹⁾(x))`; equivalently the radiating fundamental
/// solution `(i/4) H0⁽¹⁾` is conjugate symmetric.
pub fn hankel0(z: f64, which: Cylinder) -> Result<ComplexValue> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    if which == Cylinder::J0 {
        return Ok(Complex64::new(bessel_j0(z), 0.0));
    }
    if z == 0.0 {
        return Err(Error::Domain(
            "Y0 and H0 have a logarithmic singularity at 0".to_string(),
        ));
    }
    let (j, y) = bessel_pair_positive(z.abs());
    let y = if z > 0.0 {
        Complex64::new(y, 0.0)
    } else {
        Complex64::new(y, 2.0 * j)
    };
    Ok(match which {
        Cylinder::J0 => unreachable!(),
        Cylinder::Y0 => y,
        Cylinder::H0_1 => Complex64::new(j, 0.0) + Complex64::i() * y,
    })
}

/// Hankel function H0⁽¹⁾ for x > 0 without the domain checks; used in the
/// frequency-domain kernels.
#[inline]
pub fn hankel1_0_positive(x: f64) -> Complex64 {
    let (j, y) = bessel_pair_positive(x);
    Complex64::new(j, y)
}

/// `(t − a)⁺ = (t − a) H(t − a)`.
#[inline]
pub fn ramp_plus(t: f64, a: f64) -> f64 {
    if t > a {
        t - a
    } else {
        0.0
    }
}
