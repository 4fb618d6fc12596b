use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rel_l2: f64,
    pub rel_linf: f64,
}

/// Relative ℓ² and ℓ∞ errors of `recon` against `truth` on a common grid.
/// Both are 0 when both fields vanish and infinite when only `truth` does.
pub fn metrics(recon: &ScalarField, truth: &ScalarField) -> Result<Metrics> {
    if recon.grid != truth.grid {
        return Err(Error::Grid("fields live on different grids".into()));
    }
    let (mut d2, mut t2, mut dinf, mut tinf) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (a, b) in recon.values.iter().zip(&truth.values) {
        let d = a - b;
        d2 += d * d;
        t2 += b * b;
        dinf = dinf.max(d.abs());
        tinf = tinf.max(b.abs());
    }
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    Ok(Metrics { rel_l2: ratio(d2.sqrt(), t2.sqrt()), rel_linf: ratio(dinf, tinf) })
}
