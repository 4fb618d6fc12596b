use super::TimeSeries;
use crate::error::{Error, Result};

/// `m`-fold cumulative trapezoid integral from `t0` with zero initial values.
pub fn time_antiderivative(series: &TimeSeries, order: usize) -> Result<TimeSeries> {
    if order < 1 {
        return Err(Error::Validation("antiderivative order must be at least 1".into()));
    }
    let mut cur = series.samples.clone();
    let h = 0.5 * series.dt;
    for _ in 0..order {
        let mut acc = 0.0;
        let mut next = Vec::with_capacity(cur.len());
        next.push(0.0);
        for w in cur.windows(2) {
            acc += h * (w[0] + w[1]);
            next.push(acc);
        }
        next.truncate(cur.len());
        cur = next;
    }
    Ok(TimeSeries { t0: series.t0, dt: series.dt, samples: cur })
}

/// Second-order finite-difference derivative (central inside, one-sided at
/// the ends), applied `order` times.
pub fn time_derivative(series: &TimeSeries, order: usize) -> Result<TimeSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Grid("need at least three samples to differentiate".into()));
    }
    let mut cur = series.samples.clone();
    let inv = 0.5 / series.dt;
    for _ in 0..order {
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * cur[0] + 4.0 * cur[1] - cur[2]) * inv;
        d[n - 1] = (3.0 * cur[n - 1] - 4.0 * cur[n - 2] + cur[n - 3]) * inv;
        for i in 1..n - 1 {
            d[i] = (cur[i + 1] - cur[i - 1]) * inv;
        }
        cur = d;
    }
    Ok(TimeSeries { t0: series.t0, dt: series.dt, samples: cur })
}
