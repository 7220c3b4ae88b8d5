//! Uniform-grid helpers shared by the solvers and estimators.

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Number of steps of size `dt` covering `len`, which must be a whole
/// multiple of `dt`.
pub fn steps(len: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidGrid(format!("step must be positive, got {dt}")));
    }
    if !(len >= 0.0) || !len.is_finite() {
        return Err(Error::InvalidGrid(format!("length must be nonnegative, got {len}")));
    }
    let n = (len / dt).round();
    if (n * dt - len).abs() > ALIGN_TOL * len.max(1.0) {
        return Err(Error::InvalidGrid(format!("dt = {dt} does not divide {len}")));
    }
    Ok(n as usize)
}

/// `m = 1/dt`, the number of steps per unit delay window.
pub fn unit_steps(dt: f64) -> Result<usize> {
    let m = steps(1.0, dt)?;
    if m == 0 {
        return Err(Error::InvalidGrid(format!("dt = {dt} exceeds the unit delay")));
    }
    Ok(m)
}

/// Trapezoid rule on equally spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Running trapezoid integral: `out[k] = ∫_0^{k dt}`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * dt * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}
