//! Fundamental solution `x0,a` of the deterministic delay equation
//!
//! ```text
//! x'(t) = a ∫_{-1}^0 x(t+u) du,   x(0) = 1,   x = 0 on [-1, 0),
//! ```
//!
//! its delay average `y(t) = ∫_{-1}^0 x(t+u) du` and the Fisher limit
//! `J_a = ∫_0^∞ y(t)² dt`.
//!
//! The equation is integrated as the system `x' = a z`, `z' = x(t) − x(t−1)`
//! with `z(0) = 0` (so `z = y`), by classical RK4. The history term at
//! half-steps is linearly interpolated. On the first unit interval the
//! history is the left limit 0, including at the step ending on `t = 1`.

use crate::chareq::{classify_regime, residue_constants, Regime};
use crate::error::{Error, Result};
use crate::grid;

#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub a: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Steps per unit interval.
    pub m: usize,
    /// `x[i] = x0,a((i − m) dt)` for `i = 0..=m+n`.
    pub x: Vec<f64>,
    /// `y[k] = y(k dt)` for `k = 0..=n`.
    pub y: Vec<f64>,
    /// Exponential rate fitted to the envelope of `|x|` over the second half
    /// of the horizon.
    pub decay_estimate: f64,
}

impl FundamentalSolution {
    /// Number of steps on `[0, t_max]`.
    pub fn n(&self) -> usize {
        self.y.len() - 1
    }

    /// `x0,a(k dt)` for `k ≥ 0`.
    pub fn x_at(&self, k: usize) -> f64 {
        self.x[self.m + k]
    }

    /// Values on `[0, t_max]`.
    pub fn x_nonneg(&self) -> &[f64] {
        &self.x[self.m..]
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

pub fn fundamental_solution(a: f64, t_max: f64, dt: f64) -> Result<FundamentalSolution> {
    let m = grid::unit_steps(dt)?;
    let n = grid::steps(t_max, dt)?;
    if n < m {
        return Err(Error::InvalidGrid(format!("t_max = {t_max} must be at least 1")));
    }

    let mut x = vec![0.0; m + n + 1];
    x[m] = 1.0;
    let mut z = 0.0;
    let f = |xv: f64, zv: f64, h: f64| (a * zv, xv - h);
    for k in 0..n {
        let (h0, h1, h2) = if k < m {
            (0.0, 0.0, 0.0)
        } else {
            (x[k], 0.5 * (x[k] + x[k + 1]), x[k + 1])
        };
        let xk = x[m + k];
        let k1 = f(xk, z, h0);
        let k2 = f(xk + 0.5 * dt * k1.0, z + 0.5 * dt * k1.1, h1);
        let k3 = f(xk + 0.5 * dt * k2.0, z + 0.5 * dt * k2.1, h1);
        let k4 = f(xk + dt * k3.0, z + dt * k3.1, h2);
        x[m + k + 1] = xk + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        z += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }

    let y = window_average(&x[m..], m, dt);
    let decay_estimate = envelope_rate(&x[m..], m, dt);
    Ok(FundamentalSolution {
        a,
        dt,
        t_max,
        m,
        x,
        y,
        decay_estimate,
    })
}

/// Trapezoid over `[max(0, t−1), t]` of samples starting at `t = 0`.
fn window_average(xs: &[f64], m: usize, dt: f64) -> Vec<f64> {
    let c = grid::cumulative_trapezoid(xs, dt);
    (0..c.len())
        .map(|k| if k < m { c[k] } else { c[k] - c[k - m] })
        .collect()
}

fn envelope_rate(xs: &[f64], m: usize, dt: f64) -> f64 {
    let n = xs.len() - 1;
    if n < 2 * m {
        return 0.0;
    }
    let peak = |end: usize| xs[end - m..=end].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let (k1, k2) = (n / 2, n);
    let (p1, p2) = (peak(k1), peak(k2));
    if p1 <= 0.0 || p2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (p2.ln() - p1.ln()) / ((k2 - k1) as f64 * dt)
}

/// Delay average recomputed from `fs.x`; agrees with `fs.y`.
pub fn delay_average(fs: &FundamentalSolution) -> Vec<f64> {
    window_average(fs.x_nonneg(), fs.m, fs.dt)
}

/// Fisher limit together with the truncation horizon and step that achieved
/// the requested tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherLimit {
    pub j: f64,
    pub t_max: f64,
    pub dt: f64,
}

const FISHER_T_START: f64 = 20.0;
const FISHER_T_LIMIT: f64 = 640.0;
const FISHER_DT_START: f64 = 1e-2;
const FISHER_MAX_HALVINGS: usize = 10;

fn fisher_at_step(a: f64, rel_tol: f64, dt: f64) -> Result<(f64, f64)> {
    let mut t = FISHER_T_START;
    let mut prev: Option<f64> = None;
    while t <= FISHER_T_LIMIT {
        let fs = fundamental_solution(a, t, dt)?;
        let sq: Vec<f64> = fs.y.iter().map(|v| v * v).collect();
        let j = grid::trapezoid(&sq, dt);
        if let Some(p) = prev {
            if (j - p).abs() <= rel_tol * j {
                return Ok((j, t));
            }
        }
        prev = Some(j);
        t *= 2.0;
    }
    Err(Error::NoConvergence(format!(
        "∫ y² did not stabilise before t_max = {FISHER_T_LIMIT} (a = {a})"
    )))
}

pub fn fisher_limit_detail(a: f64, rel_tol: f64) -> Result<FisherLimit> {
    if classify_regime(a) != Regime::Lan {
        return Err(Error::UnsupportedRegime {
            a,
            what: "the Fisher limit is finite only for -π²/2 < a < 0",
        });
    }
    let mut dt = FISHER_DT_START;
    let (mut prev, _) = fisher_at_step(a, rel_tol, dt)?;
    for _ in 0..FISHER_MAX_HALVINGS {
        dt /= 2.0;
        let (j, t_max) = fisher_at_step(a, rel_tol, dt)?;
        if (j - prev).abs() <= rel_tol * j {
            return Ok(FisherLimit { j, t_max, dt });
        }
        prev = j;
    }
    Err(Error::NoConvergence(format!(
        "quadrature of J_a did not stabilise down to dt = {dt} (a = {a})"
    )))
}

/// `J_a = ∫_0^∞ y(t)² dt` for `a` in the LAN range.
pub fn fisher_limit(a: f64, rel_tol: f64) -> Result<f64> {
    fisher_limit_detail(a, rel_tol).map(|f| f.j)
}

/// Leading term `ψ0,a(t) e^{v0 t}` of the fundamental solution.
pub fn asymptotic_form(a: f64, t: f64) -> Result<f64> {
    let r = residue_constants(a)?;
    Ok(r.psi(t) * (r.v0 * t).exp())
}
