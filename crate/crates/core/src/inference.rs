//! Maximum likelihood estimation of `a` and the local likelihood quantities.
//!
//! All sums are taken against the drift integrand `G_k` of the path's
//! [`DriftRule`]: the numerator is the left-point sum `Σ G_k (x_{k+1} − x_k)`
//! and the information is `D = Σ G_k² dt`. With these conventions the
//! discrete log-likelihood ratio of the Gaussian chain is exactly quadratic
//! in the parameter, so the estimator and likelihood identities hold to
//! rounding.

use serde::{Deserialize, Serialize};

use crate::chareq::scaling;
use crate::error::{Error, Result};
use crate::simul::{DelayWindow, DriftRule, SamplePath};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub a_hat: f64,
    /// `Σ G_k (x_{k+1} − x_k)`.
    pub numerator: f64,
    /// `Σ G_k² dt`.
    pub denominator: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub rule: DriftRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalQuadratic {
    pub a_ref: f64,
    pub r: f64,
    pub delta: f64,
    pub j: f64,
    pub h: f64,
    pub loglik: f64,
}

/// Trapezoid delay average `Q_k` over `[t_k − 1, t_k]` for `k = 0..=n`.
pub fn delay_integral(path: &SamplePath) -> Vec<f64> {
    let n = path.n();
    let mut win = DelayWindow::new(&path.x, path.m, path.dt);
    let mut q = Vec::with_capacity(n + 1);
    for k in 0..=n {
        q.push(win.q(&path.x));
        if k < n {
            win.advance(&path.x);
        }
    }
    q
}

/// Drift integrand `G_k`, `k = 0..n`, bitwise equal to the values used when
/// the path was simulated under the same rule.
pub fn drift_integrand(path: &SamplePath) -> Vec<f64> {
    let n = path.n();
    let mut win = DelayWindow::new(&path.x, path.m, path.dt);
    let mut g = Vec::with_capacity(n);
    for k in 0..n {
        g.push(win.drift(&path.x, path.rule));
        if k + 1 < n {
            win.advance(&path.x);
        }
    }
    g
}

struct Sums {
    /// `Σ G dX`
    gdx: f64,
    /// `Σ G² dt`
    ggdt: f64,
}

fn sums(path: &SamplePath, g: &[f64]) -> Sums {
    let m = path.m;
    let mut gdx = 0.0;
    let mut gg = 0.0;
    for (k, gk) in g.iter().enumerate() {
        gdx += gk * (path.x[m + k + 1] - path.x[m + k]);
        gg += gk * gk;
    }
    Sums {
        gdx,
        ggdt: gg * path.dt,
    }
}

fn noise_sum(g: &[f64], dw: &[f64]) -> f64 {
    g.iter().zip(dw).map(|(a, b)| a * b).sum()
}

/// `â_T = Σ G dX / Σ G² dt`.
pub fn mle(path: &SamplePath) -> Result<EstimateResult> {
    let g = drift_integrand(path);
    let s = sums(path, &g);
    if !(s.ggdt > 0.0) {
        return Err(Error::DegenerateDenominator(s.ggdt));
    }
    Ok(EstimateResult {
        a_hat: s.gdx / s.ggdt,
        numerator: s.gdx,
        denominator: s.ggdt,
        t_end: path.t_end,
        dt: path.dt,
        rule: path.rule,
    })
}

/// `Δ = r Σ G dW`, `J = r² Σ G² dt` at `a_ref`, with `r = r_{a_ref,T}`.
pub fn local_quadratic(path: &SamplePath, a_ref: f64, h: f64) -> Result<LocalQuadratic> {
    let dw = path.increments()?;
    let r = scaling(a_ref, path.t_end)?;
    let g = drift_integrand(path);
    let s = sums(path, &g);
    let delta = r * noise_sum(&g, dw);
    let j = r * r * s.ggdt;
    Ok(LocalQuadratic {
        a_ref,
        r,
        delta,
        j,
        h,
        loglik: h * delta - h * h * j / 2.0,
    })
}

/// `log dP_ã/dP_a` from the observed path:
/// `(ã − a) Σ G dX − ((ã² − a²)/2) Σ G² dt`.
pub fn loglik_ratio(path: &SamplePath, a: f64, a_tilde: f64) -> f64 {
    let g = drift_integrand(path);
    let s = sums(path, &g);
    (a_tilde - a) * s.gdx - 0.5 * (a_tilde * a_tilde - a * a) * s.ggdt
}

/// The same ratio written through the driving noise of a path simulated
/// under `a`: `(ã − a) Σ G dW − ((ã − a)²/2) Σ G² dt`.
pub fn loglik_ratio_noise_form(path: &SamplePath, a: f64, a_tilde: f64) -> Result<f64> {
    let dw = path.increments()?;
    let g = drift_integrand(path);
    let s = sums(path, &g);
    let d = a_tilde - a;
    Ok(d * noise_sum(&g, dw) - 0.5 * d * d * s.ggdt)
}
