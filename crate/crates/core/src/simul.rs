//! Sample paths of `dX(t) = a ∫_{-1}^0 X(t+u) du dt + dW(t)` and the
//! convolution processes used to probe the asymptotics of the estimator.
//!
//! Paths live on the grid `t_i = (i − m) dt`, `i = 0..=m+n`, with `m = 1/dt`
//! and `n = T/dt`. Step `k` advances `x[m+k]` to `x[m+k+1]` with
//!
//! ```text
//! x_{k+1} = x_k + a G_k dt + dw_k,
//! ```
//!
//! where `Q_k` is the trapezoid average of `x` over `[t_k − 1, t_k]` and
//! `G_k` is the drift integrand selected by [`DriftRule`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InitialSegment {
    Constant(f64),
    /// Values on the uniform grid over `[-1, 0]`, endpoints included.
    Sampled(Vec<f64>),
}

impl InitialSegment {
    pub fn at_zero(&self) -> f64 {
        match self {
            InitialSegment::Constant(c) => *c,
            InitialSegment::Sampled(v) => *v.last().expect("sampled segment is empty"),
        }
    }

    /// Piecewise-linear value at `s ∈ [-1, 0]`.
    pub fn value_at(&self, s: f64) -> f64 {
        match self {
            InitialSegment::Constant(c) => *c,
            InitialSegment::Sampled(v) => {
                let m = v.len() - 1;
                if m == 0 {
                    return v[0];
                }
                let pos = ((s + 1.0) * m as f64).clamp(0.0, m as f64);
                let i = (pos.floor() as usize).min(m - 1);
                let w = pos - i as f64;
                (1.0 - w) * v[i] + w * v[i + 1]
            }
        }
    }

    /// The `m + 1` grid values on `[-1, 0]`.
    pub fn samples(&self, m: usize) -> Result<Vec<f64>> {
        match self {
            InitialSegment::Constant(c) => Ok(vec![*c; m + 1]),
            InitialSegment::Sampled(v) if v.len() == m + 1 => Ok(v.clone()),
            InitialSegment::Sampled(v) => Err(Error::InvalidGrid(format!(
                "initial segment has {} samples, grid needs {}",
                v.len(),
                m + 1
            ))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InitialSegment::Constant(c) => format!("constant({c})"),
            InitialSegment::Sampled(v) => format!("sampled({} points)", v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub a: f64,
    pub x0: InitialSegment,
}

impl DelayModel {
    pub fn new(a: f64, x0: InitialSegment) -> Self {
        DelayModel { a, x0 }
    }
}

/// How the drift over `[t_k, t_{k+1}]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftRule {
    /// `G_k = Q_k + (dt/2)(x(t_k) − x(t_k − 1))`: the delay average carried
    /// forward to the midpoint of the step with its exact derivative.
    #[default]
    HalfStep,
    /// `G_k = Q_k`.
    LeftPoint,
}

impl fmt::Display for DriftRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftRule::HalfStep => "half-step",
            DriftRule::LeftPoint => "left-point",
        })
    }
}

impl FromStr for DriftRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "half-step" | "halfstep" => Ok(DriftRule::HalfStep),
            "left-point" | "leftpoint" | "euler" => Ok(DriftRule::LeftPoint),
            other => Err(Error::Parse(format!("unknown drift rule `{other}`"))),
        }
    }
}

/// Running trapezoid over the trailing unit window. The sum is rebuilt from
/// scratch every `m` steps to keep rounding drift bounded. Simulation and
/// estimation both walk a path with this type, so their `Q_k` agree bitwise.
#[derive(Debug, Clone)]
pub(crate) struct DelayWindow {
    m: usize,
    dt: f64,
    k: usize,
    sum: f64,
}

impl DelayWindow {
    pub(crate) fn new(x: &[f64], m: usize, dt: f64) -> Self {
        DelayWindow {
            m,
            dt,
            k: 0,
            sum: x[..=m].iter().sum(),
        }
    }

    /// `Q_k` for the current step.
    #[inline]
    pub(crate) fn q(&self, x: &[f64]) -> f64 {
        self.dt * (self.sum - 0.5 * (x[self.k] + x[self.k + self.m]))
    }

    #[inline]
    pub(crate) fn drift(&self, x: &[f64], rule: DriftRule) -> f64 {
        let q = self.q(x);
        match rule {
            DriftRule::LeftPoint => q,
            DriftRule::HalfStep => q + 0.5 * self.dt * (x[self.k + self.m] - x[self.k]),
        }
    }

    /// Moves to step `k + 1`; `x[k + 1 + m]` must already be set.
    #[inline]
    pub(crate) fn advance(&mut self, x: &[f64]) {
        self.k += 1;
        let k = self.k;
        if k.is_multiple_of(self.m) {
            self.sum = x[k..=k + self.m].iter().sum();
        } else {
            self.sum += x[k + self.m] - x[k - 1];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    /// Generating model; `None` for externally supplied paths.
    pub model: Option<DelayModel>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub m: usize,
    /// Values on `[-1, T]`, `m + n + 1` of them.
    pub x: Vec<f64>,
    /// Brownian increments over `[0, T]`, `n` of them.
    pub dw: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub rule: DriftRule,
}

impl SamplePath {
    /// Wraps observed values on `[-1, T]`.
    pub fn observed(dt: f64, x: Vec<f64>, dw: Option<Vec<f64>>, rule: DriftRule) -> Result<Self> {
        let m = grid::unit_steps(dt)?;
        if x.len() < m + 2 {
            return Err(Error::InvalidGrid(format!(
                "path with {} points does not extend past t = 0 at dt = {dt}",
                x.len()
            )));
        }
        let n = x.len() - m - 1;
        if let Some(d) = &dw {
            if d.len() != n {
                return Err(Error::InvalidGrid(format!(
                    "{} increments for {n} steps",
                    d.len()
                )));
            }
        }
        Ok(SamplePath {
            model: None,
            dt,
            t_end: n as f64 * dt,
            m,
            x,
            dw,
            seed: None,
            rule,
        })
    }

    /// Number of steps on `[0, T]`.
    pub fn n(&self) -> usize {
        self.x.len() - self.m - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.m as f64) * self.dt
    }

    /// `X(k dt)` for `k ≥ 0`.
    pub fn x_at(&self, k: usize) -> f64 {
        self.x[self.m + k]
    }

    pub fn increments(&self) -> Result<&[f64]> {
        self.dw.as_deref().ok_or(Error::MissingIncrements)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub seed: u64,
    pub rule: DriftRule,
    pub zero_noise: bool,
}

impl SimOptions {
    pub fn seeded(seed: u64) -> Self {
        SimOptions {
            seed,
            rule: DriftRule::default(),
            zero_noise: false,
        }
    }
}

pub fn simulate_path(model: &DelayModel, t_end: f64, dt: f64, seed: u64) -> Result<SamplePath> {
    simulate_path_with(model, t_end, dt, SimOptions::seeded(seed))
}

pub fn simulate_path_with(
    model: &DelayModel,
    t_end: f64,
    dt: f64,
    opts: SimOptions,
) -> Result<SamplePath> {
    let m = grid::unit_steps(dt)?;
    let n = grid::steps(t_end, dt)?;
    if n < m {
        return Err(Error::InvalidGrid(format!("horizon T = {t_end} must be at least 1")));
    }

    let mut dw = vec![0.0; n];
    if !opts.zero_noise {
        let mut rng = rng::stream(opts.seed);
        rng::fill_normal(&mut rng, dt, &mut dw);
    }

    let mut x = Vec::with_capacity(m + n + 1);
    x.extend(model.x0.samples(m)?);
    x.resize(m + n + 1, 0.0);

    let a = model.a;
    let mut win = DelayWindow::new(&x, m, dt);
    for k in 0..n {
        let g = win.drift(&x, opts.rule);
        x[m + k + 1] = x[m + k] + a * g * dt + dw[k];
        win.advance(&x);
    }

    Ok(SamplePath {
        model: Some(model.clone()),
        dt,
        t_end: n as f64 * dt,
        m,
        x,
        dw: Some(dw),
        seed: (!opts.zero_noise).then_some(opts.seed),
        rule: opts.rule,
    })
}

/// A deterministic function `y` sampled on `[0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Kernel {
    pub fn new(dt: f64, values: Vec<f64>) -> Self {
        Kernel { dt, values }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, t_max: f64, dt: f64) -> Result<Self> {
        let n = grid::steps(t_max, dt)?;
        Ok(Kernel {
            dt,
            values: (0..=n).map(|k| f(k as f64 * dt)).collect(),
        })
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

fn kernel_index(kernel: &Kernel, t: f64) -> Result<usize> {
    if t < 1.0 - 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "convolution processes are evaluated for t ≥ 1, got {t}"
        )));
    }
    let k = grid::steps(t, kernel.dt)?;
    if k >= kernel.values.len() {
        return Err(Error::KernelTooShort {
            needed: t,
            available: kernel.t_max(),
        });
    }
    Ok(k)
}

/// `Z(t) = ∫_{-1}^0 ∫_u^0 y(t+u−s) X0(s) ds du` for `t ≥ 1`, evaluated in the
/// exchanged form `∫_{-1}^0 X0(s) ∫_{t−s−1}^t y(v) dv ds`.
pub fn initial_term(kernel: &Kernel, x0: &InitialSegment, t_grid: &[f64]) -> Result<Vec<f64>> {
    let m = grid::unit_steps(kernel.dt)?;
    let seg = x0.samples(m)?;
    let c = grid::cumulative_trapezoid(&kernel.values, kernel.dt);
    let mut f = vec![0.0; m + 1];
    t_grid
        .iter()
        .map(|&t| {
            let k = kernel_index(kernel, t)?;
            // s_i = (i − m) dt, so t − s_i − 1 sits at index k − i
            for (i, fi) in f.iter_mut().enumerate() {
                *fi = seg[i] * (c[k] - c[k - i]);
            }
            Ok(grid::trapezoid(&f, kernel.dt))
        })
        .collect()
}

/// `Y(t) = y(t) X0(0) + a Z(t) + Σ_{j<k} y(t − s_j) dw_j` at `t = k dt ≥ 1`.
pub fn y_process(
    kernel: &Kernel,
    model: &DelayModel,
    dw: &[f64],
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    let z = initial_term(kernel, &model.x0, t_grid)?;
    let x00 = model.x0.at_zero();
    t_grid
        .iter()
        .zip(z)
        .map(|(&t, zt)| {
            let k = kernel_index(kernel, t)?;
            if dw.len() < k {
                return Err(Error::InvalidGrid(format!(
                    "{} increments do not reach t = {t}",
                    dw.len()
                )));
            }
            let noise: f64 = dw[..k]
                .iter()
                .enumerate()
                .map(|(j, d)| kernel.values[k - j] * d)
                .sum();
            Ok(kernel.values[k] * x00 + model.a * zt + noise)
        })
        .collect()
}
