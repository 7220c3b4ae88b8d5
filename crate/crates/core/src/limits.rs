//! Samplers for the limit laws of the scaled estimator error
//! `r_{a,T}^{-1}(â_T − a)` in the five regimes.
//!
//! Draw `j` of every sampler uses the substream `rng::substream(seed, j)`, so
//! samples are reproducible and independent of the number of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chareq::{classify_regime, residue_constants, Regime};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::simul::InitialSegment;

/// Relative size of the exponential weight at which Wiener integrals over
/// `[0, ∞)` are cut off.
pub const TAIL_CUTOFF: f64 = 1e-8;

/// Smallest grid allowed for the Wiener-functional samplers.
pub const MIN_WIENER_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LimitMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<String>,
    /// Grid size of the Wiener functional or of the tail quadrature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub regime: Regime,
    pub values: Vec<f64>,
    pub n: usize,
    pub meta: LimitMeta,
}

/// One draw `Z/√J` of a mixed normal law, kept in factored form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedNormalDraw {
    pub z: f64,
    pub j: f64,
}

impl MixedNormalDraw {
    pub fn value(&self) -> f64 {
        self.z / self.j.sqrt()
    }
}

fn draws<F>(n: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|j| f(&mut rng::substream(seed, j)))
        .collect()
}

fn check_m(m: usize) -> Result<()> {
    if m < MIN_WIENER_STEPS {
        return Err(Error::InvalidGrid(format!(
            "Wiener functionals need at least {MIN_WIENER_STEPS} steps, got {m}"
        )));
    }
    Ok(())
}

/// `N(0, 1/J_a)`.
pub fn sample_lan_limit(j_a: f64, n: usize, seed: u64) -> Result<LimitSample> {
    if !(j_a > 0.0) || !j_a.is_finite() {
        return Err(Error::NonpositiveInformation(j_a));
    }
    let sd = 1.0 / j_a.sqrt();
    Ok(LimitSample {
        regime: Regime::Lan,
        values: draws(n, seed, |r| sd * rng::std_normal(r)),
        n,
        meta: LimitMeta { seed, ..Default::default() },
    })
}

fn brownian_increments(r: &mut Stream, m: usize) -> Vec<f64> {
    let mut dw = vec![0.0; m];
    rng::fill_normal(r, 1.0 / m as f64, &mut dw);
    dw
}

/// Left-point Itô sum `Σ W_j ΔW_j` and trapezoid `∫ W² dt` of the walk
/// `W_0 = 0, W_{j+1} = W_j + ΔW_j` on `[0, 1]`.
fn ito_and_energy(dw: &[f64]) -> (f64, f64, Vec<f64>) {
    let m = dw.len();
    let mut w = Vec::with_capacity(m + 1);
    w.push(0.0);
    let mut ito = 0.0;
    for (j, d) in dw.iter().enumerate() {
        ito += w[j] * d;
        w.push(w[j] + d);
    }
    let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
    let energy = crate::grid::trapezoid(&sq, 1.0 / m as f64);
    (ito, energy, w)
}

/// `Σ W_j ΔW_j / ∫_0^1 W²` for the walk with increments `dw` on `[0, 1]`.
pub fn df_functional(dw: &[f64]) -> f64 {
    let (ito, energy, _) = ito_and_energy(dw);
    ito / energy
}

/// The critical-point functional of a planar walk:
/// `[16π A − 4π² (Σ W₁ΔW₁ + Σ W₂ΔW₂)] / [16 ∫(W₁² + W₂²)]`, with the Lévy area
/// sum `A = Σ (W₁ΔW₂ − W₂ΔW₁)`.
pub fn critical_functional(dw1: &[f64], dw2: &[f64]) -> f64 {
    let (ito1, e1, w1) = ito_and_energy(dw1);
    let (ito2, e2, w2) = ito_and_energy(dw2);
    let area: f64 = (0..dw1.len()).map(|j| w1[j] * dw2[j] - w2[j] * dw1[j]).sum();
    (16.0 * PI * area - 4.0 * PI * PI * (ito1 + ito2)) / (16.0 * (e1 + e2))
}

pub fn sample_df_limit(n: usize, m: usize, seed: u64) -> Result<LimitSample> {
    check_m(m)?;
    Ok(LimitSample {
        regime: Regime::LaqZero,
        values: draws(n, seed, |r| df_functional(&brownian_increments(r, m))),
        n,
        meta: LimitMeta { a: Some(0.0), m: Some(m), seed, ..Default::default() },
    })
}

pub fn sample_critical_limit(n: usize, m: usize, seed: u64) -> Result<LimitSample> {
    check_m(m)?;
    Ok(LimitSample {
        regime: Regime::LaqCritical,
        values: draws(n, seed, |r| {
            let dw1 = brownian_increments(r, m);
            let dw2 = brownian_increments(r, m);
            critical_functional(&dw1, &dw2)
        }),
        n,
        meta: LimitMeta {
            a: Some(-PI * PI / 2.0),
            m: Some(m),
            seed,
            ..Default::default()
        },
    })
}

/// `X0(0) + a ∫_{-1}^0 ∫_u^0 e^{λ(u−s)} X0(s) ds du`, reduced by Fubini to
/// `X0(0) + (a/λ) ∫_{-1}^0 X0(s)(1 − e^{−λ(s+1)}) ds`.
pub fn initial_weight(a: f64, lambda: Complex64, x0: &InitialSegment) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let integral = match x0 {
        InitialSegment::Constant(c) => {
            *c * (one - crate::chareq::delay_kernel_transform(lambda))
        }
        InitialSegment::Sampled(v) => {
            let m = v.len() - 1;
            let ds = 1.0 / m as f64;
            let f = |i: usize| {
                let s1 = i as f64 * ds; // s + 1
                v[i] * (one - (-lambda * s1).exp())
            };
            let inner: Complex64 = (1..m).map(f).sum();
            ds * (inner + 0.5 * (f(0) + f(m)))
        }
    };
    x0.at_zero() + a / lambda * integral
}

/// Left-point quadrature of `∫_0^S e^{−λs} dW(s)` on `m_tail` cells.
fn tail_integral(r: &mut Stream, lambda: Complex64, s_max: f64, m_tail: usize) -> Complex64 {
    let ds = s_max / m_tail as f64;
    let sd = ds.sqrt();
    let step = (-lambda * ds).exp();
    let mut weight = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m_tail {
        if j % 256 == 0 {
            // refresh the recursive weight to avoid drift
            weight = (-lambda * (j as f64 * ds)).exp();
        }
        acc += weight * (sd * rng::std_normal(r));
        weight *= step;
    }
    acc
}

fn truncation_horizon(v0: f64) -> f64 {
    -TAIL_CUTOFF.ln() / v0
}

/// Ingredients of the LAMN limit at `a > 0`.
#[derive(Debug, Clone)]
pub struct GrowthLimit {
    pub a: f64,
    pub v0: f64,
    pub deterministic: f64,
    pub m_tail: usize,
    s_max: f64,
    info_factor: f64,
}

impl GrowthLimit {
    pub fn new(a: f64, x0: &InitialSegment, m_tail: usize) -> Result<Self> {
        if classify_regime(a) != Regime::Lamn {
            return Err(Error::UnsupportedRegime { a, what: "the LAMN limit needs a > 0" });
        }
        if m_tail == 0 {
            return Err(Error::InvalidGrid("m_tail must be positive".into()));
        }
        let v0 = residue_constants(a)?.v0;
        let lam = Complex64::new(v0, 0.0);
        let p = v0 * v0 + 2.0 * v0 - a;
        let g = -(-v0).exp_m1();
        Ok(GrowthLimit {
            a,
            v0,
            deterministic: initial_weight(a, lam, x0).re,
            m_tail,
            s_max: truncation_horizon(v0),
            info_factor: g * g / (2.0 * v0 * p * p),
        })
    }

    /// `U = X0(0) + a∫∫ e^{v0(u−s)} X0(s) ds du + ∫_0^∞ e^{−v0 s} dW(s)`.
    pub fn draw_u(&self, r: &mut Stream) -> f64 {
        self.deterministic
            + tail_integral(r, Complex64::new(self.v0, 0.0), self.s_max, self.m_tail).re
    }

    pub fn information(&self, u: f64) -> f64 {
        self.info_factor * u * u
    }

    pub fn draw(&self, r: &mut Stream) -> MixedNormalDraw {
        let u = self.draw_u(r);
        let z = rng::std_normal(r);
        MixedNormalDraw { z, j: self.information(u) }
    }
}

pub fn lamn_draws(
    a: f64,
    x0: &InitialSegment,
    n: usize,
    m_tail: usize,
    seed: u64,
) -> Result<Vec<MixedNormalDraw>> {
    let lim = GrowthLimit::new(a, x0, m_tail)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|j| lim.draw(&mut rng::substream(seed, j)))
        .collect())
}

pub fn sample_lamn_limit(
    a: f64,
    x0: &InitialSegment,
    n: usize,
    m_tail: usize,
    seed: u64,
) -> Result<LimitSample> {
    let values = lamn_draws(a, x0, n, m_tail, seed)?
        .iter()
        .map(MixedNormalDraw::value)
        .collect();
    Ok(LimitSample {
        regime: Regime::Lamn,
        values,
        n,
        meta: LimitMeta {
            a: Some(a),
            x0: Some(x0.describe()),
            m: Some(m_tail),
            seed,
            ..Default::default()
        },
    })
}

/// Ingredients of the periodic mixed normal limit at `a < −π²/2`.
///
/// The limiting Gaussian process is `V(t) = Re(c̃ e^{iκ0 t} Ξ)` with the
/// complex amplitude `Ξ = initial_weight(a, λ0, X0) + ∫_0^∞ e^{−λ0 s} dW(s)`
/// and `c̃` the leading coefficient of the delay-averaged fundamental
/// solution. The information at phase `d` is
/// `J(d) = ∫_0^∞ e^{−2 v0 s} V(d − s)² ds`.
#[derive(Debug, Clone)]
pub struct OscillatoryLimit {
    pub a: f64,
    pub lambda: Complex64,
    pub amplitude: Complex64,
    pub deterministic: Complex64,
    pub m_tail: usize,
    s_max: f64,
}

impl OscillatoryLimit {
    pub fn new(a: f64, x0: &InitialSegment, m_tail: usize) -> Result<Self> {
        if classify_regime(a) != Regime::Plamn {
            return Err(Error::UnsupportedRegime { a, what: "the PLAMN limit needs a < -π²/2" });
        }
        if m_tail == 0 {
            return Err(Error::InvalidGrid("m_tail must be positive".into()));
        }
        let res = residue_constants(a)?;
        let lambda = res.lambda();
        Ok(OscillatoryLimit {
            a,
            lambda,
            amplitude: res.averaged_amplitude(a),
            deterministic: initial_weight(a, lambda, x0),
            m_tail,
            s_max: truncation_horizon(lambda.re),
        })
    }

    /// Half period `π/κ0`, the period of `J(d)` in `d`.
    pub fn half_period(&self) -> f64 {
        PI / self.lambda.im
    }

    pub fn draw_amplitude(&self, r: &mut Stream) -> Complex64 {
        self.deterministic + tail_integral(r, self.lambda, self.s_max, self.m_tail)
    }

    /// `V(t)` for a given amplitude `Ξ`.
    pub fn v(&self, t: f64, xi: Complex64) -> f64 {
        (self.amplitude * xi * Complex64::from_polar(1.0, self.lambda.im * t)).re
    }

    /// `J(d)` by the trapezoid rule on the tail grid.
    pub fn information(&self, d: f64, xi: Complex64) -> f64 {
        let ds = self.s_max / self.m_tail as f64;
        let v0 = self.lambda.re;
        let f = |j: usize| {
            let s = j as f64 * ds;
            let v = self.v(d - s, xi);
            (-2.0 * v0 * s).exp() * v * v
        };
        let inner: f64 = (1..self.m_tail).map(f).sum();
        ds * (inner + 0.5 * (f(0) + f(self.m_tail)))
    }

    pub fn draw(&self, d: f64, r: &mut Stream) -> MixedNormalDraw {
        let xi = self.draw_amplitude(r);
        let z = rng::std_normal(r);
        MixedNormalDraw { z, j: self.information(d, xi) }
    }

    fn check_phase(&self, d: f64) -> Result<()> {
        let period = self.half_period();
        if !(0.0..period).contains(&d) {
            return Err(Error::InvalidPhase { d, period });
        }
        Ok(())
    }
}

pub fn plamn_draws(
    a: f64,
    x0: &InitialSegment,
    d: f64,
    n: usize,
    m_tail: usize,
    seed: u64,
) -> Result<Vec<MixedNormalDraw>> {
    let lim = OscillatoryLimit::new(a, x0, m_tail)?;
    lim.check_phase(d)?;
    Ok((0..n as u64)
        .into_par_iter()
        .map(|j| lim.draw(d, &mut rng::substream(seed, j)))
        .collect())
}

pub fn sample_plamn_limit(
    a: f64,
    x0: &InitialSegment,
    d: f64,
    n: usize,
    m_tail: usize,
    seed: u64,
) -> Result<LimitSample> {
    let values = plamn_draws(a, x0, d, n, m_tail, seed)?
        .iter()
        .map(MixedNormalDraw::value)
        .collect();
    Ok(LimitSample {
        regime: Regime::Plamn,
        values,
        n,
        meta: LimitMeta {
            a: Some(a),
            d: Some(d),
            x0: Some(x0.describe()),
            m: Some(m_tail),
            seed,
        },
    })
}
