//! Oracles and lemma checks shared by several test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use sdde::grid;
use sdde::rng;
use sdde::simul::{initial_term, y_process, DelayModel, InitialSegment, Kernel};

/// `∫_0^{t_max} y²` for the fundamental solution by Heun on
/// `x' = a z, z' = x(t) − x(t−1)`, history read straight off the grid.
pub fn heun_fisher(a: f64, dt: f64, t_max: f64) -> f64 {
    let m = (1.0 / dt).round() as usize;
    let n = (t_max / dt).round() as usize;
    let mut x = vec![0.0; n + 1];
    x[0] = 1.0;
    let hist = |x: &[f64], k: usize| if k < m { 0.0 } else { x[k - m] };
    let mut z = 0.0;
    let mut acc = 0.0;
    for k in 0..n {
        let (fx, fz) = (a * z, x[k] - hist(&x, k));
        let (xp, zp) = (x[k] + dt * fx, z + dt * fz);
        // left limit of the history on the step ending at t = 1
        let h1 = if k < m { 0.0 } else { x[k + 1 - m] };
        let (gx, gz) = (a * zp, xp - h1);
        x[k + 1] = x[k] + 0.5 * dt * (fx + gx);
        let z_next = z + 0.5 * dt * (fz + gz);
        acc += 0.5 * dt * (z * z + z_next * z_next);
        z = z_next;
    }
    acc
}

pub fn random_kernel(rng: &mut rng::Stream, t_max: f64, dt: f64) -> Kernel {
    let p: Vec<f64> = (0..9).map(|_| rng::std_normal(rng)).collect();
    Kernel::from_fn(
        move |t| {
            p[0] * (-(p[1].abs() + 0.05) * t).exp() * (p[2] * 3.0 * t).cos()
                + p[3] * (-(p[4].abs() + 0.05) * t).exp()
                + p[5] * (p[6] * t).sin() / (1.0 + t)
                + 0.2 * p[7] * (p[8] * 5.0 * t).cos()
        },
        t_max,
        dt,
    )
    .unwrap()
}

pub fn random_segment(rng: &mut rng::Stream, m: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(m + 1);
    let mut acc = rng::std_normal(rng);
    for _ in 0..=m {
        v.push(acc);
        acc += 0.3 * rng::std_normal(rng);
    }
    v
}

fn squares(v: &[f64]) -> Vec<f64> {
    v.iter().map(|u| u * u).collect()
}

/// `(lhs, bound)` of `∫ Z² ≤ ∫ X0² · ∫ y²` for 100 random kernels and segments.
pub fn cauchy_schwarz_cases() -> Vec<(f64, f64)> {
    let mut r = rng::stream(2024);
    let dt = 0.02;
    let t_end = 50.0;
    let m = 50;
    (0..100)
        .map(|_| {
            let kernel = random_kernel(&mut r, t_end, dt);
            let seg = random_segment(&mut r, m);
            let ts: Vec<f64> = (m..=(t_end / dt) as usize).map(|k| k as f64 * dt).collect();
            let z = initial_term(&kernel, &InitialSegment::Sampled(seg.clone()), &ts).unwrap();
            let lhs = grid::trapezoid(&squares(&z), dt);
            let bound = grid::trapezoid(&squares(&seg), dt)
                * grid::trapezoid(&squares(&kernel.values), dt);
            (lhs, bound)
        })
        .collect()
}

/// Sample variance of `e^{−wt} Y(t)` for the kernel `e^{ws}` against
/// `(1 − e^{−2wt})/(2w)`, plus the largest gap to the direct Wiener sum.
pub fn exponential_kernel_variance() -> (f64, f64, f64) {
    let w = 1.0;
    let dt = 0.01;
    let t = 3.0;
    let kernel = Kernel::from_fn(|s| (w * s).exp(), t, dt).unwrap();
    let model = DelayModel::new(-2.0, InitialSegment::Constant(0.0));
    let n = (t / dt).round() as usize;
    let seeds = 2000;
    let mut vals = Vec::with_capacity(seeds);
    let mut worst = 0.0f64;
    for s in 0..seeds {
        let mut r = rng::substream(31, s as u64);
        let mut dw = vec![0.0; n];
        rng::fill_normal(&mut r, dt, &mut dw);
        let y = y_process(&kernel, &model, &dw, &[t]).unwrap()[0];
        let scaled = (-w * t).exp() * y;
        let direct: f64 = dw.iter().enumerate().map(|(j, d)| (-w * j as f64 * dt).exp() * d).sum();
        worst = worst.max((scaled - direct).abs());
        vals.push(scaled);
    }
    let mean = vals.iter().sum::<f64>() / seeds as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
    let expect = (1.0 - (-2.0 * w * t).exp()) / (2.0 * w);
    (var, expect, worst)
}

/// Largest `|e^{−wt} Y(t) − V_w(t)|` at `t = 30` over 100 seeds for the
/// kernel `cos(πs) e^{ws}`.
pub fn oscillating_kernel_gap() -> f64 {
    let (w, kappa, a) = (0.5, PI, -1.0);
    let dt = 0.01;
    let t = 30.0;
    let phi = |s: f64| (kappa * s).cos();
    let x0 = InitialSegment::Constant(1.0);
    let model = DelayModel::new(a, x0.clone());
    let kernel = Kernel::from_fn(|s| phi(s) * (w * s).exp(), t, dt).unwrap();
    let k = (t / dt).round() as usize;
    // truncate the Wiener integral where e^{−ws} < 1e−8
    let s_max = (1e8f64).ln() / w;
    let n_tail = (s_max / dt).ceil() as usize;
    // deterministic part of V_w by nested trapezoid
    let m = 100;
    let outer: Vec<f64> = (0..=m)
        .map(|iu| {
            let u = (iu as f64 - m as f64) * dt;
            let inner: Vec<f64> = (iu..=m)
                .map(|is| {
                    let s = (is as f64 - m as f64) * dt;
                    phi(t + u - s) * (w * (u - s)).exp() * x0.value_at(s)
                })
                .collect();
            grid::trapezoid(&inner, dt)
        })
        .collect();
    let det = x0.at_zero() * phi(t) + a * grid::trapezoid(&outer, dt);
    let mut worst = 0.0f64;
    for s in 0..100u64 {
        let mut r = rng::substream(4242, s);
        let mut dw = vec![0.0; n_tail.max(k)];
        rng::fill_normal(&mut r, dt, &mut dw);
        let y = y_process(&kernel, &model, &dw, &[t]).unwrap()[0];
        let v: f64 = det
            + dw.iter()
                .enumerate()
                .map(|(j, d)| {
                    let sj = j as f64 * dt;
                    phi(t - sj) * (-w * sj).exp() * d
                })
                .sum::<f64>();
        worst = worst.max(((-w * t).exp() * y - v).abs());
    }
    worst
}
