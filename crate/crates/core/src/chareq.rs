//! Characteristic function of the uniform-delay equation, its leading root,
//! regime classification and the residue constants of the leading term of
//! the fundamental solution.
//!
//! The characteristic function is
//!
//! ```text
//! h_a(λ) = λ − a ∫_{-1}^0 e^{λu} du = λ − a (1 − e^{−λ}) / λ
//! ```
//!
//! and `Λ_a` is its zero set. The spectral abscissa `v0(a) = sup Re Λ_a`
//! decides the asymptotic regime of the drift parameter `a`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this modulus `(1 − e^{−λ})/λ` is evaluated from its Taylor series.
pub const SERIES_RADIUS: f64 = 1e-4;

/// Absolute tolerance for recognising the special points `0` and `−π²/2`.
pub const SPECIAL_POINT_TOL: f64 = 1e-12;

/// The critical drift `−π²/2`.
pub const A_CRITICAL: f64 = -PI * PI / 2.0;

/// `e^z − 1` without cancellation for small `|z|`.
fn expm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * c - 2.0 * half * half,
        z.re.exp() * s,
    )
}

/// `g(λ) = ∫_{-1}^0 e^{λu} du = (1 − e^{−λ}) / λ`, continuous at 0.
pub fn delay_kernel_transform(lambda: Complex64) -> Complex64 {
    if lambda.norm() < SERIES_RADIUS {
        // 1 − λ/2 + λ²/6 − λ³/24 + λ⁴/120
        let l = lambda;
        Complex64::new(1.0, 0.0) - l / 2.0 + l * l / 6.0 - l * l * l / 24.0
            + l * l * l * l / 120.0
    } else {
        -expm1(-lambda) / lambda
    }
}

fn delay_kernel_transform_deriv(lambda: Complex64) -> Complex64 {
    if lambda.norm() < 0.5 {
        // g'(λ) = Σ_{k≥1} k (−λ)^{k−1} (−1) / (k+1)!
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 2.0;
        for k in 1..20 {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            sum += pow * (sign * k as f64 / fact);
            pow *= lambda;
            fact *= (k + 2) as f64;
        }
        sum
    } else {
        let e = (-lambda).exp();
        (lambda * e + expm1(-lambda)) / (lambda * lambda)
    }
}

/// `h_a(λ)`.
pub fn eval_char(a: f64, lambda: Complex64) -> Complex64 {
    lambda - a * delay_kernel_transform(lambda)
}

/// `h_a'(λ)`.
pub fn eval_char_deriv(a: f64, lambda: Complex64) -> Complex64 {
    Complex64::new(1.0, 0.0) - a * delay_kernel_transform_deriv(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "LAN")]
    Lan,
    #[serde(rename = "LAQ_ZERO")]
    LaqZero,
    #[serde(rename = "LAQ_CRITICAL")]
    LaqCritical,
    #[serde(rename = "LAMN")]
    Lamn,
    #[serde(rename = "PLAMN")]
    Plamn,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Lan => "LAN",
            Regime::LaqZero => "LAQ_ZERO",
            Regime::LaqCritical => "LAQ_CRITICAL",
            Regime::Lamn => "LAMN",
            Regime::Plamn => "PLAMN",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "LAN" => Ok(Regime::Lan),
            "LAQ_ZERO" | "LAQ0" | "DF" => Ok(Regime::LaqZero),
            "LAQ_CRITICAL" | "CRITICAL" => Ok(Regime::LaqCritical),
            "LAMN" => Ok(Regime::Lamn),
            "PLAMN" => Ok(Regime::Plamn),
            other => Err(Error::Parse(format!("unknown regime `{other}`"))),
        }
    }
}

pub fn classify_regime(a: f64) -> Regime {
    if (a - A_CRITICAL).abs() <= SPECIAL_POINT_TOL {
        Regime::LaqCritical
    } else if a.abs() <= SPECIAL_POINT_TOL {
        Regime::LaqZero
    } else if a > 0.0 {
        Regime::Lamn
    } else if a > A_CRITICAL {
        Regime::Lan
    } else {
        Regime::Plamn
    }
}

/// Root of `h_a` with maximal real part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingRoot {
    pub v0: f64,
    pub kappa0: f64,
    pub is_real: bool,
    pub multiplicity: u32,
    pub residual: f64,
}

impl LeadingRoot {
    /// The representative `v0 + iκ0` with non-negative imaginary part.
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.v0, self.kappa0)
    }
}

/// Axis-aligned search rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchRect {
    /// Default rectangle for `a < 0`. The bottom edge sits slightly below the
    /// real axis so that real roots are interior points.
    pub fn default_for(a: f64) -> Self {
        let s = a.abs().sqrt();
        SearchRect {
            re_min: -(3.0f64.max(a.abs())),
            re_max: 1.0f64.max(std::f64::consts::SQRT_2 * s),
            im_min: -0.0371,
            im_max: (4.0 * PI).max(2.0 * s),
        }
    }

    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn quarter(&self) -> [SearchRect; 4] {
        // off-centre split keeps new edges away from symmetric root locations
        let f = 0.4873;
        let xm = self.re_min + f * self.width();
        let ym = self.im_min + f * self.height();
        [
            SearchRect { re_max: xm, im_max: ym, ..*self },
            SearchRect { re_min: xm, im_max: ym, ..*self },
            SearchRect { re_max: xm, im_min: ym, ..*self },
            SearchRect { re_min: xm, im_min: ym, ..*self },
        ]
    }
}

/// Total change of `arg f` along a closed polyline, divided by 2π.
fn winding_along<F>(f: &F, pts: &[Complex64]) -> Option<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    let vals: Vec<Complex64> = pts.iter().map(|&z| f(z)).collect();
    if vals.iter().any(|v| v.norm() < 1e-300 || !v.is_finite()) {
        return None;
    }
    let mut total = 0.0;
    for i in 0..vals.len() {
        let next = vals[(i + 1) % vals.len()];
        total += (next / vals[i]).arg();
    }
    Some(total / (2.0 * PI))
}

/// Counts zeros of `f` inside a closed contour given as a parametrisation on
/// `[0, 1)`, doubling the sampling density until the winding number is
/// within 0.25 of an integer and agrees with the previous refinement.
fn count_zeros<F, P>(f: &F, contour: P) -> Option<i64>
where
    F: Fn(Complex64) -> Complex64,
    P: Fn(f64) -> Complex64,
{
    let mut prev: Option<i64> = None;
    let mut n = 64usize;
    while n <= 1 << 16 {
        let pts: Vec<Complex64> = (0..n).map(|i| contour(i as f64 / n as f64)).collect();
        let w = winding_along(f, &pts)?;
        let r = w.round();
        if (w - r).abs() < 0.25 {
            if prev == Some(r as i64) {
                return Some(r as i64);
            }
            prev = Some(r as i64);
        } else {
            prev = None;
        }
        n *= 2;
    }
    None
}

fn rect_contour(r: SearchRect) -> impl Fn(f64) -> Complex64 {
    move |s: f64| {
        let (w, h) = (r.width(), r.height());
        let per = 2.0 * (w + h);
        let d = s * per;
        if d < w {
            Complex64::new(r.re_min + d, r.im_min)
        } else if d < w + h {
            Complex64::new(r.re_max, r.im_min + (d - w))
        } else if d < 2.0 * w + h {
            Complex64::new(r.re_max - (d - w - h), r.im_max)
        } else {
            Complex64::new(r.re_min, r.im_max - (d - 2.0 * w - h))
        }
    }
}

/// Number of roots of `h_a` inside `rect` by the argument principle.
pub fn count_roots_in(a: f64, rect: SearchRect) -> Option<i64> {
    count_zeros(&|z| eval_char(a, z), rect_contour(rect))
}

/// Number of roots of `h_a` inside the disk `|λ − center| < radius`.
pub fn count_roots_in_disk(a: f64, center: Complex64, radius: f64) -> Option<i64> {
    count_zeros(&|z| eval_char(a, z), move |s: f64| {
        center + Complex64::from_polar(radius, 2.0 * PI * s)
    })
}

const NEWTON_MAX_ITER: usize = 100;

fn newton(a: f64, start: Complex64) -> Option<Complex64> {
    let mut z = start;
    for _ in 0..NEWTON_MAX_ITER {
        let step = eval_char(a, z) / eval_char_deriv(a, z);
        if !step.is_finite() {
            return None;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * z.norm().max(1.0) {
            // one more step to settle the last bit
            let step = eval_char(a, z) / eval_char_deriv(a, z);
            if step.is_finite() && step.norm() < 1e-12 {
                z -= step;
            }
            return Some(z);
        }
    }
    let res = eval_char(a, z).norm();
    (res < 1e-12).then_some(z)
}

fn real_newton(a: f64, start: f64) -> f64 {
    let mut x = start;
    for _ in 0..NEWTON_MAX_ITER {
        let z = Complex64::new(x, 0.0);
        let step = eval_char(a, z).re / eval_char_deriv(a, z).re;
        if !step.is_finite() {
            break;
        }
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn leading_real_positive(a: f64, tol: f64) -> Result<LeadingRoot> {
    // h_a(0) = −a < 0 and h_a(√a) = √a e^{−√a} > 0
    let h = |x: f64| eval_char(a, Complex64::new(x, 0.0)).re;
    let (mut lo, mut hi) = (0.0, a.sqrt());
    while hi - lo > 1e-6 * a.sqrt().max(1e-3) {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v0 = real_newton(a, 0.5 * (lo + hi));
    let residual = h(v0).abs();
    if !(v0 > 0.0 && v0 < a.sqrt()) || residual > tol {
        return Err(Error::NoConvergence(format!(
            "real root search for a = {a} ended at {v0} with residual {residual:e}"
        )));
    }
    Ok(LeadingRoot {
        v0,
        kappa0: 0.0,
        is_real: true,
        multiplicity: 1,
        residual,
    })
}

/// Leading root of `h_a`.
///
/// For `a > 0` the leading root is real and simple and lies in `(0, √a)`; it
/// is bracketed by bisection and polished by Newton. For `a < 0` the default
/// [`SearchRect`] is searched with [`leading_root_in`].
pub fn leading_root(a: f64, tol: f64) -> Result<LeadingRoot> {
    if a == 0.0 {
        return Err(Error::UnsupportedRegime {
            a,
            what: "h_0(λ) = λ has the single root 0",
        });
    }
    if a > 0.0 {
        leading_real_positive(a, tol)
    } else {
        leading_root_in(a, tol, SearchRect::default_for(a))
    }
}

#[derive(Clone, Copy)]
struct Cell(SearchRect);

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.0.re_max == other.0.re_max
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.re_max.total_cmp(&other.0.re_max)
    }
}

/// Best-first argument-principle search for the root of maximal real part
/// inside `rect`. Cells are refined in order of their right edge; a cell
/// holding exactly one root is handed to Newton, and the search stops once
/// every remaining cell lies to the left of the best root found.
pub fn leading_root_in(a: f64, tol: f64, rect: SearchRect) -> Result<LeadingRoot> {
    use std::collections::BinaryHeap;

    let total = count_roots_in(a, rect).ok_or_else(|| {
        Error::NoConvergence(format!("winding number on the search rectangle did not settle (a = {a})"))
    })?;
    if total <= 0 {
        return Err(Error::NoConvergence(format!(
            "no roots in the search rectangle for a = {a}; widen it"
        )));
    }

    let min_size = 1e-7;
    let mut heap = BinaryHeap::new();
    heap.push((Cell(rect), total));
    let mut best: Option<Complex64> = None;
    let mut evaluated = 0usize;

    while let Some((Cell(cell), count)) = heap.pop() {
        if let Some(b) = best {
            if cell.re_max < b.re - 1e-12 {
                break;
            }
        }
        evaluated += 1;
        if evaluated > 20_000 {
            break;
        }
        if count == 1 {
            if let Some(z) = newton(a, cell.center()) {
                if cell.contains(z, 1e-9) {
                    if best.is_none_or(|b| z.re > b.re) {
                        best = Some(z);
                    }
                    continue;
                }
            }
        }
        if cell.width().max(cell.height()) < min_size {
            return Err(Error::NoConvergence(format!(
                "root isolation collapsed below {min_size:e} near {}",
                cell.center()
            )));
        }
        let children = cell.quarter();
        let mut assigned = 0;
        for (i, child) in children.iter().enumerate() {
            let c = if i == 3 {
                count - assigned
            } else {
                match count_roots_in(a, *child) {
                    Some(c) => c,
                    None => {
                        return Err(Error::NoConvergence(format!(
                            "winding number did not settle on a subcell (a = {a})"
                        )))
                    }
                }
            };
            assigned += c;
            if c > 0 {
                heap.push((Cell(*child), c));
            }
        }
    }

    let z = best.ok_or_else(|| {
        Error::NoConvergence(format!("Newton failed in every isolating cell (a = {a})"))
    })?;

    let is_real = z.im.abs() < 1e-10 * z.norm().max(1.0);
    let lambda = if is_real {
        Complex64::new(real_newton(a, z.re), 0.0)
    } else {
        Complex64::new(z.re, z.im.abs())
    };
    let residual = eval_char(a, lambda).norm();
    if residual > tol {
        return Err(Error::NoConvergence(format!(
            "leading root {lambda} has residual {residual:e} > {tol:e}"
        )));
    }

    // isolate: exactly one root in a small disk around the returned point
    let mut radius = 1e-3;
    let mut isolated = false;
    while radius >= 1e-8 {
        if count_roots_in_disk(a, lambda, radius) == Some(1) {
            isolated = true;
            break;
        }
        radius /= 10.0;
    }
    if !isolated {
        return Err(Error::NoConvergence(format!(
            "could not isolate the leading root {lambda} in a disk"
        )));
    }

    Ok(LeadingRoot {
        v0: lambda.re,
        kappa0: lambda.im,
        is_real,
        multiplicity: 1,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidueKind {
    RealRoot { psi_real: f64 },
    ComplexPair { a0: f64, b0: f64 },
}

/// Coefficients of the leading term `ψ0,a(t) e^{v0 t}` of the fundamental
/// solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueData {
    #[serde(flatten)]
    pub kind: ResidueKind,
    pub v0: f64,
    pub kappa0: f64,
}

impl ResidueData {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.v0, self.kappa0)
    }

    /// Complex amplitude `c` with `ψ0,a(t) = Re(c e^{iκ0 t})`.
    pub fn amplitude(&self) -> Complex64 {
        match self.kind {
            ResidueKind::RealRoot { psi_real } => Complex64::new(psi_real, 0.0),
            ResidueKind::ComplexPair { a0, b0 } => Complex64::new(a0, -b0),
        }
    }

    /// `ψ0,a(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        match self.kind {
            ResidueKind::RealRoot { psi_real } => psi_real,
            ResidueKind::ComplexPair { a0, b0 } => {
                let (s, c) = (self.kappa0 * t).sin_cos();
                a0 * c + b0 * s
            }
        }
    }

    /// Amplitude of the leading term of the delay average
    /// `∫_{-1}^0 x0,a(t+u) du ≈ Re(c̃ e^{iκ0 t}) e^{v0 t}`.
    ///
    /// On `Λ_a`, `∫_{-1}^0 e^{λu} du = λ/a`, so `c̃ = c λ / a`.
    pub fn averaged_amplitude(&self, a: f64) -> Complex64 {
        self.amplitude() * self.lambda() / a
    }
}

/// Closed-form residue constants at the leading root.
///
/// The residue of `e^{λt}/h_a(λ)` at a simple root is `λ/(λ² + 2λ − a)`; the
/// real root contributes it once, a conjugate pair twice its real part.
pub fn residue_constants(a: f64) -> Result<ResidueData> {
    residue_constants_with_tol(a, 1e-12)
}

pub fn residue_constants_with_tol(a: f64, tol: f64) -> Result<ResidueData> {
    match classify_regime(a) {
        Regime::Lan | Regime::LaqZero => Err(Error::UnsupportedRegime {
            a,
            what: "residue constants are defined for a > 0 or a ≤ −π²/2",
        }),
        Regime::Lamn => {
            let r = leading_root(a, tol)?;
            let v = r.v0;
            Ok(ResidueData {
                kind: ResidueKind::RealRoot {
                    psi_real: v / (v * v + 2.0 * v - a),
                },
                v0: v,
                kappa0: 0.0,
            })
        }
        Regime::LaqCritical | Regime::Plamn => {
            let r = leading_root(a, tol)?;
            let (v, k) = (r.v0, r.kappa0);
            let p = v * v - k * k + 2.0 * v - a;
            let den = p * p + 4.0 * k * k * (v + 1.0) * (v + 1.0);
            let a0 = 2.0 * ((v * v + k * k) * (v + 2.0) - a * v) / den;
            let b0 = 2.0 * (v * v + k * k + a) * k / den;
            Ok(ResidueData {
                kind: ResidueKind::ComplexPair { a0, b0 },
                v0: v,
                kappa0: k,
            })
        }
    }
}

/// Local scaling rate `r_{a,T}`.
pub fn scaling(a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {t}")));
    }
    match classify_regime(a) {
        Regime::Lan => Ok(1.0 / t.sqrt()),
        Regime::LaqZero | Regime::LaqCritical => Ok(1.0 / t),
        Regime::Lamn | Regime::Plamn => {
            let r = leading_root(a, 1e-10)?;
            Ok((-r.v0 * t).exp())
        }
    }
}
