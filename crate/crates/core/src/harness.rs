//! Monte Carlo experiments comparing the scaled estimator error with draws
//! from the matching limit law.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chareq::{classify_regime, leading_root, scaling, Regime, A_CRITICAL};
use crate::error::{Error, Result};
use crate::fundsol::fisher_limit;
use crate::grid;
use crate::inference::{local_quadratic, mle};
use crate::limits::{
    sample_critical_limit, sample_df_limit, sample_lamn_limit, sample_lan_limit,
    sample_plamn_limit, LimitSample,
};
use crate::rng;
use crate::simul::{simulate_path_with, DelayModel, DriftRule, InitialSegment, SimOptions};

/// Asymptotic two-sample KS critical value at level 0.01.
pub const KS_C_001: f64 = 1.628;

pub const DEFAULT_M_WIENER: usize = 10_000;
pub const DEFAULT_M_TAIL: usize = 20_000;
pub const FISHER_REL_TOL: f64 = 1e-8;
const MIN_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum InitialConfig {
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawInitial {
    kind: String,
    #[serde(default)]
    value: Option<f64>,
}

impl InitialConfig {
    pub fn segment(&self) -> InitialSegment {
        match self {
            InitialConfig::Zero => InitialSegment::Constant(0.0),
            InitialConfig::Constant(c) => InitialSegment::Constant(*c),
        }
    }
}

/// On-disk schema: flat keys `a, T, dt, n_reps, n_limit, seed, x0.kind,
/// x0.value, d, k, out`, plus optional `rule`, `m_wiener`, `m_tail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: f64,
    #[serde(rename = "T")]
    t_end: Option<f64>,
    dt: f64,
    n_reps: usize,
    n_limit: usize,
    seed: u64,
    x0: Option<RawInitial>,
    d: Option<f64>,
    k: Option<u32>,
    out: Option<PathBuf>,
    rule: Option<String>,
    m_wiener: Option<usize>,
    m_tail: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub a: f64,
    /// Horizon. For PLAMN it is derived from `k` and `d`.
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub n_reps: usize,
    pub n_limit: usize,
    pub seed: u64,
    pub x0: InitialConfig,
    pub d: Option<f64>,
    pub k: Option<u32>,
    pub out: Option<PathBuf>,
    pub rule: DriftRule,
    pub m_wiener: usize,
    pub m_tail: usize,
}

impl ExperimentConfig {
    /// A configuration with a fixed horizon and the default knobs.
    pub fn new(a: f64, t_end: f64, dt: f64, n_reps: usize, n_limit: usize, seed: u64) -> Self {
        ExperimentConfig {
            a,
            t_end,
            dt,
            n_reps,
            n_limit,
            seed,
            x0: InitialConfig::Zero,
            d: None,
            k: None,
            out: None,
            rule: DriftRule::default(),
            m_wiener: DEFAULT_M_WIENER,
            m_tail: DEFAULT_M_TAIL,
        }
    }

    /// PLAMN configuration with horizon `k π/κ0 + d` rounded to the grid.
    pub fn periodic(
        a: f64,
        k: u32,
        d: f64,
        dt: f64,
        n_reps: usize,
        n_limit: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut cfg = ExperimentConfig::new(a, 0.0, dt, n_reps, n_limit, seed);
        cfg.k = Some(k);
        cfg.d = Some(d);
        cfg.t_end = periodic_horizon(a, k, d, dt)?;
        Ok(cfg)
    }

    pub fn with_x0(mut self, x0: InitialConfig) -> Self {
        self.x0 = x0;
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let x0 = match raw.x0 {
            None => InitialConfig::Zero,
            Some(r) => match (r.kind.as_str(), r.value) {
                ("zero", _) => InitialConfig::Zero,
                ("constant", Some(v)) => InitialConfig::Constant(v),
                ("constant", None) => {
                    return Err(Error::InvalidConfig("x0.kind = constant needs x0.value".into()))
                }
                (other, _) => {
                    return Err(Error::InvalidConfig(format!("unknown x0.kind `{other}`")))
                }
            },
        };
        let rule = match raw.rule {
            Some(r) => r.parse()?,
            None => DriftRule::default(),
        };
        let a = snap_special(raw.a);
        let t_end = match (classify_regime(a), raw.t_end, raw.k) {
            (Regime::Plamn, None, Some(k)) => {
                periodic_horizon(a, k, raw.d.unwrap_or(0.0), raw.dt)?
            }
            (Regime::Plamn, Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("give either T or k for PLAMN, not both".into()))
            }
            (Regime::Plamn, None, None) => {
                return Err(Error::InvalidConfig("PLAMN experiments need k".into()))
            }
            (_, Some(t), _) => t,
            (_, None, _) => return Err(Error::InvalidConfig("missing T".into())),
        };
        let cfg = ExperimentConfig {
            a,
            t_end,
            dt: raw.dt,
            n_reps: raw.n_reps,
            n_limit: raw.n_limit,
            seed: raw.seed,
            x0,
            d: raw.d,
            k: raw.k,
            out: raw.out,
            rule,
            m_wiener: raw.m_wiener.unwrap_or(DEFAULT_M_WIENER),
            m_tail: raw.m_tail.unwrap_or(DEFAULT_M_TAIL),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self.a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < MIN_COUNT || self.n_limit < MIN_COUNT {
            return Err(Error::InvalidConfig(format!(
                "n_reps and n_limit must be at least {MIN_COUNT}"
            )));
        }
        grid::unit_steps(self.dt)?;
        let n = grid::steps(self.t_end, self.dt)?;
        if (n as f64) * self.dt < 1.0 {
            return Err(Error::InvalidConfig("T must be at least 1".into()));
        }
        if self.regime() == Regime::Plamn && self.d.is_none() && self.k.is_none() {
            return Err(Error::InvalidConfig("PLAMN experiments need a phase d".into()));
        }
        Ok(())
    }
}

fn snap_special(a: f64) -> f64 {
    match classify_regime(a) {
        Regime::LaqCritical => A_CRITICAL,
        Regime::LaqZero => 0.0,
        _ => a,
    }
}

/// `k π/κ0 + d`, rounded to the nearest grid point.
pub fn periodic_horizon(a: f64, k: u32, d: f64, dt: f64) -> Result<f64> {
    if classify_regime(a) != Regime::Plamn {
        return Err(Error::UnsupportedRegime { a, what: "periodic horizons need a < -π²/2" });
    }
    let kappa = leading_root(a, 1e-10)?.kappa0;
    let period = std::f64::consts::PI / kappa;
    if !(0.0..period).contains(&d) {
        return Err(Error::InvalidPhase { d, period });
    }
    let t = k as f64 * period + d;
    Ok((t / dt).round() * dt)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(s1: &[f64], s2: &[f64]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySample);
    }
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(s1), sorted(s2));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// `c(0.01) √((n+m)/(nm))`.
pub fn ks_threshold(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_001 * ((n + m) / (n * m)).sqrt()
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const REPORT_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Quartile skewness `(q75 + q25 − 2 q50)/(q75 − q25)`.
    pub bowley_skew: f64,
    pub quantiles: BTreeMap<String, f64>,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&sorted, p);
        let iqr = q(0.75) - q(0.25);
        let bowley_skew = if iqr > 0.0 {
            (q(0.75) + q(0.25) - 2.0 * q(0.5)) / iqr
        } else {
            0.0
        };
        let quantiles = REPORT_LEVELS
            .iter()
            .map(|&p| (format!("q{:02}", (p * 100.0).round() as u32), q(p)))
            .collect();
        Ok(SampleSummary {
            n,
            mean,
            variance,
            bowley_skew,
            quantiles,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub a_hat: f64,
    pub scaled_error: f64,
    /// `Δ_{a,T}` at the true parameter.
    pub delta: f64,
    /// `J_{a,T}` at the true parameter.
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub scaling: f64,
    /// Fisher limit used by the LAN sampler.
    pub j_a: Option<f64>,
    pub n_failed: usize,
    pub replications: Vec<Replication>,
    pub scaled_errors: Vec<f64>,
    pub limit_values: Vec<f64>,
    pub ks: f64,
    pub ks_threshold: f64,
    pub errors_summary: SampleSummary,
    pub limit_summary: SampleSummary,
    pub wall_clock_seconds: f64,
}

impl MCReport {
    pub fn passes(&self) -> bool {
        self.ks <= self.ks_threshold
    }

    /// Mean and standard error of `exp(hΔ − h²J/2)` over the replications.
    pub fn likelihood_mean(&self, h: f64) -> (f64, f64) {
        let v: Vec<f64> = self
            .replications
            .iter()
            .map(|r| (h * r.delta - 0.5 * h * h * r.j).exp())
            .collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    pub fn write_replications_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["replication", "a_hat", "scaled_error"]).map_err(csv_err)?;
        for r in &self.replications {
            w.write_record([
                r.index.to_string(),
                format!("{:e}", r.a_hat),
                format!("{:e}", r.scaled_error),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Draws from the limit law that matches `cfg`.
pub fn limit_sample(cfg: &ExperimentConfig, j_a: Option<f64>) -> Result<LimitSample> {
    let seed = rng::mix(cfg.seed, rng::LIMIT_TAG);
    let x0 = cfg.x0.segment();
    match cfg.regime() {
        Regime::Lan => {
            let j = match j_a {
                Some(j) => j,
                None => fisher_limit(cfg.a, FISHER_REL_TOL)?,
            };
            sample_lan_limit(j, cfg.n_limit, seed)
        }
        Regime::LaqZero => sample_df_limit(cfg.n_limit, cfg.m_wiener, seed),
        Regime::LaqCritical => sample_critical_limit(cfg.n_limit, cfg.m_wiener, seed),
        Regime::Lamn => sample_lamn_limit(cfg.a, &x0, cfg.n_limit, cfg.m_tail, seed),
        Regime::Plamn => {
            let d = cfg.d.unwrap_or(0.0);
            sample_plamn_limit(cfg.a, &x0, d, cfg.n_limit, cfg.m_tail, seed)
        }
    }
}

fn replicate(cfg: &ExperimentConfig, model: &DelayModel, r: f64, i: usize) -> Result<Replication> {
    let opts = SimOptions {
        seed: rng::mix(cfg.seed, i as u64),
        rule: cfg.rule,
        zero_noise: false,
    };
    let path = simulate_path_with(model, cfg.t_end, cfg.dt, opts)?;
    let est = mle(&path)?;
    let lq = local_quadratic(&path, cfg.a, 0.0)?;
    Ok(Replication {
        index: i,
        a_hat: est.a_hat,
        scaled_error: (est.a_hat - cfg.a) / r,
        delta: lq.delta,
        j: lq.j,
    })
}

/// Runs `cfg` on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MCReport> {
    run_experiment_jobs(cfg, None)
}

/// Runs `cfg` on `jobs` worker threads (all cores when `None`). The report
/// does not depend on the thread count.
pub fn run_experiment_jobs(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<MCReport> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<MCReport> {
    let start = Instant::now();
    let regime = cfg.regime();
    let r = scaling(cfg.a, cfg.t_end)?;
    let j_a = match regime {
        Regime::Lan => Some(fisher_limit(cfg.a, FISHER_REL_TOL)?),
        _ => None,
    };
    let model = DelayModel::new(cfg.a, cfg.x0.segment());

    let outcomes: Vec<Result<Replication>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|i| replicate(cfg, &model, r, i))
        .collect();
    let mut replications = Vec::with_capacity(cfg.n_reps);
    let mut n_failed = 0;
    for o in outcomes {
        match o {
            Ok(rep) => replications.push(rep),
            Err(Error::DegenerateDenominator(_)) => n_failed += 1,
            Err(e) => return Err(e),
        }
    }
    if replications.is_empty() {
        return Err(Error::EmptySample);
    }

    let limit = limit_sample(cfg, j_a)?;
    let scaled_errors: Vec<f64> = replications.iter().map(|r| r.scaled_error).collect();
    let ks = ks_distance(&scaled_errors, &limit.values)?;
    Ok(MCReport {
        config: cfg.clone(),
        regime,
        scaling: r,
        j_a,
        n_failed,
        ks,
        ks_threshold: ks_threshold(scaled_errors.len(), limit.values.len()),
        errors_summary: SampleSummary::of(&scaled_errors)?,
        limit_summary: SampleSummary::of(&limit.values)?,
        replications,
        scaled_errors,
        limit_values: limit.values,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Empirical CDFs of both samples on their pooled support, for plotting.
pub fn ecdf_table(s1: &[f64], s2: &[f64]) -> Vec<(f64, f64, f64)> {
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(s1), sorted(s2));
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let cdf = |v: &[f64], x: f64| v.partition_point(|&y| y <= x) as f64 / v.len() as f64;
    pooled.into_iter().map(|x| (x, cdf(&a, x), cdf(&b, x))).collect()
}
