//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 numerical failure
//! (no convergence, degenerate denominator), 1 anything else.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};
use serde_json::json;

use crate::chareq::{classify_regime, leading_root, residue_constants, Regime, A_CRITICAL};
use crate::error::{Error, Result};
use crate::fundsol::{fisher_limit, fundamental_solution};
use crate::harness::{
    csv_err, ecdf_table, run_experiment_jobs, ExperimentConfig, MCReport, DEFAULT_M_TAIL,
    DEFAULT_M_WIENER, FISHER_REL_TOL,
};
use crate::inference::mle;
use crate::limits::{
    sample_critical_limit, sample_df_limit, sample_lamn_limit, sample_lan_limit,
    sample_plamn_limit,
};
use crate::simul::{
    simulate_path_with, DelayModel, DriftRule, InitialSegment, SamplePath, SimOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sdde", version, about = "Uniform-delay SDDE: simulation, estimation, limit laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct PathArgs {
    /// Drift coefficient.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Horizon.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Constant initial segment value.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drift rule: half-step or left-point.
    #[arg(long, default_value = "half-step")]
    pub rule: DriftRule,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leading characteristic root and regime of `a` (JSON).
    Roots {
        #[arg(long, allow_hyphen_values = true, required_unless_present = "a_critical")]
        a: Option<f64>,
        /// Use the exact critical value −π²/2.
        #[arg(long)]
        a_critical: bool,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Fundamental solution and its delay average (CSV t,x,y).
    Fundsol {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Simulate one path (CSV t,x[,dw]).
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long)]
        seed: u64,
        /// Set every Brownian increment to zero.
        #[arg(long)]
        zero_noise: bool,
        /// Append the Brownian increment of each step.
        #[arg(long)]
        emit_dw: bool,
        #[arg(long, default_value = "half-step")]
        rule: DriftRule,
    },
    /// Maximum likelihood estimate from a path CSV or an inline simulation (JSON).
    Estimate {
        /// Path CSV with columns t,x[,dw]; `-` reads standard input.
        #[arg(long, conflicts_with_all = ["a", "t_end", "dt", "seed"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        path: PathArgs,
    },
    /// Draws from a limit law, one per line.
    LimitSample {
        /// LAN, LAQ_ZERO, LAQ_CRITICAL, LAMN or PLAMN.
        #[arg(long)]
        regime: Regime,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Drift coefficient (LAN, LAMN, PLAMN).
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// Fisher information for LAN; computed from `a` when absent.
        #[arg(long)]
        j: Option<f64>,
        /// Grid of the Wiener functionals.
        #[arg(long, default_value_t = DEFAULT_M_WIENER)]
        m: usize,
        /// Cells of the tail quadrature (LAMN, PLAMN).
        #[arg(long, default_value_t = DEFAULT_M_TAIL)]
        m_tail: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x0: f64,
        /// Phase for PLAMN.
        #[arg(long, default_value_t = 0.0)]
        d: f64,
    },
    /// Monte Carlo experiment from a TOML config (JSON report).
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Empirical CDFs of a report's two samples (CSV x,F_errors,F_limit).
    ReportPlot {
        /// MCReport JSON written by `experiment`.
        #[arg(long)]
        report: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Roots { .. } => "roots",
            Command::Fundsol { .. } => "fundsol",
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::LimitSample { .. } => "limit-sample",
            Command::Experiment { .. } => "experiment",
            Command::ReportPlot { .. } => "report-plot",
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence(_) | Error::DegenerateDenominator(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_OTHER,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` and runs the subcommand, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{}", rendered.ansi())
            };
            return code;
        }
    };
    let name = cli.command.name();
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(err, "error: {e}");
            if code == EXIT_USAGE {
                if let Some(sub) = Cli::command().find_subcommand_mut(name) {
                    let _ = writeln!(err, "{}", sub.render_usage());
                }
            }
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Roots { a, a_critical, tol } => {
            let a = if a_critical { A_CRITICAL } else { a.expect("required by clap") };
            roots(a, tol, out)
        }
        Command::Fundsol { a, t_max, dt } => {
            let fs = fundamental_solution(a, t_max, dt)?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["t", "x", "y"]).map_err(csv_err)?;
            for k in 0..=fs.n() {
                w.write_record([
                    fs.time(k).to_string(),
                    fs.x_at(k).to_string(),
                    fs.y[k].to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Simulate { a, t_end, dt, x0, seed, zero_noise, emit_dw, rule } => {
            let model = DelayModel::new(a, InitialSegment::Constant(x0));
            let path = simulate_path_with(&model, t_end, dt, SimOptions { seed, rule, zero_noise })?;
            write_path(&path, emit_dw, out)
        }
        Command::Estimate { input, path } => {
            let p = match input {
                Some(file) => read_path(&file, path.rule)?,
                None => {
                    let missing = |f: &str| Error::InvalidConfig(format!("estimate needs --input or --{f}"));
                    let model = DelayModel::new(
                        path.a.ok_or_else(|| missing("a"))?,
                        InitialSegment::Constant(path.x0),
                    );
                    let opts = SimOptions {
                        seed: path.seed.ok_or_else(|| missing("seed"))?,
                        rule: path.rule,
                        zero_noise: false,
                    };
                    simulate_path_with(
                        &model,
                        path.t_end.ok_or_else(|| missing("T"))?,
                        path.dt.ok_or_else(|| missing("dt"))?,
                        opts,
                    )?
                }
            };
            let est = mle(&p)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&est).expect("serialisable"))?;
            Ok(())
        }
        Command::LimitSample { regime, n, seed, a, j, m, m_tail, x0, d } => {
            let need_a = || {
                a.ok_or_else(|| Error::InvalidConfig(format!("--a is required for {regime}")))
            };
            let x0 = InitialSegment::Constant(x0);
            let sample = match regime {
                Regime::Lan => {
                    let j = match j {
                        Some(j) => j,
                        None => fisher_limit(need_a()?, FISHER_REL_TOL)?,
                    };
                    sample_lan_limit(j, n, seed)?
                }
                Regime::LaqZero => sample_df_limit(n, m, seed)?,
                Regime::LaqCritical => sample_critical_limit(n, m, seed)?,
                Regime::Lamn => sample_lamn_limit(need_a()?, &x0, n, m_tail, seed)?,
                Regime::Plamn => sample_plamn_limit(need_a()?, &x0, d, n, m_tail, seed)?,
            };
            for v in sample.values {
                writeln!(out, "{v}")?;
            }
            Ok(())
        }
        Command::Experiment { config, jobs } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = run_experiment_jobs(&cfg, jobs)?;
            if let Some(path) = &cfg.out {
                report.write_replications_csv(path)?;
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serialisable"))?;
            Ok(())
        }
        Command::ReportPlot { report } => {
            let text = std::fs::read_to_string(&report)?;
            let rep: MCReport =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["x", "F_errors", "F_limit"]).map_err(csv_err)?;
            for (x, f1, f2) in ecdf_table(&rep.scaled_errors, &rep.limit_values) {
                w.write_record([x.to_string(), f1.to_string(), f2.to_string()])
                    .map_err(csv_err)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn roots(a: f64, tol: f64, out: &mut dyn Write) -> Result<()> {
    let regime = classify_regime(a);
    let mut doc = if regime == Regime::LaqZero {
        // h_0(λ) = λ
        json!({ "v0": 0.0, "kappa0": 0.0, "is_real": true, "multiplicity": 1, "residual": 0.0 })
    } else {
        serde_json::to_value(leading_root(a, tol)?).expect("serialisable")
    };
    doc["a"] = json!(a);
    doc["regime"] = json!(regime);
    if matches!(regime, Regime::Lamn | Regime::Plamn | Regime::LaqCritical) {
        doc["residues"] = serde_json::to_value(residue_constants(a)?).expect("serialisable");
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serialisable"))?;
    Ok(())
}

fn write_path(path: &SamplePath, emit_dw: bool, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if emit_dw {
        w.write_record(["t", "x", "dw"]).map_err(csv_err)?;
    } else {
        w.write_record(["t", "x"]).map_err(csv_err)?;
    }
    let dw = path.dw.as_deref();
    for (i, x) in path.x.iter().enumerate() {
        let t = path.time(i).to_string();
        if emit_dw {
            // the increment over [t_k, t_{k+1}] sits on the row of t_k
            let d = match (dw, i.checked_sub(path.m)) {
                (Some(dw), Some(k)) if k < dw.len() => dw[k].to_string(),
                _ => String::new(),
            };
            w.write_record([t, x.to_string(), d]).map_err(csv_err)?;
        } else {
            w.write_record([t, x.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a path CSV. The step is inferred from the rows with `t ≤ 0`, which
/// hold the initial segment on `[-1, 0]`.
pub fn read_path(file: &std::path::Path, rule: DriftRule) -> Result<SamplePath> {
    let reader: Box<dyn std::io::Read> = if file.as_os_str() == "-" {
        Box::new(std::io::stdin())
    } else {
        Box::new(std::fs::File::open(file)?)
    };
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ti, xi) = match (col("t"), col("x")) {
        (Some(t), Some(x)) => (t, x),
        _ => return Err(Error::Parse("path CSV needs columns t and x".into())),
    };
    let dwi = col("dw");
    let parse = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| Error::Parse(format!("not a number: `{s}`")))
    };
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    let mut dws = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        ts.push(parse(&rec[ti])?);
        xs.push(parse(&rec[xi])?);
        if let Some(c) = dwi {
            let s = rec.get(c).unwrap_or("").trim();
            if !s.is_empty() {
                dws.push(parse(s)?);
            }
        }
    }
    let nonpositive = ts.iter().filter(|&&t| t <= 1e-12).count();
    if nonpositive < 2 {
        return Err(Error::Parse("path CSV lacks the initial segment on [-1, 0]".into()));
    }
    let dt = 1.0 / (nonpositive - 1) as f64;
    let dw = (dwi.is_some() && !dws.is_empty()).then_some(dws);
    SamplePath::observed(dt, xs, dw, rule)
}
