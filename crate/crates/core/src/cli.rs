//! Command-line front end.
//!
//! Exit codes: 0 every check passed, 1 a check failed (or the scenario is
//! inadmissible, or the solver did not converge), 2 usage or configuration
//! error, 3 internal consistency failure.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::cocycle::{check_decay_condition, verify_dichotomy};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::perturbation::{check_corollary, lip_scan, random_pairs, CorollaryKind};
use crate::presets;
use crate::rds::{check_growth_bound, check_invariance, random_samples, InvarianceBudget, PsiEvaluator};
use crate::report::{to_json, write_phi_csv, write_trace_csv};
use crate::solver::{fiber_sigma_tau, solve, solve_mn, SolveResult};

#[derive(Debug, Parser)]
#[command(
    name = "invman",
    version,
    about = "Invariant manifolds of perturbed linear cocycles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the splitting, the dichotomy bounds and the decay condition.
    Verify {
        config: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute sigma, tau and the constants they induce.
    SigmaTau {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the invariant graph and verify it.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Graph table as CSV.
        #[arg(long)]
        phi_csv: Option<PathBuf>,
        /// Per-iteration distances and ratios as CSV.
        #[arg(long)]
        trace_csv: Option<PathBuf>,
    },
    /// Check the hypotheses of one corollary (c32, c33, c34, c42, c43, c44).
    Check {
        config: PathBuf,
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scenario end to end.
    Reproduce {
        preset: String,
        /// Directory for report.json, phi.csv and trace.csv; the report goes
        /// to stdout when omitted.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// A finished command: its report and whether every check passed.
pub struct Outcome {
    pub report: Value,
    pub pass: bool,
    pub solve: Option<SolveResult>,
}

impl Outcome {
    fn new(mut report: Map<String, Value>, pass: bool, solve: Option<SolveResult>) -> Self {
        report.insert("pass".into(), Value::Bool(pass));
        Outcome {
            report: Value::Object(report),
            pass,
            solve,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::DimensionMismatch { .. }
        | Error::NotTabulated { .. }
        | Error::GridMismatch(_) => 2,
        Error::Inadmissible { .. }
        | Error::NoDecay { .. }
        | Error::FactorLaw { .. }
        | Error::LipschitzViolated { .. }
        | Error::Singular { .. }
        | Error::NotInKernel { .. } => 1,
        Error::ContractionViolated { .. } | Error::Invalid(_) | Error::Io(_) => 3,
    }
}

fn value(v: &impl serde::Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Invalid(format!("serialization: {e}")))
}

fn header(command: &str, cfg: &Config) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config".into(), value(cfg)?);
    Ok(m)
}

pub fn run_verify(cfg: &Config) -> Result<Outcome> {
    let ds = cfg.driving_system()?;
    let cocycle = cfg.cocycle()?;
    let bounds = cfg.bounds()?;
    let times = cfg.verify_times()?;
    let points = cfg.verify_points()?;
    let tol = cfg.tolerances.verify;
    let flow = ds.check_flow_property(&times, &points, tol.max(1e-12))?;
    let split = cocycle.verify_splitting(&times, &points, tol)?;
    let dich = verify_dichotomy(&cocycle, &bounds, &times, &points, tol)?;
    let decay = check_decay_condition(
        &bounds,
        &cfg.anchor()?,
        cfg.decay.horizon,
        cfg.decay.samples,
        cfg.decay.tol,
    )?;
    let mut lips = Vec::new();
    let pert = cfg.perturbation()?;
    let pairs = random_pairs(pert.dim(), 200, 2.0, cfg.samples.seed);
    for (j, w) in points.iter().enumerate() {
        lips.push(match lip_scan(&pert, w, &pairs, cocycle.norm_kind(), 1e-9) {
            Ok(s) => value(&s)?,
            Err(e @ Error::LipschitzViolated { .. }) => json!({ "point": j, "error": e.to_string() }),
            Err(e) => return Err(e),
        });
    }
    let lip_pass = lips.iter().all(|v| v.get("error").is_none());
    let pass = flow.pass && split.pass && dich.pass && decay.pass && lip_pass;
    let mut m = header("verify", cfg)?;
    m.insert("flow".into(), value(&flow)?);
    m.insert("splitting".into(), value(&split)?);
    m.insert("dichotomy".into(), value(&dich)?);
    m.insert("decay".into(), value(&decay)?);
    m.insert("lipschitz".into(), Value::Array(lips));
    Ok(Outcome::new(m, pass, None))
}

pub fn run_sigma_tau(cfg: &Config) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let st = fiber_sigma_tau(&problem, &cfg.solve_settings())?;
    let mut m = header("sigma-tau", cfg)?;
    m.insert("sigma_tau".into(), value(&st)?);
    let constants = match st.tail() {
        Some(tail) if st.admissible => Some(solve_mn(st.sigma, st.tau + tail)?),
        _ => None,
    };
    m.insert("constants".into(), value(&constants)?);
    Ok(Outcome::new(m, constants.is_some(), None))
}

pub fn run_solve(cfg: &Config) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let r = solve(problem.clone(), cfg.solve_settings())?;
    let mut m = header("solve", cfg)?;
    m.insert("solve".into(), value(&r)?);
    m.insert("invariance_budget".into(), json!(r.invariance_budget()));
    m.insert("degraded".into(), json!(r.degraded()));
    let mut pass = r.converged && r.membership.pass;
    if r.converged {
        let psi = PsiEvaluator::new(
            problem.cocycle.clone(),
            problem.perturbation.clone(),
            cfg.psi_step()?,
        );
        let samples = random_samples(&r.graph, cfg.samples.count, cfg.samples.seed);
        let inv = check_invariance(&psi, &r.graph, &samples, InvarianceBudget::from_solve(&r))?;
        let growth = check_growth_bound(
            &psi,
            &r.graph,
            r.constants.c,
            &problem.bounds,
            &samples,
            cfg.tolerances.growth,
        )?;
        pass &= inv.pass && growth.pass;
        m.insert("invariance".into(), value(&inv)?);
        m.insert("growth".into(), value(&growth)?);
    }
    Ok(Outcome::new(m, pass, Some(r)))
}

pub fn run_check(cfg: &Config, id: &str) -> Result<Outcome> {
    let (data, scan) = cfg.corollary(id)?;
    let rep = check_corollary(&data, &scan)?;
    let mut m = Map::new();
    m.insert("command".into(), json!("check"));
    m.insert("corollary".into(), value(&cfg.corollary[id])?);
    m.insert("report".into(), value(&rep)?);
    Ok(Outcome::new(m, rep.pass, None))
}

/// Runs every stage that applies to the preset and merges the reports.
pub fn run_reproduce(name: &str) -> Result<Outcome> {
    let cfg = Config::preset(name)?;
    let mut m = Map::new();
    m.insert("command".into(), json!("reproduce"));
    m.insert("preset".into(), json!(name));
    let mut pass = true;
    let mut solve = None;
    let mut stage = |key: &str, o: Outcome, m: &mut Map<String, Value>| {
        pass &= o.pass;
        m.insert(key.into(), o.report);
        o.solve
    };
    if cfg.cocycle.is_some() {
        stage("verify", run_verify(&cfg)?, &mut m);
        if cfg
            .perturbation
            .as_ref()
            .is_some_and(|p| !matches!(p, crate::config::PerturbationSpec::Zero))
        {
            stage("sigma_tau", run_sigma_tau(&cfg)?, &mut m);
            solve = stage("solve", run_solve(&cfg)?, &mut m);
        }
    }
    for id in CorollaryKind::ALL.map(|k| k.id()) {
        if cfg.corollary.contains_key(id) {
            stage(&format!("check_{id}"), run_check(&cfg, id)?, &mut m);
        }
    }
    Ok(Outcome::new(m, pass, solve))
}

fn emit(report: &Value, out: Option<&Path>) -> Result<()> {
    let text = to_json(report)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn summary(o: &Outcome) -> String {
    let r = &o.report;
    let mut s = format!(
        "{}: {}",
        r["command"].as_str().unwrap_or("?"),
        if o.pass { "PASS" } else { "FAIL" }
    );
    if let Some(sol) = &o.solve {
        s.push_str(&format!(
            "\n  sigma = {:.6e}, tau = {:.6e}, M = {:.6}, N = {:.6}, C = {:.6}, q = {:.6}\n  iterations = {}, converged = {}, last step = {:.3e}, clamps = {}",
            sol.sigma_tau.sigma,
            sol.sigma_tau.tau,
            sol.constants.m,
            sol.constants.n,
            sol.constants.c,
            sol.constants.q,
            sol.iterations,
            sol.converged,
            sol.final_step,
            sol.clamp_count,
        ));
    }
    let inv = r
        .get("invariance")
        .or_else(|| r.get("solve").and_then(|s| s.get("invariance")));
    if let Some(inv) = inv {
        s.push_str(&format!(
            "\n  invariance residual = {:.3e} (budget {:.3e})",
            inv["max_residual"].as_f64().unwrap_or(f64::NAN),
            inv["budget"]["total"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    if let Value::Object(map) = r {
        for (k, v) in map {
            if let Some(p) = v.get("pass").and_then(Value::as_bool) {
                s.push_str(&format!("\n  {k}: {}", if p { "pass" } else { "FAIL" }));
            }
        }
    }
    s
}

fn write_tables(sol: &SolveResult, phi: Option<&Path>, trace: Option<&Path>) -> Result<()> {
    if let Some(p) = phi {
        write_phi_csv(&sol.graph, BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = trace {
        write_trace_csv(&sol.steps, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(f),
        None => f(),
    }
}

fn execute(cmd: &Command) -> Result<Outcome> {
    let load = |p: &Path| Config::from_path(p);
    let outcome = match cmd {
        Command::Verify { config, out } => {
            let cfg = load(config)?;
            let o = with_threads(cfg.threads, || run_verify(&cfg))?;
            emit(&o.report, out.as_deref())?;
            o
        }
        Command::SigmaTau { config, out } => {
            let cfg = load(config)?;
            let o = with_threads(cfg.threads, || run_sigma_tau(&cfg))?;
            emit(&o.report, out.as_deref())?;
            o
        }
        Command::Solve {
            config,
            out,
            phi_csv,
            trace_csv,
        } => {
            let cfg = load(config)?;
            let o = with_threads(cfg.threads, || run_solve(&cfg))?;
            emit(&o.report, out.as_deref())?;
            if let Some(sol) = &o.solve {
                write_tables(sol, phi_csv.as_deref(), trace_csv.as_deref())?;
            }
            o
        }
        Command::Check { config, id, out } => {
            id.parse::<CorollaryKind>()?;
            let cfg = load(config)?;
            let o = with_threads(cfg.threads, || run_check(&cfg, id))?;
            emit(&o.report, out.as_deref())?;
            o
        }
        Command::Reproduce { preset, out_dir } => {
            presets::source(preset)?;
            let threads = Config::preset(preset)?.threads;
            let o = with_threads(threads, || run_reproduce(preset))?;
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    emit(&o.report, Some(&dir.join("report.json")))?;
                    if let Some(sol) = &o.solve {
                        write_tables(sol, Some(&dir.join("phi.csv")), Some(&dir.join("trace.csv")))?;
                    }
                }
                None => emit(&o.report, None)?,
            }
            o
        }
    };
    Ok(outcome)
}

/// Runs one command and returns the process exit code. The summary and any
/// diagnostics go to stderr.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(o) => {
            eprintln!("{}", summary(&o));
            if o.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
