//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::panic;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use invman::cocycle::{scalar_field, verify_dichotomy, SplitCocycle};
use invman::config::Config;
use invman::driving::{BasePoint, DrivingSystem, TimeDomain};
use invman::linalg::{operator_norm, NormKind};
use invman::perturbation::{check_corollary, compute_sigma, compute_tau, CorollaryKind, Perturbation};
use invman::rds::{
    check_growth_bound, check_invariance, continuous_defect, evaluate_psi_continuous, evaluate_psi_discrete,
    random_samples, InvarianceBudget, PsiEvaluator,
};
use invman::solver::{solve, solve_mn, SolveSettings};

const MN_CASES: usize = 1000;
const MN_RESIDUAL: f64 = 1e-12;
const MN_RUNTIME: Duration = Duration::from_secs(1);
const ORACLE_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-8;
const TOY_RUNTIME: Duration = Duration::from_secs(30);
const LINEAR_FLOW_TOL: f64 = 1e-12;
const SAMPLE_PAIRS: usize = 10_000;
const HALVING_GAIN: f64 = 2.0;
const SPLITTING_TOL: f64 = 1e-12;
const FORMULA_TOL: f64 = 1e-12;
const TWO_ROUTE_SAMPLES: usize = 1000;
const TWO_ROUTE_TOL: f64 = 1e-10;
const DEFECT_GAIN: f64 = 1.5;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn toy() -> Config {
    Config::preset("toy-pseudo-hyperbolic").unwrap()
}

fn ac1_mn_identities() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..MN_CASES {
        let sum: f64 = rng.gen_range(1e-9..0.5);
        let sigma = rng.gen_range(0.0..sum);
        let tau = sum - sigma;
        if sigma + tau >= 0.5 || tau <= 0.0 {
            continue;
        }
        let c = solve_mn(sigma, tau).map_err(err)?;
        ensure(c.m > 1.0 && c.m < 2.0 && c.n > 0.0 && c.n < 1.0, || {
            format!("out of range at sigma={sigma}, tau={tau}: M={}, N={}", c.m, c.n)
        })?;
        let (rs, rt) = common::mn_residuals(sigma, tau, c.m, c.n);
        worst = worst.max(rs).max(rt);
        ensure(rs <= MN_RESIDUAL && rt <= MN_RESIDUAL, || {
            format!("residuals {rs:e}, {rt:e} at sigma={sigma}, tau={tau}")
        })?;
    }
    for sigma in [0.0, 0.1, 0.25, 0.4999] {
        let c = solve_mn(sigma, 0.0).map_err(err)?;
        ensure(c.n == 0.0 && c.m == 1.0 / (1.0 - sigma), || {
            format!("degenerate case sigma={sigma}: M={}, N={}", c.m, c.n)
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < MN_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{MN_CASES} cases, worst residual {worst:.2e}, {elapsed:.2?}"
    ))
}

fn ac2_contraction() -> Verdict {
    let cfg = toy();
    let settings = cfg.solve_settings();
    ensure(settings.xi_points == 41 && settings.k_max == 40, || {
        "preset grids changed".into()
    })?;
    let start = Instant::now();
    let r = solve(cfg.problem().map_err(err)?, settings).map_err(err)?;
    let elapsed = start.elapsed();
    let sigma = common::toy_sigma(0..=80, 40);
    let tau = common::toy_tau(0..=80, 400);
    ensure((r.sigma_tau.sigma - sigma).abs() <= ORACLE_TOL, || {
        format!("sigma {} vs oracle {sigma}", r.sigma_tau.sigma)
    })?;
    ensure((r.sigma_tau.tau - tau).abs() <= ORACLE_TOL, || {
        format!("tau {} vs oracle {tau}", r.sigma_tau.tau)
    })?;
    let q = r.constants.q;
    let max_ratio = r.steps.iter().filter_map(|s| s.ratio).fold(0.0, f64::max);
    ensure(max_ratio <= q, || format!("ratio {max_ratio} > q = {q}"))?;
    ensure(r.converged && r.final_step <= STEP_TOL, || {
        format!("not converged: last step {:e}", r.final_step)
    })?;
    let bound = r.banach_bound.ok_or("no a-priori bound")?;
    ensure(r.iterations <= bound, || {
        format!("{} iterations > bound {bound}", r.iterations)
    })?;
    ensure(elapsed < TOY_RUNTIME, || format!("solve took {elapsed:?}"))?;
    Ok(format!(
        "sigma={:.6}, tau={:.6}, q={q:.6}, max ratio {max_ratio:.3e}, {} iterations (bound {bound}), last step {:.2e}, {elapsed:.2?}",
        r.sigma_tau.sigma, r.sigma_tau.tau, r.iterations, r.final_step
    ))
}

fn ac3_zero_perturbation() -> Verdict {
    let cfg = Config::from_toml("preset = \"toy-pseudo-hyperbolic\"\n[perturbation]\nkind = \"zero\"\n")
        .map_err(err)?;
    let r = solve(cfg.problem().map_err(err)?, cfg.solve_settings()).map_err(err)?;
    ensure(r.converged && r.iterations == 1, || {
        format!("{} iterations", r.iterations)
    })?;
    ensure(
        r.graph.rows().iter().all(|(_, _, v)| v.iter().all(|&x| x == 0.0)),
        || "graph is not identically zero".into(),
    )?;
    let h = &r.trajectories;
    let step = common::toy_step();
    let p = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    let mut worst = 0.0_f64;
    for i in 0..=h.fibers().k_max() {
        for node in 0..h.grid().len() {
            let xi = DVector::from_row_slice(h.value(i, 0, node));
            let mut want = &p * &xi;
            for n in 0..=h.fibers().horizon_at(i) {
                let got = DVector::from_row_slice(h.value(i, n, node));
                worst = worst.max((got - &want).amax());
                want = &step * want;
            }
        }
    }
    ensure(worst <= LINEAR_FLOW_TOL, || format!("trajectory error {worst:e}"))?;
    Ok(format!(
        "graph exactly 0, trajectory error {worst:.2e}, 1 iteration"
    ))
}

fn invariance_residual(cfg: &Config, settings: SolveSettings) -> Result<(f64, f64, f64, f64, f64), String> {
    let problem = cfg.problem().map_err(err)?;
    let r = solve(problem.clone(), settings).map_err(err)?;
    let psi = PsiEvaluator::new(problem.cocycle.clone(), problem.perturbation.clone(), None);
    let samples = random_samples(&r.graph, SAMPLE_PAIRS, cfg.samples.seed);
    let inv = check_invariance(&psi, &r.graph, &samples, InvarianceBudget::from_solve(&r)).map_err(err)?;
    let growth =
        check_growth_bound(&psi, &r.graph, r.constants.c, &problem.bounds, &samples, 0.0).map_err(err)?;
    Ok((
        inv.max_residual,
        inv.budget.total,
        growth.max_ratio,
        r.constants.c,
        r.grid_spacing,
    ))
}

fn ac4_theorem_conclusions() -> Verdict {
    let cfg = toy();
    let base = cfg.solve_settings();
    let (res, budget, growth, c, h) = invariance_residual(&cfg, base.clone())?;
    ensure(res <= budget, || {
        format!("invariance residual {res:e} > budget {budget:e}")
    })?;
    ensure(growth <= c, || format!("growth ratio {growth} > C = {c}"))?;
    let fine = SolveSettings {
        xi_points: 2 * base.xi_points - 1,
        stop_tol: 0.5 * base.stop_tol,
        ..base
    };
    let (res_fine, _, _, _, h_fine) = invariance_residual(&cfg, fine)?;
    ensure((h_fine - 0.5 * h).abs() < 1e-15, || {
        "spacing did not halve".into()
    })?;
    let gain = res / res_fine;
    ensure(gain >= HALVING_GAIN, || {
        format!("halving gained only {gain:.3}x ({res:e} -> {res_fine:e})")
    })?;
    Ok(format!(
        "residual {res:.3e} <= budget {budget:.3e}; growth {growth:.4} <= C = {c:.4}; halving {res:.2e} -> {res_fine:.2e} ({gain:.2}x)"
    ))
}

fn ac5_planar_construction() -> Verdict {
    let birkhoff = Config::from_toml(
        r#"
[driving]
kind = "integer-shift-indexed"
time_domain = "discrete"
[cocycle]
kind = "example2"
weight = { kind = "sin2", base = 1.0, amp = 0.5 }
factors = "birkhoff-exp"
a = { kind = "sin2", base = -0.6, amp = 0.2 }
b = -0.3
[perturbation]
kind = "zero"
"#,
    )
    .map_err(err)?;
    let cases = [
        ("tempered-exp", Config::preset("tempered-exp").map_err(err)?),
        ("example2-poly", Config::preset("example2-poly").map_err(err)?),
        ("birkhoff", birkhoff),
    ];
    let mut worst_eq = 0.0_f64;
    for (name, cfg) in &cases {
        let c = cfg.cocycle().map_err(err)?;
        let b = cfg.bounds().map_err(err)?;
        let times = cfg.verify_times().map_err(err)?;
        let points = cfg.verify_points().map_err(err)?;
        let s = c.verify_splitting(&times, &points, SPLITTING_TOL).map_err(err)?;
        ensure(s.pass, || format!("{name}: splitting failed {s:?}"))?;
        let d = verify_dichotomy(&c, &b, &times, &points, SPLITTING_TOL).map_err(err)?;
        ensure(d.pass, || format!("{name}: dichotomy failed {d:?}"))?;
        for w in &points {
            for &t in &times {
                let measured = operator_norm(&(c.matrix(t, w).map_err(err)? * c.proj_p(w)), NormKind::Max);
                let bound = b.alpha_plus(t, w).map_err(err)?;
                let rel = (measured - bound).abs() / bound;
                worst_eq = worst_eq.max(rel);
                ensure(rel <= SPLITTING_TOL, || {
                    format!(
                        "{name}: forward norm {measured} != bound {bound} at t={t}, w={:?}",
                        w.coords
                    )
                })?;
            }
        }
    }
    let poly = Config::preset("example2-poly")
        .map_err(err)?
        .bounds()
        .map_err(err)?;
    let mut worst = 0.0_f64;
    for t in [0.0, 0.3, 1.0, 2.5, 7.0, 20.0] {
        for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            for y in [-1.2, 0.0, 0.4, 1.0] {
                let got = poly.alpha_plus(t, &BasePoint::planar(x, y)).map_err(err)?;
                let want = common::polynomial_alpha_plus(1.5, -1.0, 0.1, t, x, y);
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    ensure(worst <= FORMULA_TOL, || {
        format!("polynomial bound relative error {worst:e}")
    })?;
    Ok(format!(
        "3 cocycles pass at {SPLITTING_TOL:e}, forward equality to {worst_eq:.1e}, polynomial formula to {worst:.1e}"
    ))
}

fn ac6_corollaries() -> Verdict {
    let cfg = Config::preset("corollaries").map_err(err)?;
    for kind in CorollaryKind::ALL {
        let (data, scan) = cfg.corollary(kind.id()).map_err(err)?;
        let rep = check_corollary(&data, &scan).map_err(err)?;
        let failing: Vec<&str> = rep
            .hypotheses
            .iter()
            .filter(|h| !h.pass)
            .map(|h| h.name.as_str())
            .collect();
        ensure(rep.pass, || format!("{kind} fails {failing:?}"))?;
    }
    let violations = [
        ("c42", "delta = 0.3", "delta_in_open_quarter"),
        ("c32", "a = 0.6", "a_plus_b_negative"),
        ("c44", "a = { kind = \"exp\", rate = -0.3 }", "h_nondecreasing"),
        (
            "c34",
            "a = { kind = \"exp\", rate = -0.3 }",
            "h_derivative_positive",
        ),
    ];
    for (id, change, hyp) in violations {
        let bad = Config::from_toml(&format!("preset = \"corollaries\"\n[corollary.{id}]\n{change}\n"))
            .map_err(err)?;
        let (data, scan) = bad.corollary(id).map_err(err)?;
        let rep = check_corollary(&data, &scan).map_err(err)?;
        let h = rep.get(hyp).ok_or_else(|| format!("{id}: no hypothesis {hyp}"))?;
        ensure(!rep.pass && !h.pass && h.witness.is_some(), || {
            format!("{id} with {change}: expected {hyp} to fail with a witness, got {h:?}")
        })?;
    }
    let (data, scan) = cfg.corollary("c42").map_err(err)?;
    let bounds = Config::from_toml(
        r#"
[driving]
kind = "integer-shift-indexed"
time_domain = "discrete"
[cocycle]
kind = "diagonal-exp"
rates = [-0.6, 0.3]
stable_dim = 1
"#,
    )
    .map_err(err)?
    .bounds()
    .map_err(err)?;
    let pert = Perturbation::sine(2, data.lip.clone());
    let (mut sigma, mut tau) = (0.0_f64, 0.0_f64);
    for w in &scan.anchors {
        let s = compute_sigma(&bounds, &pert, w, 60.0, None).map_err(err)?;
        let t = compute_tau(&bounds, &pert, w, 60.0, None).map_err(err)?;
        let tail = t.tail_bound.ok_or("tau has no tail bound")?;
        sigma = sigma.max(s.sigma);
        tau = tau.max(t.tau);
        ensure(s.sigma <= data.delta, || {
            format!("sigma {} > delta at {:?}", s.sigma, w.coords)
        })?;
        ensure(t.tau <= data.delta + tail, || {
            format!("tau {} > delta at {:?}", t.tau, w.coords)
        })?;
    }
    Ok(format!(
        "6 datasets pass, 4 violations located; c42 sigma={sigma:.4}, tau={tau:.4} <= delta={}",
        data.delta
    ))
}

fn ac7_two_routes() -> Verdict {
    let cfg = toy();
    let c = cfg.cocycle().map_err(err)?;
    let p = cfg.perturbation().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..TWO_ROUTE_SAMPLES {
        let n = rng.gen_range(0..=20usize);
        let w = rng.gen_range(-5..=5i64);
        let x = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..=2.0));
        let got = evaluate_psi_discrete(&c, &p, n, &BasePoint::scalar(w as f64), &x).map_err(err)?;
        let want = common::toy_psi_sum(n, w, &x);
        let e = (got - &want).amax() / want.amax().max(1.0);
        worst = worst.max(e);
        ensure(e <= TWO_ROUTE_TOL, || {
            format!("n={n}, w={w}, x={x:?}: relative gap {e:e}")
        })?;
    }
    let ds = DrivingSystem::circle_rotation(0.1, TimeDomain::Continuous);
    let scalar = SplitCocycle::diagonal_exp(vec![-1.0], 1, ds, NormKind::Max).map_err(err)?;
    let k = 0.3;
    let lin = Perturbation::linear(
        DMatrix::from_element(1, 1, 1.0),
        scalar_field(move |_| k),
        NormKind::Max,
    );
    let w = BasePoint::scalar(0.2);
    let x = DVector::from_element(1, 1.0);
    let exact = (k - 1.0_f64).exp();
    let mut defects = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let u = evaluate_psi_continuous(&scalar, &lin, 1.0, &w, &x, h).map_err(err)?;
        let rel = (u[0] - exact).abs() / exact;
        ensure(rel <= 5.0 * h, || format!("step {h}: relative error {rel} > 5h"))?;
        defects.push(continuous_defect(&scalar, &lin, 1.0, &w, &x, h).map_err(err)?);
    }
    let gains: Vec<f64> = defects.windows(2).map(|d| d[0] / d[1]).collect();
    ensure(gains.iter().all(|&g| g >= DEFECT_GAIN), || {
        format!("defect gains {gains:?}")
    })?;
    Ok(format!(
        "{TWO_ROUTE_SAMPLES} samples within {worst:.1e}; defect gains per halving {:?}",
        gains.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>()
    ))
}

fn ac8_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_invman");
    let dirs = [
        tempfile::tempdir().map_err(err)?,
        tempfile::tempdir().map_err(err)?,
    ];
    for d in &dirs {
        let st = Command::new(bin)
            .args(["reproduce", "toy-pseudo-hyperbolic", "--out-dir"])
            .arg(d.path())
            .output()
            .map_err(err)?;
        ensure(st.status.success(), || {
            format!(
                "exit {:?}: {}",
                st.status.code(),
                String::from_utf8_lossy(&st.stderr)
            )
        })?;
    }
    let mut bytes = 0;
    for f in ["report.json", "phi.csv", "trace.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(err)?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(err)?;
        ensure(a == b, || format!("{f} differs between runs"))?;
        bytes += a.len();
    }
    Ok(format!("report, graph and trace identical ({bytes} bytes)"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1 M/N identities", ac1_mn_identities),
        ("AC2 contraction certification", ac2_contraction),
        ("AC3 zero perturbation", ac3_zero_perturbation),
        ("AC4 invariance and growth", ac4_theorem_conclusions),
        ("AC5 planar construction", ac5_planar_construction),
        ("AC6 corollary checkers", ac6_corollaries),
        ("AC7 two routes for Psi", ac7_two_routes),
        ("AC8 determinism", ac8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let verdict = panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
