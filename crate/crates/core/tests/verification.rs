use invman::config::Config;
use invman::rds::{check_growth_bound, check_invariance, random_samples, InvarianceBudget, PsiEvaluator};
use invman::solver::{solve, SolveResult, SolveSettings};

fn small(perturbation: &str) -> (Config, SolveResult) {
    let cfg = Config::from_toml(&format!("preset = \"toy-pseudo-hyperbolic\"\n[perturbation]\n{perturbation}\n")).unwrap();
    let settings = SolveSettings {
        xi_points: 11,
        k_max: 8,
        horizon: 16.0,
        ..cfg.solve_settings()
    };
    let r = solve(cfg.problem().unwrap(), settings).unwrap();
    (cfg, r)
}

fn psi(cfg: &Config) -> PsiEvaluator {
    let p = cfg.problem().unwrap();
    PsiEvaluator::new(p.cocycle, p.perturbation, None)
}

#[test]
fn linear_case_is_exactly_invariant() {
    let (cfg, r) = small("kind = \"zero\"");
    let samples = random_samples(&r.graph, 500, 1);
    let inv = check_invariance(&psi(&cfg), &r.graph, &samples, InvarianceBudget::from_solve(&r)).unwrap();
    assert_eq!(inv.max_residual, 0.0);
    assert!(inv.pass);
    let bounds = cfg.bounds().unwrap();
    let g = check_growth_bound(&psi(&cfg), &r.graph, r.constants.c, &bounds, &samples, 1e-12).unwrap();
    assert!(g.max_ratio <= 1.0 + 1e-12, "{}", g.max_ratio);
    assert!(g.pass);
}

#[test]
fn corrupted_graph_is_located() {
    let (cfg, r) = small("kind = \"sine\"\nlip = { kind = \"geometric\", scale = 0.05, ratio = 0.5 }");
    let mut phi = r.graph.clone();
    let (fiber, node) = (2, 7);
    phi.value_mut(fiber, node)[1] += 0.1;
    let samples = random_samples(&phi, 3000, 5);
    let inv = check_invariance(&psi(&cfg), &phi, &samples, InvarianceBudget::from_solve(&r)).unwrap();
    assert!(!inv.pass);
    assert!(inv.max_residual > 1e-2);
    let w = inv.witness.expect("witness");
    assert!(w.fiber == fiber || w.fiber + w.steps == fiber, "{w:?}");
}
