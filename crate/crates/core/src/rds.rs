//! The perturbed system `Psi` and a-posteriori checks of a solved graph:
//! forward invariance of its graph and the Lipschitz growth of trajectories
//! that start on it.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{DichotomyBounds, SplitCocycle};
use crate::driving::{BasePoint, TimeDomain};
use crate::error::{Error, Result};
use crate::perturbation::Perturbation;
use crate::solver::{GraphFunction, SolveResult};

/// `x_{n+1} = Phi^1_{theta^n w} x_n + f_{theta^n w}(x_n)`.
pub fn evaluate_psi_discrete(
    c: &SplitCocycle,
    p: &Perturbation,
    n: usize,
    omega: &BasePoint,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if c.time_domain() != TimeDomain::Discrete {
        return Err(Error::Domain(
            "discrete evaluation on a continuous cocycle".into(),
        ));
    }
    check_dim(c, p, x)?;
    let ds = c.driving();
    let mut w = omega.clone();
    let mut x = x.clone();
    for _ in 0..n {
        let fx = p.eval(&w, &x)?;
        x = c.matrix(1.0, &w)? * x + fx;
        w = ds.evolve(1.0, &w)?;
    }
    Ok(x)
}

/// First-order stepping `u_{j+1} = Phi^h_{theta^{t_j} w}(u_j + h f(u_j))` with
/// `h = t / ceil(t / step)`. Consistent of order one with the variation of
/// constants formula.
pub fn evaluate_psi_continuous(
    c: &SplitCocycle,
    p: &Perturbation,
    t: f64,
    omega: &BasePoint,
    x: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>> {
    Ok(continuous_path(c, p, t, omega, x, step)?
        .1
        .pop()
        .unwrap_or_else(|| x.clone()))
}

fn check_dim(c: &SplitCocycle, p: &Perturbation, x: &DVector<f64>) -> Result<()> {
    if x.len() != c.fiber_dim() || p.dim() != c.fiber_dim() {
        return Err(Error::DimensionMismatch {
            expected: c.fiber_dim(),
            got: if x.len() != c.fiber_dim() {
                x.len()
            } else {
                p.dim()
            },
        });
    }
    Ok(())
}

/// Step size and the stepped trajectory at `0, h, ..., t`.
fn continuous_path(
    c: &SplitCocycle,
    p: &Perturbation,
    t: f64,
    omega: &BasePoint,
    x: &DVector<f64>,
    step: f64,
) -> Result<(f64, Vec<DVector<f64>>)> {
    if c.time_domain() != TimeDomain::Continuous {
        return Err(Error::Domain(
            "continuous evaluation on a discrete cocycle".into(),
        ));
    }
    if !(t >= 0.0) || !(step > 0.0) {
        return Err(Error::Domain(format!(
            "need t >= 0 and step > 0, got {t}, {step}"
        )));
    }
    check_dim(c, p, x)?;
    let n = (t / step - 1e-9).ceil().max(0.0) as usize;
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    let ds = c.driving();
    let mut path = Vec::with_capacity(n + 1);
    let mut u = x.clone();
    path.push(u.clone());
    for j in 0..n {
        let w = ds.evolve(j as f64 * h, omega)?;
        let fu = p.eval(&w, &u)?;
        u = c.matrix(h, &w)? * (u + fu * h);
        path.push(u.clone());
    }
    Ok((h, path))
}

/// Largest defect of `u(t_j) = Phi^{t_j} x + int_0^{t_j} Phi^{t_j - s} f(u(s)) ds`
/// along the stepped trajectory, with the integral evaluated by the
/// trapezoid rule on the stepping grid.
pub fn continuous_defect(
    c: &SplitCocycle,
    p: &Perturbation,
    t: f64,
    omega: &BasePoint,
    x: &DVector<f64>,
    step: f64,
) -> Result<f64> {
    let (h, path) = continuous_path(c, p, t, omega, x, step)?;
    let ds = c.driving();
    let pts = (0..path.len())
        .map(|j| ds.evolve(j as f64 * h, omega))
        .collect::<Result<Vec<_>>>()?;
    let forcing = path
        .iter()
        .zip(&pts)
        .map(|(u, w)| p.eval(w, u))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0_f64;
    for j in 1..path.len() {
        let tj = j as f64 * h;
        let mut rhs = c.matrix(tj, omega)? * x;
        for k in 0..=j {
            let w = if k == 0 || k == j { 0.5 } else { 1.0 };
            rhs += c.matrix(tj - k as f64 * h, &pts[k])? * &forcing[k] * (w * h);
        }
        worst = worst.max(c.norm_kind().vector(&(&path[j] - rhs)));
    }
    Ok(worst)
}

/// `Psi` along the solver's time grid, with a fixed substep in continuous
/// time.
#[derive(Debug, Clone)]
pub struct PsiEvaluator {
    pub cocycle: SplitCocycle,
    pub perturbation: Perturbation,
    /// Stepping size for continuous time.
    pub step: Option<f64>,
}

impl PsiEvaluator {
    pub fn new(cocycle: SplitCocycle, perturbation: Perturbation, step: Option<f64>) -> Self {
        PsiEvaluator {
            cocycle,
            perturbation,
            step,
        }
    }

    pub fn evolve(&self, t: f64, omega: &BasePoint, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self.cocycle.time_domain() {
            TimeDomain::Discrete => {
                self.cocycle.time_domain().check(t)?;
                evaluate_psi_discrete(&self.cocycle, &self.perturbation, t as usize, omega, x)
            }
            TimeDomain::Continuous => {
                let step = self
                    .step
                    .ok_or_else(|| Error::Config("continuous evaluation needs a step".into()))?;
                evaluate_psi_continuous(&self.cocycle, &self.perturbation, t, omega, x, step)
            }
        }
    }

    fn halved(&self) -> Option<PsiEvaluator> {
        self.step.map(|s| PsiEvaluator {
            step: Some(0.5 * s),
            ..self.clone()
        })
    }
}

/// A start point in `E`-coordinates on fiber `fiber`, evolved for `steps`
/// solver time steps.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub fiber: usize,
    pub steps: usize,
    pub xi: Vec<f64>,
    /// Second start point, for pairwise checks.
    pub xi_bar: Vec<f64>,
}

/// Uniform samples over fibers `0..=k_max`, times up to the solver horizon
/// and start points in the grid box.
pub fn random_samples(phi: &GraphFunction, count: usize, seed: u64) -> Vec<Sample> {
    let f = phi.fibers();
    let r = phi.grid().extent();
    let e = f.dim_e();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Sample {
            fiber: rng.gen_range(0..=f.k_max()),
            steps: rng.gen_range(0..=f.horizon()),
            xi: (0..e).map(|_| rng.gen_range(-r..=r)).collect(),
            xi_bar: (0..e).map(|_| rng.gen_range(-r..=r)).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceBudget {
    pub stop_tol: f64,
    pub l_tail: f64,
    /// `N` times the grid spacing.
    pub grid_allowance: f64,
    /// Step-halving estimate of the `Psi` stepping error (continuous time).
    pub step_allowance: f64,
    pub total: f64,
}

impl InvarianceBudget {
    pub fn from_solve(r: &SolveResult) -> Self {
        let mut b = InvarianceBudget {
            stop_tol: r.stop_tol,
            l_tail: r.l_tail,
            grid_allowance: r.constants.n * r.grid_spacing,
            step_allowance: 0.0,
            total: 0.0,
        };
        b.total = b.stop_tol + b.l_tail + b.grid_allowance;
        b
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    /// `max ‖Phi-hat^{-t}(Q x_t - phi(P x_t))‖ / ‖xi‖` with
    /// `x_t = Psi^t(xi + phi(xi))`.
    pub max_residual: f64,
    pub witness: Option<Sample>,
    pub budget: InvarianceBudget,
    pub samples: usize,
    pub clamps: usize,
    pub pass: bool,
    pub assumption: Option<&'static str>,
}

/// Evolves `(xi, phi_w(xi))` by `Psi` and compares the `F`-part at the
/// target fiber with the graph over the `E`-part. The discrepancy lies in
/// `F_{theta^t w}`, where the linear flow expands; it is pulled back by
/// `Phi-hat^{-t}` before taking norms so that tabulation errors are not
/// amplified by the expansion.
pub fn check_invariance(
    psi: &PsiEvaluator,
    phi: &GraphFunction,
    samples: &[Sample],
    budget: InvarianceBudget,
) -> Result<InvarianceReport> {
    let f = phi.fibers();
    let fine = psi.halved();
    let norm = psi.cocycle.norm_kind();
    let d = f.dim();
    let residual = |x: &DVector<f64>, s: &Sample, back: &nalgebra::DMatrix<f64>| -> (f64, bool) {
        let target = s.fiber + s.steps;
        let e = f.proj_p(target) * x;
        let mut c = vec![0.0; f.dim_e()];
        f.coords(target, e.as_slice(), &mut c);
        let mut y = vec![0.0; d];
        let clamped = phi.eval_coords_into(target, &c, &mut y);
        let diff = f.proj_q(target) * x - DVector::from_vec(y);
        (norm.vector(&(back * diff)), clamped)
    };
    let rows = samples
        .par_iter()
        .map(|s| -> Result<(f64, f64, bool)> {
            if s.fiber + s.steps >= f.len() {
                return Err(Error::Domain(format!(
                    "sample at fiber {} with {} steps leaves the tabulated orbit",
                    s.fiber, s.steps
                )));
            }
            let xi = f.lift_vector(s.fiber, &s.xi);
            let nx = norm.vector(&xi);
            if nx == 0.0 {
                return Ok((0.0, 0.0, false));
            }
            let x0 = &xi + phi.eval(s.fiber, &xi);
            let t = s.steps as f64 * f.step();
            let w = f.point(s.fiber);
            let back = psi.cocycle.fiber_inverse_matrix(t, w)?;
            let (r, clamped) = residual(&psi.evolve(t, w, &x0)?, s, &back);
            Ok(match &fine {
                Some(fp) => {
                    let (rf, cf) = residual(&fp.evolve(t, w, &x0)?, s, &back);
                    (rf / nx, (r - rf).abs() / nx, clamped || cf)
                }
                None => (r / nx, 0.0, clamped),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut budget = budget;
    budget.step_allowance = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    budget.total = budget.stop_tol + budget.l_tail + budget.grid_allowance + budget.step_allowance;
    let (worst, at) =
        rows.iter().enumerate().fold(
            (0.0_f64, None),
            |(m, a), (i, r)| if r.0 > m { (r.0, Some(i)) } else { (m, a) },
        );
    Ok(InvarianceReport {
        max_residual: worst,
        witness: at.map(|i| samples[i].clone()),
        samples: samples.len(),
        clamps: rows.iter().filter(|r| r.2).count(),
        pass: worst <= budget.total,
        budget,
        assumption: (psi.cocycle.time_domain() == TimeDomain::Continuous)
            .then_some("solutions of the perturbed equation are assumed unique"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// `max ‖Psi(xi + phi(xi)) - Psi(xi' + phi(xi'))‖ / (alpha_plus ‖xi - xi'‖)`.
    pub max_ratio: f64,
    pub bound: f64,
    pub witness: Option<Sample>,
    pub pairs: usize,
    /// Largest `‖Q x - phi(P x)‖` removed by re-projection after a step.
    pub max_correction: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Growth of pairs of trajectories starting on the graph, against
/// `bound alpha_plus ‖xi - xi'‖`. Trajectories advance one solver step at a
/// time and are put back on the graph after each step, so errors of the
/// tabulated graph are not amplified along `F`; the size of these
/// corrections is reported.
pub fn check_growth_bound(
    psi: &PsiEvaluator,
    phi: &GraphFunction,
    bound: f64,
    bounds: &DichotomyBounds,
    samples: &[Sample],
    tol: f64,
) -> Result<GrowthReport> {
    let f = phi.fibers();
    let norm = psi.cocycle.norm_kind();
    let dt = f.step();
    let shadow = |start: &[f64], s: &Sample| -> Result<(DVector<f64>, f64)> {
        let xi = f.lift_vector(s.fiber, start);
        let mut x = &xi + phi.eval(s.fiber, &xi);
        let mut corr = 0.0_f64;
        for k in 0..s.steps {
            let (i, j) = (s.fiber + k, s.fiber + k + 1);
            x = psi.evolve(dt, f.point(i), &x)?;
            let e = f.proj_p(j) * &x;
            let on = &e + phi.eval(j, &e);
            corr = corr.max(norm.vector(&(&x - &on)));
            x = on;
        }
        Ok((x, corr))
    };
    let rows = samples
        .par_iter()
        .map(|s| -> Result<(f64, f64)> {
            if s.fiber + s.steps >= f.len() {
                return Err(Error::Domain(format!(
                    "sample at fiber {} with {} steps leaves the tabulated orbit",
                    s.fiber, s.steps
                )));
            }
            let dx = norm.slice(
                &f.lift_vector(s.fiber, &s.xi)
                    .iter()
                    .zip(f.lift_vector(s.fiber, &s.xi_bar).iter())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            if dx == 0.0 {
                return Ok((0.0, 0.0));
            }
            let (a, ca) = shadow(&s.xi, s)?;
            let (b, cb) = shadow(&s.xi_bar, s)?;
            let t = s.steps as f64 * dt;
            let r = norm.vector(&(a - b)) / (bounds.alpha_plus(t, f.point(s.fiber))? * dx);
            Ok((r, ca.max(cb)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst, at) =
        rows.iter().enumerate().fold(
            (0.0_f64, None),
            |(m, a), (i, r)| if r.0 > m { (r.0, Some(i)) } else { (m, a) },
        );
    Ok(GrowthReport {
        max_ratio: worst,
        bound,
        witness: at.map(|i| samples[i].clone()),
        pairs: samples.len(),
        max_correction: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        tol,
        pass: worst <= bound * (1.0 + tol),
    })
}
