//! Lyapunov–Perron fixed point on tabulated function families.
//!
//! Fibers are the forward orbit `w_i = theta^{i step} w0`, `i = 0..=k_max +
//! horizon`. Trajectories `h` and the graph `phi` are tabulated on a tensor
//! grid in `E`-coordinates; `phi` is interpolated multilinearly when the
//! operators evaluate it at `h`.

mod grid;
mod mn;
mod tables;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use grid::{Fibers, XiGrid};
pub use mn::{solve_mn, MNConstants};
pub use tables::{alpha_table, metric_d1, metric_d2, GraphFunction, MembershipReport, TrajectoryFamily};

use crate::cocycle::{DichotomyBounds, SplitCocycle};
use crate::driving::{BasePoint, TimeDomain};
use crate::error::{Error, Result};
use crate::linalg::{matvec_acc, matvec_into, row_major, NormKind};
use crate::perturbation::{compute_sigma, compute_tau, Perturbation, SigmaTau};

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub cocycle: SplitCocycle,
    pub bounds: DichotomyBounds,
    pub perturbation: Perturbation,
    pub anchor: BasePoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSettings {
    /// Odd number of grid points per `E` axis.
    pub xi_points: usize,
    pub xi_extent: f64,
    /// Last fiber whose graph is reported.
    pub k_max: usize,
    /// Solver horizon (time units).
    pub horizon: f64,
    /// Fiber spacing and quadrature step; ignored in discrete time.
    pub time_step: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    /// Relative slack on measured contraction ratios.
    pub ratio_tol: f64,
    pub membership_tol: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            xi_points: 41,
            xi_extent: 1.0,
            k_max: 40,
            horizon: 40.0,
            time_step: 1.0,
            stop_tol: 1e-8,
            max_iters: 200,
            ratio_tol: 1e-6,
            membership_tol: 1e-9,
        }
    }
}

/// Ratios are only compared with `q` once the previous step is above this.
const RATIO_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub d1: f64,
    pub d2: f64,
    pub d: f64,
    pub ratio: Option<f64>,
    pub clamps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub sigma_tau: SigmaTau,
    pub constants: MNConstants,
    /// Number of applications of `T`.
    pub iterations: usize,
    pub converged: bool,
    pub final_step: f64,
    pub steps: Vec<IterationRecord>,
    pub max_ratio: Option<f64>,
    /// `ceil(log(tol (1 - q) / d_first) / log q)`.
    pub banach_bound: Option<usize>,
    /// Clamped interpolation queries in the last sweep.
    pub clamp_count: usize,
    pub membership: MembershipReport,
    /// Max over `(t, fiber <= k_max, xi)` of the defect of the `F`-part
    /// trajectory identity, relative to `‖xi‖`.
    pub equivalence_residual: f64,
    /// `M (1 + N) tau_tail`, relative to `‖xi‖`.
    pub l_tail: f64,
    pub stop_tol: f64,
    pub time_step: f64,
    pub grid_spacing: f64,
    /// Metrics are sups over the sampled orbit of one anchor.
    pub metric_scope: &'static str,
    #[serde(skip)]
    pub graph: GraphFunction,
    #[serde(skip)]
    pub trajectories: TrajectoryFamily,
}

impl SolveResult {
    /// `stop_tol + l_tail + N spacing`.
    pub fn invariance_budget(&self) -> f64 {
        self.stop_tol + self.l_tail + self.constants.n * self.grid_spacing
    }

    pub fn degraded(&self) -> bool {
        self.clamp_count > 0
    }
}

/// Discretized operators with everything that does not depend on the iterate
/// precomputed.
pub struct LpOperator {
    problem: LpProblem,
    settings: SolveSettings,
    grid: XiGrid,
    fibers: Arc<Fibers>,
    /// One-step matrices `Phi^step_{w_i}`, row-major.
    steps: Vec<Vec<f64>>,
    /// `back[i][m]`: `Phi-hat^{-m step}_{w_i} Q_{w_{i+m}}`, row-major.
    back: Vec<Vec<Vec<f64>>>,
    alpha: Vec<Vec<f64>>,
    sigma_tau: SigmaTau,
    constants: MNConstants,
    norm: NormKind,
}

fn horizon_steps(settings: &SolveSettings, domain: TimeDomain) -> Result<(usize, f64)> {
    let step = match domain {
        TimeDomain::Discrete => 1.0,
        TimeDomain::Continuous => settings.time_step,
    };
    if !(step > 0.0) || !(settings.horizon > 0.0) {
        return Err(Error::Config("horizon and time_step must be positive".into()));
    }
    let n = (settings.horizon / step).round();
    if (n * step - settings.horizon).abs() > 1e-9 * settings.horizon.max(1.0) || n < 1.0 {
        return Err(Error::GridMismatch(format!(
            "horizon {} is not a positive multiple of time step {step}",
            settings.horizon
        )));
    }
    Ok((n as usize, step))
}

/// `sigma` and `tau` as worst cases over every solver fiber, on the solver
/// time grid.
pub fn fiber_sigma_tau(problem: &LpProblem, settings: &SolveSettings) -> Result<SigmaTau> {
    let domain = problem.cocycle.time_domain();
    let (h, step) = horizon_steps(settings, domain)?;
    let quad = (domain == TimeDomain::Continuous).then_some(step);
    let ds = problem.cocycle.driving();
    let parts = (0..=settings.k_max + h)
        .into_par_iter()
        .map(|i| {
            let w = ds.evolve(i as f64 * step, &problem.anchor)?;
            let s = compute_sigma(&problem.bounds, &problem.perturbation, &w, settings.horizon, quad)?;
            let t = compute_tau(&problem.bounds, &problem.perturbation, &w, settings.horizon, quad)?;
            Ok(SigmaTau::new(&s, &t))
        })
        .collect::<Result<Vec<_>>>()?;
    SigmaTau::merge(&parts)
}

impl LpOperator {
    pub fn new(problem: LpProblem, settings: SolveSettings) -> Result<Self> {
        let c = &problem.cocycle;
        if problem.perturbation.dim() != c.fiber_dim() {
            return Err(Error::DimensionMismatch {
                expected: c.fiber_dim(),
                got: problem.perturbation.dim(),
            });
        }
        if problem.bounds.time_domain() != c.time_domain() {
            return Err(Error::Config(
                "bounds and cocycle use different time domains".into(),
            ));
        }
        if !(settings.stop_tol > 0.0) || settings.max_iters == 0 {
            return Err(Error::Config(
                "stop_tol must be positive and max_iters at least 1".into(),
            ));
        }
        let sigma_tau = fiber_sigma_tau(&problem, &settings)?;
        let tail = sigma_tau.tail().ok_or(Error::NoDecay {
            truncation: sigma_tau.tau_truncation,
        })?;
        if !sigma_tau.admissible {
            return Err(Error::Inadmissible {
                sigma: sigma_tau.sigma,
                tau: sigma_tau.tau + tail,
            });
        }
        let constants = solve_mn(sigma_tau.sigma, sigma_tau.tau + tail)?;
        let (h, step) = horizon_steps(&settings, c.time_domain())?;
        let fibers = Arc::new(Fibers::new(c, &problem.anchor, settings.k_max, h, step)?);
        let grid = XiGrid::new(fibers.dim_e(), settings.xi_points, settings.xi_extent)?;
        let steps = fibers
            .points()
            .par_iter()
            .map(|w| Ok(row_major(&c.matrix(step, w)?)))
            .collect::<Result<Vec<_>>>()?;
        let back = (0..fibers.len())
            .into_par_iter()
            .map(|i| {
                (0..=fibers.horizon_at(i))
                    .map(|m| {
                        Ok(row_major(
                            &c.fiber_inverse_matrix(m as f64 * step, fibers.point(i))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let alpha = alpha_table(&fibers, &problem.bounds)?;
        let norm = c.norm_kind();
        Ok(LpOperator {
            problem,
            settings,
            grid,
            fibers,
            steps,
            back,
            alpha,
            sigma_tau,
            constants,
            norm,
        })
    }

    pub fn sigma_tau(&self) -> &SigmaTau {
        &self.sigma_tau
    }

    pub fn constants(&self) -> &MNConstants {
        &self.constants
    }

    pub fn fibers(&self) -> &Arc<Fibers> {
        &self.fibers
    }

    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn settings(&self) -> &SolveSettings {
        &self.settings
    }

    pub fn problem(&self) -> &LpProblem {
        &self.problem
    }

    fn continuous(&self) -> bool {
        self.fibers.time_domain() == TimeDomain::Continuous
    }

    /// `(Phi^t xi, 0)`: the linear trajectories and the zero graph.
    pub fn initial(&self) -> (TrajectoryFamily, GraphFunction) {
        (
            TrajectoryFamily::linear(
                self.grid.clone(),
                self.fibers.clone(),
                &self.steps,
                self.constants.m,
            ),
            GraphFunction::zero(self.grid.clone(), self.fibers.clone(), self.constants.n),
        )
    }

    fn check_grids(&self, h: &TrajectoryFamily, phi: &GraphFunction) -> Result<()> {
        if h.grid != self.grid
            || phi.grid != self.grid
            || !Arc::ptr_eq(&h.fibers, &self.fibers)
            || !Arc::ptr_eq(&phi.fibers, &self.fibers)
        {
            return Err(Error::GridMismatch(
                "state tables were built for another operator".into(),
            ));
        }
        Ok(())
    }

    /// `g[i][k][node] = f_{w_{i+k}}(h_{k,w_i}(xi) + phi_{w_{i+k}}(h_{k,w_i}(xi)))`,
    /// flattened per fiber, plus the number of clamped lookups.
    fn forcing(&self, h: &TrajectoryFamily, phi: &GraphFunction) -> (Vec<Vec<f64>>, usize) {
        let f = &self.fibers;
        let (d, g) = (f.dim(), self.grid.len());
        let p = &self.problem.perturbation;
        let parts: Vec<(Vec<f64>, usize)> = (0..f.len())
            .into_par_iter()
            .map(|i| {
                let hi = f.horizon_at(i);
                let mut out = vec![0.0; (hi + 1) * g * d];
                let mut c = vec![0.0; f.dim_e()];
                let mut y = vec![0.0; d];
                let mut clamps = 0;
                for k in 0..=hi {
                    let j = i + k;
                    let w = f.point(j);
                    let lip_zero = p.is_zero();
                    for node in 0..g {
                        let at = (k * g + node) * d;
                        if lip_zero {
                            continue;
                        }
                        let x = h.value(i, k, node);
                        f.coords(j, x, &mut c);
                        clamps += phi.eval_coords_into(j, &c, &mut y) as usize;
                        for (yy, xx) in y.iter_mut().zip(x) {
                            *yy += xx;
                        }
                        p.eval_into(w, &y, &mut out[at..at + d]);
                    }
                }
                (out, clamps)
            })
            .collect();
        let clamps = parts.iter().map(|p| p.1).sum();
        (parts.into_iter().map(|p| p.0).collect(), clamps)
    }

    fn j_from(&self, forcing: &[Vec<f64>], h: &TrajectoryFamily) -> TrajectoryFamily {
        let f = &self.fibers;
        let (d, g) = (f.dim(), self.grid.len());
        let dt = f.step();
        let continuous = self.continuous();
        let hp1 = f.horizon() + 1;
        let mut values = vec![0.0; h.values.len()];
        values
            .par_chunks_mut(hp1 * g * d)
            .enumerate()
            .for_each(|(i, block)| {
                let fi = &forcing[i];
                let mut u = vec![0.0; d];
                let mut v = vec![0.0; d];
                for node in 0..g {
                    let xi = h.value(i, 0, node);
                    u.copy_from_slice(xi);
                    block[node * d..(node + 1) * d].copy_from_slice(xi);
                    for n in 0..f.horizon_at(i) {
                        let gn = &fi[(n * g + node) * d..(n * g + node + 1) * d];
                        let a = &self.steps[i + n];
                        if continuous {
                            let c = if n == 0 { 0.5 } else { 1.0 };
                            v.copy_from_slice(&u);
                            matvec_acc(&f.p[i + n], d, gn, dt * c, &mut v);
                            matvec_into(a, d, &v, &mut u);
                            let g1 = &fi[((n + 1) * g + node) * d..((n + 1) * g + node + 1) * d];
                            let at = ((n + 1) * g + node) * d;
                            let out = &mut block[at..at + d];
                            out.copy_from_slice(&u);
                            matvec_acc(&f.p[i + n + 1], d, g1, 0.5 * dt, out);
                        } else {
                            matvec_into(a, d, &u, &mut v);
                            matvec_acc(&f.p[i + n + 1], d, gn, 1.0, &mut v);
                            std::mem::swap(&mut u, &mut v);
                            let at = ((n + 1) * g + node) * d;
                            block[at..at + d].copy_from_slice(&u);
                        }
                    }
                }
            });
        TrajectoryFamily {
            grid: self.grid.clone(),
            fibers: self.fibers.clone(),
            values,
            growth_bound: self.constants.m,
        }
    }

    fn l_from(&self, forcing: &[Vec<f64>]) -> GraphFunction {
        let f = &self.fibers;
        let (d, g) = (f.dim(), self.grid.len());
        let dt = f.step();
        let continuous = self.continuous();
        let mut values = vec![0.0; f.len() * g * d];
        values.par_chunks_mut(g * d).enumerate().for_each(|(i, block)| {
            let hi = f.horizon_at(i);
            let fi = &forcing[i];
            for node in 0..g {
                let out = &mut block[node * d..(node + 1) * d];
                if continuous {
                    for k in 0..=hi {
                        let w = if k == 0 || k == hi { 0.5 } else { 1.0 };
                        let gk = &fi[(k * g + node) * d..(k * g + node + 1) * d];
                        matvec_acc(&self.back[i][k], d, gk, -dt * w, out);
                    }
                } else {
                    for k in 0..hi {
                        let gk = &fi[(k * g + node) * d..(k * g + node + 1) * d];
                        matvec_acc(&self.back[i][k + 1], d, gk, -1.0, out);
                    }
                }
            }
        });
        GraphFunction {
            grid: self.grid.clone(),
            fibers: self.fibers.clone(),
            values,
            lip_bound: self.constants.n,
        }
    }

    /// The trajectory half of `T`.
    pub fn apply_j(&self, h: &TrajectoryFamily, phi: &GraphFunction) -> Result<(TrajectoryFamily, usize)> {
        self.check_grids(h, phi)?;
        let (g, clamps) = self.forcing(h, phi);
        Ok((self.j_from(&g, h), clamps))
    }

    /// The graph half of `T`, truncated at the solver horizon.
    pub fn apply_l(&self, h: &TrajectoryFamily, phi: &GraphFunction) -> Result<(GraphFunction, usize)> {
        self.check_grids(h, phi)?;
        let (g, clamps) = self.forcing(h, phi);
        Ok((self.l_from(&g), clamps))
    }

    /// `M (1 + N) tau_tail`.
    pub fn l_tail(&self) -> f64 {
        self.constants.c * self.sigma_tau.tail().unwrap_or(f64::INFINITY)
    }

    /// Defect of the trajectory identity for the `F`-part, pulled back to the
    /// starting fiber: `Phi-hat^{-t} phi_{theta^t w}(h_t(xi)) - phi_w(xi)`
    /// against `int_0^t Phi-hat^{-s} Q f ds`, over fibers `0..=k_max` and
    /// relative to `‖xi‖`. The forward form amplifies round-off along `F`.
    pub fn equivalence_residual(&self, h: &TrajectoryFamily, phi: &GraphFunction) -> Result<f64> {
        self.check_grids(h, phi)?;
        let (forcing, _) = self.forcing(h, phi);
        let f = &self.fibers;
        let (d, g) = (f.dim(), self.grid.len());
        let dt = f.step();
        let continuous = self.continuous();
        let origin = self.grid.origin();
        let nodes = self.grid.nodes();
        let norm = self.norm;
        Ok((0..=f.k_max())
            .into_par_iter()
            .map(|i| {
                let fi = &forcing[i];
                let back = &self.back[i];
                let gk = |k: usize, node: usize| &fi[(k * g + node) * d..(k * g + node + 1) * d];
                let mut worst = 0.0_f64;
                let (mut acc, mut pred, mut c, mut y, mut xi) = (
                    vec![0.0; d],
                    vec![0.0; d],
                    vec![0.0; f.dim_e()],
                    vec![0.0; d],
                    vec![0.0; d],
                );
                for node in (0..g).filter(|&j| j != origin) {
                    f.lift(i, &nodes[node], &mut xi);
                    let nx = norm.slice(&xi);
                    acc.copy_from_slice(phi.value(i, node));
                    for n in 1..=f.horizon_at(i) {
                        if continuous {
                            let w = if n == 1 { 0.5 } else { 1.0 };
                            matvec_acc(&back[n - 1], d, gk(n - 1, node), dt * w, &mut acc);
                            pred.copy_from_slice(&acc);
                            matvec_acc(&back[n], d, gk(n, node), 0.5 * dt, &mut pred);
                        } else {
                            matvec_acc(&back[n], d, gk(n - 1, node), 1.0, &mut acc);
                            pred.copy_from_slice(&acc);
                        }
                        f.coords(i + n, h.value(i, n, node), &mut c);
                        phi.eval_coords_into(i + n, &c, &mut y);
                        matvec_acc(&back[n], d, &y, -1.0, &mut pred);
                        worst = worst.max(norm.slice(&pred) / nx);
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max))
    }

    fn banach_bound(&self, first: f64) -> Option<usize> {
        let (q, tol) = (self.constants.q, self.settings.stop_tol);
        if first <= tol {
            return Some(1);
        }
        if q <= 0.0 {
            return Some(2);
        }
        let k = ((tol * (1.0 - q) / first).ln() / q.ln()).ceil();
        k.is_finite().then_some(k.max(1.0) as usize)
    }

    /// Picard iteration of `T = (J, L)` from `(h0, phi0)`, stopping once the
    /// step in `d = d1 + d2` is at most `stop_tol`. A measured step ratio
    /// above `q (1 + ratio_tol)` aborts with `ContractionViolated`.
    pub fn iterate(&self, h0: TrajectoryFamily, phi0: GraphFunction) -> Result<SolveResult> {
        self.check_grids(&h0, &phi0)?;
        let (mut h, mut phi) = (h0, phi0);
        let mut steps: Vec<IterationRecord> = Vec::new();
        let mut membership: Option<MembershipReport> = None;
        let mut converged = false;
        let mut clamp_count = 0;
        let q = self.constants.q;
        for it in 1..=self.settings.max_iters {
            let (g, clamps) = self.forcing(&h, &phi);
            let h_new = self.j_from(&g, &h);
            let phi_new = self.l_from(&g);
            let d1 = tables::d1_with(&h_new, &h, &self.alpha, self.norm);
            let d2 = tables::d2_with(&phi_new, &phi, self.norm);
            let d = d1 + d2;
            let ratio = steps
                .last()
                .filter(|prev| prev.d > RATIO_FLOOR)
                .map(|prev| d / prev.d);
            if let Some(r) = ratio {
                if r > q * (1.0 + self.settings.ratio_tol) {
                    return Err(Error::ContractionViolated {
                        step: it,
                        ratio: r,
                        q,
                    });
                }
            }
            let m = tables::membership(
                &h_new,
                &phi_new,
                &self.alpha,
                self.norm,
                self.settings.membership_tol,
            );
            match membership.as_mut() {
                Some(acc) => {
                    let pass = acc.pass && m.pass;
                    acc.merge(&m);
                    acc.pass = pass;
                }
                None => membership = Some(m),
            }
            steps.push(IterationRecord {
                iteration: it,
                d1,
                d2,
                d,
                ratio,
                clamps,
            });
            clamp_count = clamps;
            h = h_new;
            phi = phi_new;
            if d <= self.settings.stop_tol {
                converged = true;
                break;
            }
        }
        let equivalence_residual = self.equivalence_residual(&h, &phi)?;
        let max_ratio = steps.iter().filter_map(|s| s.ratio).reduce(f64::max);
        Ok(SolveResult {
            sigma_tau: self.sigma_tau.clone(),
            constants: self.constants,
            iterations: steps.len(),
            converged,
            final_step: steps.last().map_or(f64::NAN, |s| s.d),
            banach_bound: steps.first().and_then(|s| self.banach_bound(s.d)),
            max_ratio,
            steps,
            clamp_count,
            membership: membership.unwrap_or_default(),
            equivalence_residual,
            l_tail: self.l_tail(),
            stop_tol: self.settings.stop_tol,
            time_step: self.fibers.step(),
            grid_spacing: self.grid.spacing(),
            metric_scope: "orbit-restricted (single anchor)",
            graph: phi,
            trajectories: h,
        })
    }
}

/// Builds the operator and iterates from the linear trajectories.
pub fn solve(problem: LpProblem, settings: SolveSettings) -> Result<SolveResult> {
    let op = LpOperator::new(problem, settings)?;
    let (h0, phi0) = op.initial();
    op.iterate(h0, phi0)
}
