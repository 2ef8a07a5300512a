use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Fibers, XiGrid};
use crate::cocycle::DichotomyBounds;
use crate::error::{Error, Result};
use crate::linalg::NormKind;

/// Tabulated graph map `phi_w: E_w -> F_w` on every fiber, piecewise
/// multilinear in the `E`-coordinates.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    pub(crate) grid: XiGrid,
    pub(crate) fibers: Arc<Fibers>,
    /// `values[(i * G + node) * d + r]`.
    pub(crate) values: Vec<f64>,
    pub(crate) lip_bound: f64,
}

/// Tabulated trajectories `h_{t,w}(xi) in E_{theta^t w}` for `t` on the
/// solver time grid.
#[derive(Debug, Clone)]
pub struct TrajectoryFamily {
    pub(crate) grid: XiGrid,
    pub(crate) fibers: Arc<Fibers>,
    /// `values[((i * (H + 1) + n) * G + node) * d + r]`.
    pub(crate) values: Vec<f64>,
    pub(crate) growth_bound: f64,
}

impl GraphFunction {
    pub fn zero(grid: XiGrid, fibers: Arc<Fibers>, lip_bound: f64) -> Self {
        let len = fibers.len() * grid.len() * fibers.dim();
        GraphFunction {
            grid,
            fibers,
            values: vec![0.0; len],
            lip_bound,
        }
    }

    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn fibers(&self) -> &Fibers {
        &self.fibers
    }

    /// Declared Lipschitz bound `N`.
    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn value(&self, fiber: usize, node: usize) -> &[f64] {
        let d = self.fibers.dim();
        let at = (fiber * self.grid.len() + node) * d;
        &self.values[at..at + d]
    }

    pub fn value_mut(&mut self, fiber: usize, node: usize) -> &mut [f64] {
        let d = self.fibers.dim();
        let at = (fiber * self.grid.len() + node) * d;
        &mut self.values[at..at + d]
    }

    /// Interpolated `phi` at `E`-coordinates `c`; returns whether `c` was
    /// clamped onto the grid.
    pub fn eval_coords_into(&self, fiber: usize, c: &[f64], out: &mut [f64]) -> bool {
        let mut corners = [(0usize, 0.0f64); 16];
        let mut heap;
        let n = 1usize << self.grid.dim();
        let corners: &mut [(usize, f64)] = if n <= 16 {
            &mut corners[..n]
        } else {
            heap = vec![(0usize, 0.0f64); n];
            &mut heap
        };
        let clamped = self.grid.locate(c, corners);
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(node, w) in corners.iter() {
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(self.value(fiber, node)) {
                    *o += w * v;
                }
            }
        }
        clamped
    }

    /// `phi_w(xi)` for an ambient `xi in E_w`.
    pub fn eval(&self, fiber: usize, xi: &DVector<f64>) -> DVector<f64> {
        let mut c = vec![0.0; self.fibers.dim_e()];
        self.fibers.coords(fiber, xi.as_slice(), &mut c);
        let mut out = DVector::zeros(self.fibers.dim());
        self.eval_coords_into(fiber, &c, out.as_mut_slice());
        out
    }

    /// Rows `(fiber, xi coordinates, phi)` for fibers `0..=k_max`.
    pub fn rows(&self) -> Vec<(usize, Vec<f64>, Vec<f64>)> {
        let nodes = self.grid.nodes();
        (0..=self.fibers.k_max())
            .flat_map(|i| {
                nodes
                    .iter()
                    .enumerate()
                    .map(move |(j, c)| (i, c.clone(), self.value(i, j).to_vec()))
            })
            .collect()
    }
}

impl TrajectoryFamily {
    /// `h_{n,w}(xi) = Phi^n_w xi`, from the one-step matrices of each fiber.
    pub(crate) fn linear(grid: XiGrid, fibers: Arc<Fibers>, steps: &[Vec<f64>], growth_bound: f64) -> Self {
        let d = fibers.dim();
        let g = grid.len();
        let hp1 = fibers.horizon() + 1;
        let mut values = vec![0.0; fibers.len() * hp1 * g * d];
        values
            .par_chunks_mut(hp1 * g * d)
            .enumerate()
            .for_each(|(i, block)| {
                let mut x = vec![0.0; d];
                let mut y = vec![0.0; d];
                for node in 0..g {
                    fibers.lift(i, &grid.node(node), &mut x);
                    block[node * d..(node + 1) * d].copy_from_slice(&x);
                    for n in 1..=fibers.horizon_at(i) {
                        crate::linalg::matvec_into(&steps[i + n - 1], d, &x, &mut y);
                        std::mem::swap(&mut x, &mut y);
                        let at = (n * g + node) * d;
                        block[at..at + d].copy_from_slice(&x);
                    }
                }
            });
        TrajectoryFamily {
            grid,
            fibers,
            values,
            growth_bound,
        }
    }

    pub fn grid(&self) -> &XiGrid {
        &self.grid
    }

    pub fn fibers(&self) -> &Fibers {
        &self.fibers
    }

    /// Declared bound `M`.
    pub fn growth_bound(&self) -> f64 {
        self.growth_bound
    }

    pub fn value(&self, fiber: usize, n: usize, node: usize) -> &[f64] {
        let d = self.fibers.dim();
        let g = self.grid.len();
        let at = ((fiber * (self.fibers.horizon() + 1) + n) * g + node) * d;
        &self.values[at..at + d]
    }

    pub fn value_mut(&mut self, fiber: usize, n: usize, node: usize) -> &mut [f64] {
        let d = self.fibers.dim();
        let g = self.grid.len();
        let at = ((fiber * (self.fibers.horizon() + 1) + n) * g + node) * d;
        &mut self.values[at..at + d]
    }
}

/// `alpha_plus(n step, w_i)` for every fiber and `n <= horizon_at(i)`.
pub fn alpha_table(fibers: &Fibers, bounds: &DichotomyBounds) -> Result<Vec<Vec<f64>>> {
    (0..fibers.len())
        .into_par_iter()
        .map(|i| {
            (0..=fibers.horizon_at(i))
                .map(|n| bounds.alpha_plus(n as f64 * fibers.step(), fibers.point(i)))
                .collect()
        })
        .collect()
}

fn check_same(a: &XiGrid, b: &XiGrid, fa: &Fibers, fb: &Fibers, what: &str) -> Result<()> {
    if a != b || fa.len() != fb.len() || fa.dim() != fb.dim() || fa.horizon() != fb.horizon() {
        return Err(Error::GridMismatch(format!(
            "{what} tables live on different grids"
        )));
    }
    Ok(())
}

pub(crate) fn d1_with(h: &TrajectoryFamily, g: &TrajectoryFamily, alpha: &[Vec<f64>], norm: NormKind) -> f64 {
    let fibers = &h.fibers;
    let nodes = h.grid.nodes();
    let origin = h.grid.origin();
    let d = fibers.dim();
    let mut xi = vec![0.0; d];
    let norms: Vec<f64> = nodes
        .iter()
        .map(|c| {
            fibers.lift(0, c, &mut xi);
            norm.slice(&xi)
        })
        .collect();
    (0..fibers.len())
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0_f64;
            let mut x = vec![0.0; d];
            let mut diff = vec![0.0; d];
            for n in 1..=fibers.horizon_at(i) {
                for node in (0..nodes.len()).filter(|&j| j != origin) {
                    let nx = if fibers.e_basis[i] == fibers.e_basis[0] {
                        norms[node]
                    } else {
                        fibers.lift(i, &nodes[node], &mut x);
                        norm.slice(&x)
                    };
                    for ((o, a), b) in diff.iter_mut().zip(h.value(i, n, node)).zip(g.value(i, n, node)) {
                        *o = a - b;
                    }
                    worst = worst.max(norm.slice(&diff) / (alpha[i][n] * nx));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

pub(crate) fn d2_with(phi: &GraphFunction, psi: &GraphFunction, norm: NormKind) -> f64 {
    let fibers = &phi.fibers;
    let nodes = phi.grid.nodes();
    let origin = phi.grid.origin();
    let d = fibers.dim();
    (0..fibers.len())
        .into_par_iter()
        .map(|i| {
            let mut worst = 0.0_f64;
            let mut x = vec![0.0; d];
            let mut diff = vec![0.0; d];
            for (node, c) in nodes.iter().enumerate().filter(|&(j, _)| j != origin) {
                fibers.lift(i, c, &mut x);
                for ((o, a), b) in diff.iter_mut().zip(phi.value(i, node)).zip(psi.value(i, node)) {
                    *o = a - b;
                }
                worst = worst.max(norm.slice(&diff) / norm.slice(&x));
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// `sup ‖h - g‖ / (alpha_plus ‖xi‖)` over tabulated `(t, fiber, xi != 0)`.
pub fn metric_d1(
    h: &TrajectoryFamily,
    g: &TrajectoryFamily,
    bounds: &DichotomyBounds,
    norm: NormKind,
) -> Result<f64> {
    check_same(&h.grid, &g.grid, &h.fibers, &g.fibers, "trajectory")?;
    let alpha = alpha_table(&h.fibers, bounds)?;
    Ok(d1_with(h, g, &alpha, norm))
}

/// `sup ‖phi - psi‖ / ‖xi‖` over tabulated `(fiber, xi != 0)`.
pub fn metric_d2(phi: &GraphFunction, psi: &GraphFunction, norm: NormKind) -> Result<f64> {
    check_same(&phi.grid, &psi.grid, &phi.fibers, &psi.fibers, "graph")?;
    Ok(d2_with(phi, psi, norm))
}

/// Sampled membership of an iterate in the spaces of bounded trajectories
/// and Lipschitz graphs. Ratios are measured quotients over declared bounds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MembershipReport {
    /// `max ‖h(xi) - h(xi')‖ / (M alpha_plus ‖xi - xi'‖)`.
    pub trajectory_lip_ratio: f64,
    /// `max ‖phi(xi) - phi(xi')‖ / (N ‖xi - xi'‖)`, or the raw quotient when
    /// `N = 0`.
    pub graph_lip_ratio: f64,
    /// `max ‖P phi‖`.
    pub graph_outside_f: f64,
    /// `max ‖Q h‖`.
    pub trajectory_outside_e: f64,
    /// `h_0(xi) = xi`, `h_t(0) = 0`, `phi(0) = 0` exactly.
    pub pinned: bool,
    pub pairs: usize,
    pub tol: f64,
    pub pass: bool,
}

impl MembershipReport {
    pub(crate) fn merge(&mut self, other: &MembershipReport) {
        self.trajectory_lip_ratio = self.trajectory_lip_ratio.max(other.trajectory_lip_ratio);
        self.graph_lip_ratio = self.graph_lip_ratio.max(other.graph_lip_ratio);
        self.graph_outside_f = self.graph_outside_f.max(other.graph_outside_f);
        self.trajectory_outside_e = self.trajectory_outside_e.max(other.trajectory_outside_e);
        self.pinned &= other.pinned;
        self.pairs = self.pairs.max(other.pairs);
        self.pass &= other.pass;
    }
}

/// Node pairs used for the Lipschitz checks: all pairs on small grids, else
/// axis-adjacent pairs plus every node paired with the origin.
pub(crate) fn node_pairs(grid: &XiGrid) -> Vec<(usize, usize)> {
    let g = grid.len();
    if g <= 64 {
        return (0..g).flat_map(|a| (a + 1..g).map(move |b| (a, b))).collect();
    }
    let origin = grid.origin();
    let p = grid.points();
    let mut out = Vec::new();
    for a in 0..g {
        let mut stride = 1;
        for _ in 0..grid.dim() {
            if (a / stride) % p + 1 < p {
                out.push((a, a + stride));
            }
            stride *= p;
        }
        if a != origin {
            out.push((a.min(origin), a.max(origin)));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub(crate) fn membership(
    h: &TrajectoryFamily,
    phi: &GraphFunction,
    alpha: &[Vec<f64>],
    norm: NormKind,
    tol: f64,
) -> MembershipReport {
    let fibers = &h.fibers;
    let d = fibers.dim();
    let pairs = node_pairs(&h.grid);
    let nodes = h.grid.nodes();
    let origin = h.grid.origin();
    let (m, nb) = (h.growth_bound, phi.lip_bound);
    let parts: Vec<MembershipReport> = (0..fibers.len())
        .into_par_iter()
        .map(|i| {
            let mut r = MembershipReport {
                pinned: true,
                ..Default::default()
            };
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            let mut diff = vec![0.0; d];
            let pq = |mat: &[f64], v: &[f64]| {
                let mut o = vec![0.0; d];
                crate::linalg::matvec_into(mat, d, v, &mut o);
                norm.slice(&o)
            };
            for (node, c) in nodes.iter().enumerate() {
                fibers.lift(i, c, &mut x);
                r.pinned &= h.value(i, 0, node) == x.as_slice();
                r.graph_outside_f = r.graph_outside_f.max(pq(&fibers.p[i], phi.value(i, node)));
                for n in 0..=fibers.horizon_at(i) {
                    r.trajectory_outside_e = r
                        .trajectory_outside_e
                        .max(pq(&fibers.q[i + n], h.value(i, n, node)));
                }
            }
            r.pinned &= phi.value(i, origin).iter().all(|&v| v == 0.0);
            for n in 0..=fibers.horizon_at(i) {
                r.pinned &= h.value(i, n, origin).iter().all(|&v| v == 0.0);
            }
            for &(a, b) in &pairs {
                fibers.lift(i, &nodes[a], &mut x);
                fibers.lift(i, &nodes[b], &mut y);
                for ((o, u), v) in diff.iter_mut().zip(&x).zip(&y) {
                    *o = u - v;
                }
                let dx = norm.slice(&diff);
                for ((o, u), v) in diff.iter_mut().zip(phi.value(i, a)).zip(phi.value(i, b)) {
                    *o = u - v;
                }
                let q = norm.slice(&diff) / dx;
                r.graph_lip_ratio = r.graph_lip_ratio.max(if nb > 0.0 { q / nb } else { q });
                for n in 1..=fibers.horizon_at(i) {
                    for ((o, u), v) in diff.iter_mut().zip(h.value(i, n, a)).zip(h.value(i, n, b)) {
                        *o = u - v;
                    }
                    let q = norm.slice(&diff) / (m * alpha[i][n] * dx);
                    r.trajectory_lip_ratio = r.trajectory_lip_ratio.max(q);
                }
            }
            r
        })
        .collect();
    let mut out = MembershipReport {
        pinned: true,
        pass: true,
        pairs: pairs.len(),
        tol,
        ..Default::default()
    };
    for p in &parts {
        out.merge(p);
    }
    out.pairs = pairs.len();
    out.tol = tol;
    let graph_ok = if nb > 0.0 {
        out.graph_lip_ratio <= 1.0 + tol
    } else {
        out.graph_lip_ratio <= tol
    };
    out.pass = out.pinned
        && graph_ok
        && out.trajectory_lip_ratio <= 1.0 + tol
        && out.graph_outside_f <= tol
        && out.trajectory_outside_e <= tol;
    out
}
