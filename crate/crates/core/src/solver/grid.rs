use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cocycle::SplitCocycle;
use crate::driving::{BasePoint, TimeDomain};
use crate::error::{Error, Result};
use crate::linalg::row_major;

/// Tensor grid `[-R, R]^e` in `E`-coordinates with an odd number of points
/// per axis, so the origin is a node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiGrid {
    dim: usize,
    points: usize,
    extent: f64,
}

impl XiGrid {
    pub fn new(dim: usize, points: usize, extent: f64) -> Result<Self> {
        if points < 3 || points.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "xi_points must be odd and at least 3, got {points}"
            )));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Config(format!("xi_extent must be positive, got {extent}")));
        }
        Ok(XiGrid { dim, points, extent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    /// Number of nodes, `points^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> usize {
        let mid = self.points / 2;
        (0..self.dim).fold(0, |acc, _| acc * self.points + mid)
    }

    fn axis_value(&self, j: usize) -> f64 {
        let mid = (self.points / 2) as i64;
        (j as i64 - mid) as f64 * self.spacing()
    }

    /// Coordinates of node `idx` (last axis fastest).
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        let mut r = idx;
        for a in (0..self.dim).rev() {
            c[a] = self.axis_value(r % self.points);
            r /= self.points;
        }
        c
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Multilinear interpolation weights of `c`, written as `(node, weight)`
    /// into `corners` (length `2^dim`). Coordinates outside the grid are
    /// clamped to its boundary; the return value reports whether that
    /// happened.
    pub fn locate(&self, c: &[f64], corners: &mut [(usize, f64)]) -> bool {
        let h = self.spacing();
        let mid = (self.points / 2) as f64;
        let last = (self.points - 1) as f64;
        let mut clamped = false;
        let mut cell = [(0usize, 0.0f64); 8];
        let mut cell_vec;
        let cells: &mut [(usize, f64)] = if self.dim <= 8 {
            &mut cell[..self.dim]
        } else {
            cell_vec = vec![(0usize, 0.0f64); self.dim];
            &mut cell_vec
        };
        for (a, &x) in c.iter().enumerate() {
            let mut u = x / h + mid;
            if !(u >= 0.0) {
                clamped |= u < -1e-9;
                u = 0.0;
            } else if u > last {
                clamped |= u > last + 1e-9;
                u = last;
            }
            let j = (u.floor() as usize).min(self.points - 2);
            cells[a] = (j, u - j as f64);
        }
        for (mask, slot) in corners.iter_mut().enumerate() {
            let mut idx = 0;
            let mut w = 1.0;
            for (a, &(j, t)) in cells.iter().enumerate() {
                let up = (mask >> (self.dim - 1 - a)) & 1 == 1;
                idx = idx * self.points + j + up as usize;
                w *= if up { t } else { 1.0 - t };
            }
            *slot = (idx, w);
        }
        clamped
    }
}

/// Base points `theta^{i step} w0` for `i = 0..=k_max + horizon`, with the
/// splitting data the solver needs at each of them.
#[derive(Debug, Clone)]
pub struct Fibers {
    pub(crate) points: Vec<BasePoint>,
    pub(crate) time_domain: TimeDomain,
    /// Time between consecutive fibers (1 in discrete time).
    pub(crate) step: f64,
    pub(crate) k_max: usize,
    /// Solver horizon in steps.
    pub(crate) horizon: usize,
    pub(crate) dim: usize,
    pub(crate) dim_e: usize,
    /// Row-major `d x e` orthonormal bases of `E`.
    pub(crate) e_basis: Vec<Vec<f64>>,
    /// Row-major `d x d` projections onto `E` and `F`.
    pub(crate) p: Vec<Vec<f64>>,
    pub(crate) q: Vec<Vec<f64>>,
}

impl Fibers {
    pub fn new(
        cocycle: &SplitCocycle,
        anchor: &BasePoint,
        k_max: usize,
        horizon: usize,
        step: f64,
    ) -> Result<Self> {
        let time_domain = cocycle.time_domain();
        if time_domain == TimeDomain::Discrete && step != 1.0 {
            return Err(Error::Config("discrete time uses unit steps".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {step}")));
        }
        if horizon == 0 {
            return Err(Error::Config("solver horizon must be at least one step".into()));
        }
        let ds = cocycle.driving();
        let count = k_max + horizon + 1;
        let points = (0..count)
            .map(|i| ds.evolve(i as f64 * step, anchor))
            .collect::<Result<Vec<_>>>()?;
        let dim = cocycle.fiber_dim();
        let bases: Vec<DMatrix<f64>> = points.iter().map(|w| cocycle.e_basis(w)).collect();
        let dim_e = bases[0].ncols();
        if dim_e == 0 {
            return Err(Error::Config(
                "stable subspace E is trivial along the orbit".into(),
            ));
        }
        if let Some((i, b)) = bases.iter().enumerate().find(|(_, b)| b.ncols() != dim_e) {
            return Err(Error::Invalid(format!(
                "rank of P changes along the orbit: {} at fiber {i}, {dim_e} at fiber 0",
                b.ncols()
            )));
        }
        Ok(Fibers {
            e_basis: bases.iter().map(row_major).collect(),
            p: points.iter().map(|w| row_major(&cocycle.proj_p(w))).collect(),
            q: points.iter().map(|w| row_major(&cocycle.proj_q(w))).collect(),
            points,
            time_domain,
            step,
            k_max,
            horizon,
            dim,
            dim_e,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &BasePoint {
        &self.points[i]
    }

    pub fn points(&self) -> &[BasePoint] {
        &self.points
    }

    pub fn time_domain(&self) -> TimeDomain {
        self.time_domain
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Horizon in steps.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    /// Horizon available at fiber `i` without leaving the tabulated orbit.
    pub fn horizon_at(&self, i: usize) -> usize {
        self.horizon.min(self.len() - 1 - i)
    }

    /// Ambient vector `B_i c`.
    pub fn lift(&self, i: usize, c: &[f64], out: &mut [f64]) {
        let b = &self.e_basis[i];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..self.dim_e).map(|k| b[r * self.dim_e + k] * c[k]).sum();
        }
    }

    /// `E`-coordinates `B_i^T x` of a vector in `E_i`.
    pub fn coords(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let b = &self.e_basis[i];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..self.dim).map(|r| b[r * self.dim_e + k] * x[r]).sum();
        }
    }

    pub fn proj_p(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.p[i])
    }

    pub fn proj_q(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.q[i])
    }

    pub fn lift_vector(&self, i: usize, c: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.lift(i, c, out.as_mut_slice());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_origin() {
        let g = XiGrid::new(2, 5, 1.0).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.node(g.origin()), vec![0.0, 0.0]);
        assert_eq!(g.node(0), vec![-1.0, -1.0]);
        assert_eq!(g.node(24), vec![1.0, 1.0]);
        assert!(XiGrid::new(1, 4, 1.0).is_err());
        assert!(XiGrid::new(1, 5, 0.0).is_err());
    }

    #[test]
    fn locate_reproduces_linear_functions() {
        let g = XiGrid::new(2, 7, 1.5).unwrap();
        let f = |c: &[f64]| 0.3 * c[0] - 1.2 * c[1] + 0.7;
        let vals: Vec<f64> = g.nodes().iter().map(|c| f(c)).collect();
        let mut corners = vec![(0, 0.0); 4];
        for c in [[0.1, -0.37], [1.5, 1.5], [-1.49, 0.0], [0.77, 1.2]] {
            assert!(!g.locate(&c, &mut corners));
            let v: f64 = corners.iter().map(|&(i, w)| w * vals[i]).sum();
            assert!((v - f(&c)).abs() < 1e-12);
        }
        assert!(g.locate(&[2.0, 0.0], &mut corners));
        let v: f64 = corners.iter().map(|&(i, w)| w * vals[i]).sum();
        assert!((v - f(&[1.5, 0.0])).abs() < 1e-12);
    }
}
