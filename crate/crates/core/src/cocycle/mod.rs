//! Linear cocycles over a driving system, with a projection-invariant
//! splitting `R^d = E_omega (+) F_omega` and the backward map on `F`.

mod bounds;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use bounds::{
    check_decay_condition, verify_dichotomy, BoundFamily, DecayReport, DichotomyBounds, DichotomyReport,
    Worst,
};

use crate::driving::{BasePoint, DrivingSystem, TimeDomain};
use crate::error::{Error, Result};
use crate::linalg::{
    min_singular_value, operator_norm, pseudo_inverse, range_basis, relative_matrix_residual, NormKind,
};

/// Real-valued function on the base.
pub type ScalarField = Arc<dyn Fn(&BasePoint) -> f64 + Send + Sync>;
/// Real-valued function of `(t, omega)`.
pub type TimeField = Arc<dyn Fn(f64, &BasePoint) -> f64 + Send + Sync>;
/// `(t, omega) -> Phi^t_omega`.
pub type MatrixFn = Arc<dyn Fn(f64, &BasePoint) -> DMatrix<f64> + Send + Sync>;
/// `omega -> P_omega`.
pub type ProjectionFn = Arc<dyn Fn(&BasePoint) -> DMatrix<f64> + Send + Sync>;

pub fn scalar_field(f: impl Fn(&BasePoint) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

pub fn time_field(f: impl Fn(f64, &BasePoint) -> f64 + Send + Sync + 'static) -> TimeField {
    Arc::new(f)
}

const BASIS_TOL: f64 = 1e-10;

/// A linear cocycle together with its invariant projections.
#[derive(Clone)]
pub struct SplitCocycle {
    fiber_dim: usize,
    driving: DrivingSystem,
    phi: MatrixFn,
    proj: ProjectionFn,
    norm_kind: NormKind,
}

impl fmt::Debug for SplitCocycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SplitCocycle")
            .field("fiber_dim", &self.fiber_dim)
            .field("driving", &self.driving)
            .field("norm_kind", &self.norm_kind)
            .finish_non_exhaustive()
    }
}

/// An ambient vector split along `E_omega (+) F_omega`.
#[derive(Debug, Clone)]
pub struct SplitVector {
    /// Coordinates of `P x` in the orthonormal basis of `E_omega`.
    pub xi: DVector<f64>,
    /// Coordinates of `Q x` in the orthonormal basis of `F_omega`.
    pub eta: DVector<f64>,
    pub e_basis: DMatrix<f64>,
    pub f_basis: DMatrix<f64>,
    pub omega: BasePoint,
}

impl SplitVector {
    pub fn e_part(&self) -> DVector<f64> {
        &self.e_basis * &self.xi
    }

    pub fn f_part(&self) -> DVector<f64> {
        &self.f_basis * &self.eta
    }

    pub fn reconstruct(&self) -> DVector<f64> {
        self.e_part() + self.f_part()
    }
}

/// Result of a backward solve on the kernel fiber.
#[derive(Debug, Clone)]
pub struct FiberInverse {
    pub value: DVector<f64>,
    /// `‖Phi^t v - eta‖`.
    pub residual: f64,
    /// Smallest singular value of the restricted map.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub idempotence: f64,
    pub equivariance: f64,
    pub kernel_mapping: f64,
    pub cocycle_law: f64,
    pub identity_at_zero: f64,
    /// Smallest singular value of `Phi^t` restricted to `F`; infinite when `F = {0}`.
    pub invertibility_margin: f64,
    pub sample_times: Vec<f64>,
    pub sample_points: Vec<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

impl SplitCocycle {
    pub fn from_fns(
        fiber_dim: usize,
        driving: DrivingSystem,
        phi: MatrixFn,
        proj: ProjectionFn,
        norm_kind: NormKind,
    ) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(Error::Invalid("fiber dimension must be positive".into()));
        }
        let c = SplitCocycle {
            fiber_dim,
            driving,
            phi,
            proj,
            norm_kind,
        };
        for p in c.driving.reference_points() {
            let m = (c.proj)(&p);
            if m.nrows() != fiber_dim || m.ncols() != fiber_dim {
                return Err(Error::DimensionMismatch {
                    expected: fiber_dim,
                    got: m.nrows(),
                });
            }
        }
        Ok(c)
    }

    /// `Phi^t = diag(exp(rate_i t))` with `P` projecting onto the first
    /// `stable_dim` coordinates.
    pub fn diagonal_exp(
        rates: Vec<f64>,
        stable_dim: usize,
        driving: DrivingSystem,
        norm_kind: NormKind,
    ) -> Result<Self> {
        let d = rates.len();
        if stable_dim > d {
            return Err(Error::Invalid(format!(
                "stable_dim {stable_dim} exceeds fiber dimension {d}"
            )));
        }
        let phi: MatrixFn = Arc::new(move |t, _| {
            DMatrix::from_diagonal(&DVector::from_iterator(d, rates.iter().map(|r| (r * t).exp())))
        });
        let proj: ProjectionFn = Arc::new(move |_| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                (0..d).map(|i| if i < stable_dim { 1.0 } else { 0.0 }),
            ))
        });
        Self::from_fns(d, driving, phi, proj, norm_kind)
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn driving(&self) -> &DrivingSystem {
        &self.driving
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn time_domain(&self) -> TimeDomain {
        self.driving.time_domain
    }

    fn check_time(&self, t: f64) -> Result<()> {
        self.driving.time_domain.check(t)?;
        if t < 0.0 {
            return Err(Error::Domain(format!("cocycle is forward only, got t = {t}")));
        }
        Ok(())
    }

    fn check_vec(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.fiber_dim {
            return Err(Error::DimensionMismatch {
                expected: self.fiber_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `Phi^t_omega`; the identity at `t = 0`.
    pub fn matrix(&self, t: f64, omega: &BasePoint) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        if t == 0.0 {
            return Ok(DMatrix::identity(self.fiber_dim, self.fiber_dim));
        }
        Ok((self.phi)(t, omega))
    }

    pub fn proj_p(&self, omega: &BasePoint) -> DMatrix<f64> {
        (self.proj)(omega)
    }

    pub fn proj_q(&self, omega: &BasePoint) -> DMatrix<f64> {
        DMatrix::identity(self.fiber_dim, self.fiber_dim) - (self.proj)(omega)
    }

    /// Orthonormal basis of `E_omega`.
    pub fn e_basis(&self, omega: &BasePoint) -> DMatrix<f64> {
        range_basis(&self.proj_p(omega), BASIS_TOL)
    }

    /// Orthonormal basis of `F_omega`.
    pub fn f_basis(&self, omega: &BasePoint) -> DMatrix<f64> {
        range_basis(&self.proj_q(omega), BASIS_TOL)
    }

    pub fn split(&self, omega: &BasePoint, x: &DVector<f64>) -> Result<SplitVector> {
        self.check_vec(x)?;
        let e_basis = self.e_basis(omega);
        let f_basis = self.f_basis(omega);
        let px = self.proj_p(omega) * x;
        let qx = x - &px;
        Ok(SplitVector {
            xi: e_basis.transpose() * px,
            eta: f_basis.transpose() * qx,
            e_basis,
            f_basis,
            omega: omega.clone(),
        })
    }

    /// `Phi^t_omega x` for `t >= 0`.
    pub fn evolve_linear(&self, t: f64, omega: &BasePoint, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec(x)?;
        Ok(self.matrix(t, omega)? * x)
    }

    /// Restricted map `A = Phi^t_omega B_F` and the basis `B_F`.
    fn restricted(&self, t: f64, omega: &BasePoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let b = self.f_basis(omega);
        let a = self.matrix(t, omega)? * &b;
        Ok((a, b))
    }

    /// The unique `v` in `F_omega` with `Phi^t_omega v = eta`, for `eta` in
    /// `F_{theta^t omega}`.
    pub fn fiber_inverse(
        &self,
        t: f64,
        omega: &BasePoint,
        eta: &DVector<f64>,
        tol: f64,
    ) -> Result<FiberInverse> {
        self.check_vec(eta)?;
        let target = self.driving.evolve(t, omega)?;
        let scale = self.norm_kind.vector(eta).max(1.0);
        let off_kernel = self.norm_kind.vector(&(self.proj_p(&target) * eta)) / scale;
        if off_kernel > tol {
            return Err(Error::NotInKernel { residual: off_kernel });
        }
        let (a, b) = self.restricted(t, omega)?;
        if b.ncols() == 0 {
            return Ok(FiberInverse {
                value: DVector::zeros(self.fiber_dim),
                residual: self.norm_kind.vector(eta),
                margin: f64::INFINITY,
            });
        }
        let margin = min_singular_value(&a);
        if !(margin > tol) {
            return Err(Error::Singular { margin });
        }
        let coords = pseudo_inverse(&a) * eta;
        let value = &b * coords;
        let residual = self.norm_kind.vector(&(self.matrix(t, omega)? * &value - eta));
        Ok(FiberInverse {
            value,
            residual,
            margin,
        })
    }

    /// Matrix of `x -> Phi-hat^{-t} Q_{theta^t omega} x`, mapping the whole
    /// fiber at `theta^t omega` into `F_omega`.
    pub fn fiber_inverse_matrix(&self, t: f64, omega: &BasePoint) -> Result<DMatrix<f64>> {
        let target = self.driving.evolve(t, omega)?;
        let (a, b) = self.restricted(t, omega)?;
        if b.ncols() == 0 {
            return Ok(DMatrix::zeros(self.fiber_dim, self.fiber_dim));
        }
        let margin = min_singular_value(&a);
        if !(margin > 0.0) || !margin.is_finite() {
            return Err(Error::Singular { margin });
        }
        Ok(b * pseudo_inverse(&a) * self.proj_q(&target))
    }

    /// Sampled check of the splitting axioms and of the cocycle law.
    pub fn verify_splitting(&self, times: &[f64], points: &[BasePoint], tol: f64) -> Result<SplittingReport> {
        if times.is_empty() || points.is_empty() {
            return Err(Error::Invalid("verify_splitting needs nonempty samples".into()));
        }
        let kind = self.norm_kind;
        let mut rep = SplittingReport {
            idempotence: 0.0,
            equivariance: 0.0,
            kernel_mapping: 0.0,
            cocycle_law: 0.0,
            identity_at_zero: 0.0,
            invertibility_margin: f64::INFINITY,
            sample_times: times.to_vec(),
            sample_points: points.iter().map(|p| p.coords.clone()).collect(),
            tol,
            pass: false,
        };
        let id = DMatrix::<f64>::identity(self.fiber_dim, self.fiber_dim);
        for omega in points {
            let p = self.proj_p(omega);
            rep.idempotence = rep
                .idempotence
                .max(relative_matrix_residual(&(&p * &p), &p, kind));
            rep.identity_at_zero = rep
                .identity_at_zero
                .max(operator_norm(&(self.matrix(0.0, omega)? - &id), kind));
            for &t in times {
                let target = self.driving.evolve(t, omega)?;
                let m = self.matrix(t, omega)?;
                let p_target = self.proj_p(&target);
                rep.equivariance =
                    rep.equivariance
                        .max(relative_matrix_residual(&(&p_target * &m), &(&m * &p), kind));
                let scale = operator_norm(&m, kind).max(1.0);
                let leak = &p_target * &m * self.proj_q(omega);
                rep.kernel_mapping = rep.kernel_mapping.max(operator_norm(&leak, kind) / scale);
                let (a, b) = self.restricted(t, omega)?;
                if b.ncols() > 0 {
                    rep.invertibility_margin = rep.invertibility_margin.min(min_singular_value(&a));
                }
                for &s in times {
                    let mid = self.driving.evolve(s, omega)?;
                    let whole = self.matrix(t + s, omega)?;
                    let composed = self.matrix(t, &mid)? * self.matrix(s, omega)?;
                    rep.cocycle_law = rep
                        .cocycle_law
                        .max(relative_matrix_residual(&whole, &composed, kind));
                }
            }
        }
        rep.pass = rep.idempotence <= tol
            && rep.equivariance <= tol
            && rep.kernel_mapping <= tol
            && rep.cocycle_law <= tol
            && rep.identity_at_zero <= tol
            && rep.invertibility_margin > tol;
        Ok(rep)
    }
}

/// The planar cocycle built from a weight `K >= 1` and two scalar cocycles
/// `phi`, `psi`:
///
/// ```text
/// P = [[1, K - 1], [0, 0]],   Q = [[0, 1 - K], [0, 1]]
/// Phi^t_w = phi(t, w) P_w + K(w) / (K(theta^t w) psi(t, w)) Q_{theta^t w}
/// ```
///
/// The factor law `phi(t + s, w) = phi(t, theta^s w) phi(s, w)` (and the same
/// for `psi`) is spot-checked on reference points before returning.
pub fn example2_cocycle(
    k: ScalarField,
    phi: TimeField,
    psi: TimeField,
    driving: DrivingSystem,
) -> Result<SplitCocycle> {
    if driving.base_dim() == 0 {
        return Err(Error::Invalid("driving system has empty base".into()));
    }
    let times: &[f64] = match driving.time_domain {
        TimeDomain::Discrete => &[0.0, 1.0, 2.0, 5.0],
        TimeDomain::Continuous => &[0.0, 0.5, 1.3, 2.0, 4.7],
    };
    for omega in driving.reference_points() {
        for &t in times {
            for &s in times {
                let mid = driving.evolve(s, &omega)?;
                for f in [&phi, &psi] {
                    let lhs = f(t + s, &omega);
                    let rhs = f(t, &mid) * f(s, &omega);
                    let residual = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
                    if !(residual <= 1e-10) {
                        return Err(Error::FactorLaw {
                            t,
                            s,
                            omega: omega.coords.clone(),
                            residual,
                        });
                    }
                }
            }
        }
    }
    let ds = driving.clone();
    let kp = k.clone();
    let proj: ProjectionFn = Arc::new(move |w| example2_p(kp(w)));
    let phi_fn: MatrixFn = Arc::new(move |t, w| {
        let target = ds.evolve(t, w).expect("time checked by caller");
        let kw = k(w);
        let kt = k(&target);
        example2_p(kw) * phi(t, w) + example2_q(kt) * (kw / (kt * psi(t, w)))
    });
    SplitCocycle::from_fns(2, driving, phi_fn, proj, NormKind::Max)
}

fn example2_p(k: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, k - 1.0, 0.0, 0.0])
}

fn example2_q(k: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0 - k, 0.0, 1.0])
}

/// `S_Z(n, w) = sum_{r < n} Z(theta^r w)`.
pub fn birkhoff_sum(
    z: &dyn Fn(&BasePoint) -> f64,
    n: f64,
    omega: &BasePoint,
    driving: &DrivingSystem,
) -> Result<f64> {
    if !(n >= 0.0) || n.fract() != 0.0 {
        return Err(Error::Domain(format!(
            "Birkhoff sum length must be a nonnegative integer, got {n}"
        )));
    }
    let mut acc = 0.0;
    let mut p = omega.clone();
    for _ in 0..n as usize {
        acc += z(&p);
        p = driving.evolve(1.0, &p)?;
    }
    Ok(acc)
}
