//! Nonlinear perturbations `f_w` with `f_w(0) = 0`, their declared Lipschitz
//! constants, and the quantities derived from them.

mod corollary;
mod sigma_tau;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use corollary::{
    check_corollary, CorollaryData, CorollaryKind, Hypothesis, HypothesisReport, ScanSettings,
};
pub use sigma_tau::{
    compute_sigma, compute_tau, temperedness_lambda, SigmaEstimate, SigmaTau, TauEstimate, TemperednessReport,
};

use crate::cocycle::ScalarField;
use crate::driving::BasePoint;
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, NormKind};

/// `(w, x, out)`: writes `f_w(x)` into `out`.
pub type FiberMap = Arc<dyn Fn(&BasePoint, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationTag {
    Zero,
    /// `c(w) (sin(x_0 + x_1), ..., sin(x_{d-2} + x_{d-1}), sin x_0) / 2`.
    Sine,
    Linear,
    Custom,
}

#[derive(Clone)]
pub struct Perturbation {
    dim: usize,
    f: FiberMap,
    lip: ScalarField,
    tag: PerturbationTag,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("dim", &self.dim)
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

impl Perturbation {
    pub fn new(dim: usize, f: FiberMap, lip: ScalarField) -> Self {
        Perturbation {
            dim,
            f,
            lip,
            tag: PerturbationTag::Custom,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Perturbation {
            dim,
            f: Arc::new(|_, _, out| out.iter_mut().for_each(|o| *o = 0.0)),
            lip: Arc::new(|_| 0.0),
            tag: PerturbationTag::Zero,
        }
    }

    /// The sine family scaled by `c(w)`. Each component is `c/2 sin` of a sum
    /// of at most two coordinates, so `c(w)` is a Lipschitz constant in the
    /// max norm.
    pub fn sine(dim: usize, c: ScalarField) -> Self {
        let cf = c.clone();
        let f: FiberMap = Arc::new(move |w, x, out| {
            let s = 0.5 * cf(w);
            let d = x.len();
            if d == 1 {
                out[0] = s * x[0].sin();
                return;
            }
            for i in 0..d - 1 {
                out[i] = s * (x[i] + x[i + 1]).sin();
            }
            out[d - 1] = s * x[0].sin();
        });
        Perturbation {
            dim,
            f,
            lip: c,
            tag: PerturbationTag::Sine,
        }
    }

    /// `f_w(x) = c(w) A x` with declared constant `c(w) ‖A‖`.
    pub fn linear(m: DMatrix<f64>, c: ScalarField, kind: NormKind) -> Self {
        let dim = m.nrows();
        let norm = operator_norm(&m, kind);
        let cf = c.clone();
        let f: FiberMap = Arc::new(move |w, x, out| {
            let s = cf(w);
            for (i, o) in out.iter_mut().enumerate() {
                *o = s * (0..x.len()).map(|j| m[(i, j)] * x[j]).sum::<f64>();
            }
        });
        Perturbation {
            dim,
            f,
            lip: Arc::new(move |w| c(w) * norm),
            tag: PerturbationTag::Linear,
        }
    }

    /// Same map and declared constant multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let f = self.f.clone();
        let lip = self.lip.clone();
        Perturbation {
            dim: self.dim,
            f: Arc::new(move |w, x, out| {
                f(w, x, out);
                out.iter_mut().for_each(|o| *o *= factor);
            }),
            lip: Arc::new(move |w| factor.abs() * lip(w)),
            tag: self.tag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> PerturbationTag {
        self.tag
    }

    pub fn is_zero(&self) -> bool {
        self.tag == PerturbationTag::Zero
    }

    /// Declared `Lip(f_w)`.
    pub fn lip(&self, omega: &BasePoint) -> f64 {
        (self.lip)(omega)
    }

    pub fn lip_field(&self) -> ScalarField {
        self.lip.clone()
    }

    #[inline]
    pub fn eval_into(&self, omega: &BasePoint, x: &[f64], out: &mut [f64]) {
        (self.f)(omega, x, out)
    }

    pub fn eval(&self, omega: &BasePoint, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut out = DVector::zeros(self.dim);
        self.eval_into(omega, x.as_slice(), out.as_mut_slice());
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LipScan {
    pub max_quotient: f64,
    pub declared: f64,
    /// `‖f_w(0)‖`.
    pub zero_residual: f64,
    pub pairs: usize,
}

/// Largest sampled difference quotient `‖f(x) - f(y)‖ / ‖x - y‖`. Fails with
/// the witness pair if it beats the declared constant by more than `tol`
/// (relative), or if `f_w(0)` is not zero.
pub fn lip_scan(
    p: &Perturbation,
    omega: &BasePoint,
    pairs: &[(DVector<f64>, DVector<f64>)],
    kind: NormKind,
    tol: f64,
) -> Result<LipScan> {
    let declared = p.lip(omega);
    let zero = p.eval(omega, &DVector::zeros(p.dim()))?;
    let zero_residual = kind.vector(&zero);
    if zero_residual > 1e-12 {
        return Err(Error::Invalid(format!(
            "f(0) = {:?} is not zero at omega = {:?}",
            zero.as_slice(),
            omega.coords
        )));
    }
    let mut max_quotient = 0.0_f64;
    for (x, y) in pairs {
        let dx = kind.distance(x.as_slice(), y.as_slice());
        if dx == 0.0 {
            return Err(Error::Invalid("lip_scan pairs must be distinct".into()));
        }
        let fx = p.eval(omega, x)?;
        let fy = p.eval(omega, y)?;
        let q = kind.distance(fx.as_slice(), fy.as_slice()) / dx;
        if q > declared * (1.0 + tol) {
            return Err(Error::LipschitzViolated {
                declared,
                quotient: q,
                x: x.as_slice().to_vec(),
                y: y.as_slice().to_vec(),
            });
        }
        max_quotient = max_quotient.max(q);
    }
    Ok(LipScan {
        max_quotient,
        declared,
        zero_residual,
        pairs: pairs.len(),
    })
}

/// Random point pairs in `[-extent, extent]^dim`: half close pairs (offset
/// at most `1e-3 extent`) and half far pairs.
pub fn random_pairs(dim: usize, count: usize, extent: f64, seed: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = DVector::from_fn(dim, |_, _| rng.gen_range(-extent..=extent));
        let y = if out.len() % 2 == 0 {
            let h = 1e-3 * extent;
            &x + DVector::from_fn(dim, |_, _| rng.gen_range(-h..=h))
        } else {
            DVector::from_fn(dim, |_, _| rng.gen_range(-extent..=extent))
        };
        if x != y {
            out.push((x, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::scalar_field;
    use proptest::prelude::*;

    #[test]
    fn zero_scan_is_zero() {
        let p = Perturbation::zero(2);
        let s = lip_scan(
            &p,
            &BasePoint::scalar(0.0),
            &random_pairs(2, 100, 1.0, 1),
            NormKind::Max,
            1e-9,
        )
        .unwrap();
        assert_eq!(s.max_quotient, 0.0);
    }

    #[test]
    fn sine_scan_respects_declared_constant() {
        let c = 0.3;
        let p = Perturbation::sine(2, scalar_field(move |_| c));
        let pairs = random_pairs(2, 2000, 3.0, 7);
        let s = lip_scan(&p, &BasePoint::scalar(0.0), &pairs, NormKind::Max, 1e-9).unwrap();
        assert!(s.max_quotient <= c);
        assert!(s.max_quotient > 0.5 * c);
    }

    #[test]
    fn understated_constant_is_flagged() {
        let c = 0.3;
        let honest = Perturbation::sine(2, scalar_field(move |_| c));
        let liar = Perturbation::new(2, honest.f.clone(), scalar_field(move |_| c / 2.0));
        let mut pairs = random_pairs(2, 2000, 3.0, 7);
        pairs.push((
            DVector::from_vec(vec![1e-4, 1e-4]),
            DVector::from_vec(vec![-1e-4, -1e-4]),
        ));
        let err = lip_scan(&liar, &BasePoint::scalar(0.0), &pairs, NormKind::Max, 1e-9).unwrap_err();
        match err {
            Error::LipschitzViolated { quotient, x, y, .. } => {
                assert!(quotient > c / 2.0);
                assert_ne!(x, y);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn nonzero_origin_is_rejected() {
        let p = Perturbation::new(
            1,
            Arc::new(|_, x, out| out[0] = 1.0 + x[0]),
            scalar_field(|_| 1.0),
        );
        assert!(lip_scan(&p, &BasePoint::scalar(0.0), &[], NormKind::Max, 1e-9).is_err());
    }

    #[test]
    fn linear_declared_constant() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 1.0, 1.0]);
        let p = Perturbation::linear(m, scalar_field(|_| 0.1), NormKind::Max);
        assert!((p.lip(&BasePoint::scalar(0.0)) - 0.3).abs() < 1e-15);
        let s = lip_scan(
            &p,
            &BasePoint::scalar(0.0),
            &random_pairs(2, 500, 1.0, 3),
            NormKind::Max,
            1e-9,
        )
        .unwrap();
        assert!(s.max_quotient <= 0.3 * (1.0 + 1e-12));
    }

    proptest! {
        #[test]
        fn sine_is_lipschitz_in_max_norm(
            d in 1usize..5,
            c in 0.0f64..2.0,
            seed in 0u64..1000,
        ) {
            let p = Perturbation::sine(d, scalar_field(move |_| c));
            let pairs = random_pairs(d, 50, 4.0, seed);
            prop_assert!(lip_scan(&p, &BasePoint::scalar(0.0), &pairs, NormKind::Max, 1e-12).is_ok());
        }
    }
}
