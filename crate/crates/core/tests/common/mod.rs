//! Reference values computed without the library's own routines.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Lipschitz constant of the toy perturbation on fiber `k`.
pub fn toy_lip(k: i64) -> f64 {
    0.05 * 0.5f64.powi(k.unsigned_abs() as i32)
}

/// Brute-force `sigma` for the toy system: `alpha_plus(n) = e^{-0.5 n}`,
/// sup over anchors `fibers` and `1 <= n <= horizon`, direct summation.
pub fn toy_sigma(fibers: std::ops::RangeInclusive<i64>, horizon: usize) -> f64 {
    let ap = |n: usize| (-0.5 * n as f64).exp();
    let mut best = 0.0_f64;
    for w in fibers {
        for n in 1..=horizon {
            let mut s = 0.0;
            for k in 0..n {
                s += ap(n - k - 1) * toy_lip(w + k as i64) * ap(k);
            }
            best = best.max(s / ap(n));
        }
    }
    best
}

/// Brute-force `tau` for the toy system: `alpha_minus(n) = e^{-0.4 n}`,
/// summed over `0 <= k < terms`.
pub fn toy_tau(fibers: std::ops::RangeInclusive<i64>, terms: usize) -> f64 {
    let mut best = 0.0_f64;
    for w in fibers {
        let mut s = 0.0;
        for k in 0..terms {
            s += (-0.4 * (k + 1) as f64).exp() * toy_lip(w + k as i64) * (-0.5 * k as f64).exp();
        }
        best = best.max(s);
    }
    best
}

/// `(sigma - (M-1)/(M(1+N)), tau - N/(M(1+N)))`.
pub fn mn_residuals(sigma: f64, tau: f64, m: f64, n: f64) -> (f64, f64) {
    let d = m * (1.0 + n);
    ((sigma - (m - 1.0) / d).abs(), (tau - n / d).abs())
}

/// Forward bound of the polynomial dichotomy in closed form.
pub fn polynomial_alpha_plus(c: f64, lambda: f64, eps: f64, t: f64, x: f64, y: f64) -> f64 {
    let e = 1.0 + y * y;
    c * ((1.0 + (x + t) * (x + t)) / (1.0 + x * x)).powf(lambda * e) * (1.0 + x * x).powf(eps * e)
}

/// The toy one-step matrix and perturbation, written out by hand.
pub fn toy_step() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![(-0.5f64).exp(), 0.4f64.exp()]))
}

/// Canonical sine perturbation in two dimensions:
/// `(c/2) (sin(x1 + x2), sin(x1))`.
pub fn toy_forcing(k: i64, x: &DVector<f64>) -> DVector<f64> {
    let s = 0.5 * toy_lip(k);
    DVector::from_vec(vec![s * (x[0] + x[1]).sin(), s * x[0].sin()])
}

/// `Psi^n x` from the closed-form sum, with every earlier iterate also
/// taken from the sum.
pub fn toy_psi_sum(n: usize, w: i64, x: &DVector<f64>) -> DVector<f64> {
    let a = toy_step();
    let pow = |m: usize| {
        let mut p = DMatrix::identity(2, 2);
        for _ in 0..m {
            p = &a * p;
        }
        p
    };
    let mut xs: Vec<DVector<f64>> = vec![x.clone()];
    for m in 1..=n {
        let mut v = pow(m) * x;
        for (k, xk) in xs.iter().enumerate() {
            v += pow(m - k - 1) * toy_forcing(w + k as i64, xk);
        }
        xs.push(v);
    }
    xs.pop().unwrap()
}
