//! The constants `sigma` (forward accumulation of the perturbation along
//! `E`) and `tau` (backward accumulation along `F`), evaluated on one orbit
//! up to a finite horizon.

use rayon::prelude::*;
use serde::Serialize;

use super::Perturbation;
use crate::cocycle::{DichotomyBounds, ScalarField};
use crate::driving::{BasePoint, DrivingSystem, TimeDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// The sup over `t` is taken over `(0, horizon]` only.
    pub horizon: f64,
    pub argmax_t: f64,
    /// Trapezoid step (continuous time only).
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TauEstimate {
    /// Truncated sum or integral.
    pub tau: f64,
    pub truncation: f64,
    /// Bound on the omitted tail; `None` if no geometric decay was detected.
    pub tail_bound: Option<f64>,
    /// Largest successive-term ratio over the final quarter.
    pub tail_ratio: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaTau {
    pub sigma: f64,
    pub tau: f64,
    pub sigma_horizon: f64,
    pub tau_truncation: f64,
    pub tau_tail_bound: Option<f64>,
    pub step: Option<f64>,
    /// Number of base points the sup was taken over.
    pub fibers: usize,
    pub admissible: bool,
}

impl SigmaTau {
    pub fn new(s: &SigmaEstimate, t: &TauEstimate) -> Self {
        let mut st = SigmaTau {
            sigma: s.sigma,
            tau: t.tau,
            sigma_horizon: s.horizon,
            tau_truncation: t.truncation,
            tau_tail_bound: t.tail_bound,
            step: s.step,
            fibers: 1,
            admissible: false,
        };
        st.admissible = st.is_admissible();
        st
    }

    /// Worst case over several base points.
    pub fn merge(parts: &[SigmaTau]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("no sigma/tau parts to merge".into()))?;
        let mut out = first.clone();
        for p in &parts[1..] {
            out.sigma = out.sigma.max(p.sigma);
            out.tau = out.tau.max(p.tau);
            out.tau_tail_bound = match (out.tau_tail_bound, p.tau_tail_bound) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            out.fibers += p.fibers;
        }
        out.admissible = out.is_admissible();
        Ok(out)
    }

    pub fn tail(&self) -> Option<f64> {
        self.tau_tail_bound
    }

    /// `sigma + tau + tail < 1/2`, failing closed when no tail bound exists.
    pub fn is_admissible(&self) -> bool {
        match self.tau_tail_bound {
            Some(tail) => self.sigma + self.tau + tail < 0.5,
            None => false,
        }
    }
}

/// Time grid `0, h, ..., horizon` (integers in discrete time).
pub(crate) fn time_grid(domain: TimeDomain, horizon: f64, step: Option<f64>) -> Result<(Vec<f64>, f64)> {
    if !(horizon > 0.0) {
        return Err(Error::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    match domain {
        TimeDomain::Discrete => {
            domain.check(horizon)?;
            Ok(((0..=horizon as usize).map(|n| n as f64).collect(), 1.0))
        }
        TimeDomain::Continuous => {
            let h = step.ok_or_else(|| Error::Invalid("continuous time needs a quadrature step".into()))?;
            if !(h > 0.0) {
                return Err(Error::Invalid(format!(
                    "quadrature step must be positive, got {h}"
                )));
            }
            let n = (horizon / h).round().max(1.0) as usize;
            if ((n as f64) * h - horizon).abs() > 1e-9 * horizon.max(1.0) {
                return Err(Error::GridMismatch(format!(
                    "horizon {horizon} is not a multiple of step {h}"
                )));
            }
            Ok(((0..=n).map(|j| j as f64 * h).collect(), h))
        }
    }
}

/// `sup_t (1/alpha_plus(t, w)) * [sum or integral over s in [0, t)] of
/// alpha_plus(t - s, theta^s w) Lip(f_{theta^s w}) alpha_plus(s, w)`.
///
/// Discrete time sums `s = 0..n-1` with the shifted forward bound
/// `alpha_plus(n - s - 1, theta^{s+1} w)`; continuous time uses the composite
/// trapezoid on the grid of `step`.
pub fn compute_sigma(
    bounds: &DichotomyBounds,
    p: &Perturbation,
    omega: &BasePoint,
    horizon: f64,
    step: Option<f64>,
) -> Result<SigmaEstimate> {
    let domain = bounds.time_domain();
    let (grid, h) = time_grid(domain, horizon, step)?;
    let ds = &bounds.driving;
    let pts = grid
        .iter()
        .map(|&t| ds.evolve(t, omega))
        .collect::<Result<Vec<_>>>()?;
    let lip: Vec<f64> = pts.iter().map(|w| p.lip(w)).collect();
    let ap0 = grid
        .iter()
        .map(|&t| bounds.alpha_plus(t, omega))
        .collect::<Result<Vec<_>>>()?;
    let discrete = domain == TimeDomain::Discrete;
    let values = (1..grid.len())
        .into_par_iter()
        .map(|n| -> Result<f64> {
            let mut acc = 0.0;
            if discrete {
                for k in 0..n {
                    if lip[k] == 0.0 {
                        continue;
                    }
                    acc += bounds.alpha_plus((n - k - 1) as f64, &pts[k + 1])? * lip[k] * ap0[k];
                }
            } else {
                for m in 0..=n {
                    if lip[m] == 0.0 {
                        continue;
                    }
                    let w = if m == 0 || m == n { 0.5 } else { 1.0 };
                    acc += w * bounds.alpha_plus((n - m) as f64 * h, &pts[m])? * lip[m] * ap0[m];
                }
                acc *= h;
            }
            Ok(acc / ap0[n])
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mut sigma, mut argmax_t) = (0.0_f64, 0.0);
    for (i, v) in values.iter().enumerate() {
        if *v > sigma {
            sigma = *v;
            argmax_t = grid[i + 1];
        }
    }
    Ok(SigmaEstimate {
        sigma,
        horizon,
        argmax_t,
        step: if discrete { None } else { Some(h) },
    })
}

/// Integrand or summand of `tau` on the grid, starting at `s = 0`.
fn tau_terms(
    bounds: &DichotomyBounds,
    p: &Perturbation,
    omega: &BasePoint,
    grid: &[f64],
    discrete: bool,
) -> Result<Vec<f64>> {
    let ds = &bounds.driving;
    // discrete: k = 0..T-1 uses alpha_minus(k+1); continuous: every node
    let count = if discrete { grid.len() - 1 } else { grid.len() };
    (0..count)
        .map(|k| {
            let s = grid[k];
            let w = ds.evolve(s, omega)?;
            let lip = p.lip(&w);
            if lip == 0.0 {
                return Ok(0.0);
            }
            let back = if discrete {
                bounds.alpha_minus(s + 1.0, omega)?
            } else {
                bounds.alpha_minus(s, omega)?
            };
            Ok(back * lip * bounds.alpha_plus(s, omega)?)
        })
        .collect()
}

/// Largest ratio of successive terms over the final quarter, `Some(0)` when
/// that stretch vanishes identically, `None` when a zero term is followed by
/// a nonzero one.
fn final_quarter_ratio(terms: &[f64]) -> Option<f64> {
    let n = terms.len();
    if n < 2 {
        return None;
    }
    let start = (3 * n / 4).min(n - 2);
    let mut r = 0.0_f64;
    for w in terms[start..].windows(2) {
        if w[0] == 0.0 {
            if w[1] != 0.0 {
                return None;
            }
            continue;
        }
        r = r.max(w[1] / w[0]);
    }
    Some(r)
}

/// Truncated `tau` with a geometric tail estimate.
///
/// Discrete time: `sum_{k < T} alpha_minus(k+1, w) Lip(f_{theta^k w})
/// alpha_plus(k, w)`, tail `last * r / (1 - r)`. Continuous time: trapezoid on
/// `[0, T]`, tail `last * step / ln(1/r)`.
pub fn compute_tau(
    bounds: &DichotomyBounds,
    p: &Perturbation,
    omega: &BasePoint,
    truncation: f64,
    step: Option<f64>,
) -> Result<TauEstimate> {
    let domain = bounds.time_domain();
    let discrete = domain == TimeDomain::Discrete;
    let (grid, h) = time_grid(domain, truncation, step)?;
    let terms = tau_terms(bounds, p, omega, &grid, discrete)?;
    let tau = if discrete {
        terms.iter().sum()
    } else {
        let n = terms.len() - 1;
        h * (0.5 * (terms[0] + terms[n]) + terms[1..n].iter().sum::<f64>())
    };
    let last = *terms.last().unwrap_or(&0.0);
    let tail_ratio = final_quarter_ratio(&terms);
    let tail_bound = match tail_ratio {
        Some(r) if last == 0.0 && r < 1.0 => Some(0.0),
        Some(r) if r < 1.0 && r > 0.0 => Some(if discrete {
            last * r / (1.0 - r)
        } else {
            last * h / (1.0 / r).ln()
        }),
        _ => None,
    };
    Ok(TauEstimate {
        tau,
        truncation,
        tail_bound,
        tail_ratio,
        step: if discrete { None } else { Some(h) },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TemperednessReport {
    pub lambda: f64,
    /// Same sup over half the horizon, for the growth diagnostic.
    pub lambda_half: f64,
    pub gamma: f64,
    pub horizon: f64,
    /// `lambda` still grew between half and full horizon.
    pub growing: bool,
}

/// `max_{|t| <= horizon} e^{-gamma |t|} K(theta^t w)` on a sample grid.
pub fn temperedness_lambda(
    k: &ScalarField,
    gamma: f64,
    omega: &BasePoint,
    driving: &DrivingSystem,
    horizon: f64,
    step: Option<f64>,
) -> Result<TemperednessReport> {
    if !(gamma > 0.0) {
        return Err(Error::Invalid(format!("gamma must be positive, got {gamma}")));
    }
    let (grid, _) = time_grid(driving.time_domain, horizon, step)?;
    let mut lambda = 0.0_f64;
    let mut lambda_half = 0.0_f64;
    for &t in &grid {
        for s in [t, -t] {
            let v = (-gamma * s.abs()).exp() * k(&driving.evolve(s, omega)?);
            lambda = lambda.max(v);
            if s.abs() <= 0.5 * horizon {
                lambda_half = lambda_half.max(v);
            }
        }
    }
    Ok(TemperednessReport {
        lambda,
        lambda_half,
        gamma,
        horizon,
        growing: lambda > lambda_half * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{scalar_field, BoundFamily};
    use proptest::prelude::*;

    fn toy_bounds() -> DichotomyBounds {
        DichotomyBounds::new(
            BoundFamily::TemperedExp {
                k: scalar_field(|_| 1.0),
                a: scalar_field(|_| -0.5),
                b: scalar_field(|_| -0.4),
            },
            DrivingSystem::integer_shift(),
        )
    }

    fn toy_perturbation(eps: f64) -> Perturbation {
        Perturbation::sine(2, scalar_field(move |w| eps * 0.5f64.powf(w.x().abs())))
    }

    #[test]
    fn zero_perturbation_gives_zero() {
        let b = toy_bounds();
        let p = Perturbation::zero(2);
        let w = BasePoint::scalar(0.0);
        assert_eq!(compute_sigma(&b, &p, &w, 40.0, None).unwrap().sigma, 0.0);
        let t = compute_tau(&b, &p, &w, 40.0, None).unwrap();
        assert_eq!(t.tau, 0.0);
        assert_eq!(t.tail_bound, Some(0.0));
    }

    #[test]
    fn toy_values_match_closed_forms() {
        let eps = 0.05;
        let b = toy_bounds();
        let p = toy_perturbation(eps);
        let w = BasePoint::scalar(0.0);
        let s = compute_sigma(&b, &p, &w, 40.0, None).unwrap();
        let expect = 2.0 * eps * 0.5f64.exp() * (1.0 - 0.5f64.powi(40));
        assert!((s.sigma - expect).abs() < 1e-12);
        let t = compute_tau(&b, &p, &w, 40.0, None).unwrap();
        let r = (-0.9f64).exp() / 2.0;
        let expect = eps * (-0.4f64).exp() / (1.0 - r);
        assert!((t.tau - expect).abs() < 1e-12);
        assert!((t.tail_ratio.unwrap() - r).abs() < 1e-12);
        assert!(t.tail_bound.unwrap() < 1e-20);
    }

    #[test]
    fn no_decay_fails_closed() {
        let b = DichotomyBounds::new(
            BoundFamily::TemperedExp {
                k: scalar_field(|_| 1.0),
                a: scalar_field(|_| -0.1),
                b: scalar_field(|_| 0.2),
            },
            DrivingSystem::integer_shift(),
        );
        let p = Perturbation::sine(2, scalar_field(|_| 0.01));
        let t = compute_tau(&b, &p, &BasePoint::scalar(0.0), 30.0, None).unwrap();
        assert!(t.tail_bound.is_none());
        let s = compute_sigma(&b, &p, &BasePoint::scalar(0.0), 30.0, None).unwrap();
        assert!(!SigmaTau::new(&s, &t).admissible);
    }

    #[test]
    fn continuous_constant_rates() {
        // alpha+ = e^{-t}, alpha- = e^{-t}, Lip = c: sigma = c t sup -> c H,
        // tau = c / 2 (up to trapezoid error)
        let b = DichotomyBounds::new(
            BoundFamily::TemperedExp {
                k: scalar_field(|_| 1.0),
                a: scalar_field(|_| -1.0),
                b: scalar_field(|_| -1.0),
            },
            DrivingSystem::planar_shift(TimeDomain::Continuous),
        );
        let c = 0.01;
        let p = Perturbation::sine(2, scalar_field(move |_| c));
        let w = BasePoint::planar(0.0, 0.0);
        let s = compute_sigma(&b, &p, &w, 5.0, Some(0.01)).unwrap();
        assert!((s.sigma - c * 5.0).abs() < 1e-12);
        let t = compute_tau(&b, &p, &w, 20.0, Some(0.01)).unwrap();
        assert!((t.tau + t.tail_bound.unwrap() - c / 2.0).abs() < 1e-6);
        assert!(compute_sigma(&b, &p, &w, 5.0, None).is_err());
        assert!(matches!(
            compute_sigma(&b, &p, &w, 5.0, Some(0.3)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn lambda_examples() {
        let ds = DrivingSystem::planar_shift(TimeDomain::Continuous);
        let w = BasePoint::planar(0.0, 0.0);
        let one = scalar_field(|_| 1.0);
        let r = temperedness_lambda(&one, 0.1, &w, &ds, 10.0, Some(0.1)).unwrap();
        assert_eq!(r.lambda, 1.0);
        assert!(!r.growing);

        let poly = scalar_field(|w| 1.5 * (1.0 + w.x() * w.x()).powf(0.1 * (1.0 + w.y() * w.y())));
        let r1 = temperedness_lambda(&poly, 0.1, &w, &ds, 40.0, Some(0.1)).unwrap();
        let r2 = temperedness_lambda(&poly, 0.1, &w, &ds, 80.0, Some(0.1)).unwrap();
        assert!(r1.lambda >= 1.5);
        assert!(!r2.growing);
        assert!((r2.lambda - r1.lambda).abs() < 1e-12);

        let wild = scalar_field(|w| w.x().abs().exp());
        let r1 = temperedness_lambda(&wild, 0.5, &w, &ds, 10.0, Some(0.1)).unwrap();
        let r2 = temperedness_lambda(&wild, 0.5, &w, &ds, 20.0, Some(0.1)).unwrap();
        assert!(r1.growing && r2.growing);
        assert!(r2.lambda > 100.0 * r1.lambda);
        assert!(temperedness_lambda(&one, 0.0, &w, &ds, 10.0, Some(0.1)).is_err());
    }

    proptest! {
        #[test]
        fn horizon_monotone(eps in 0.0f64..0.2, h1 in 1usize..30, extra in 0usize..20, x0 in -5i32..5) {
            let b = toy_bounds();
            let p = toy_perturbation(eps);
            let w = BasePoint::scalar(x0 as f64);
            let (a, c) = (h1 as f64, (h1 + extra) as f64);
            prop_assert!(compute_sigma(&b, &p, &w, c, None).unwrap().sigma
                >= compute_sigma(&b, &p, &w, a, None).unwrap().sigma);
            prop_assert!(compute_tau(&b, &p, &w, c, None).unwrap().tau
                >= compute_tau(&b, &p, &w, a, None).unwrap().tau);
        }

        #[test]
        fn scaling_is_linear(eps in 0.001f64..0.2, factor in 0.1f64..10.0) {
            let b = toy_bounds();
            let p = toy_perturbation(eps);
            let q = p.scaled(factor);
            let w = BasePoint::scalar(0.0);
            let s1 = compute_sigma(&b, &p, &w, 30.0, None).unwrap().sigma;
            let s2 = compute_sigma(&b, &q, &w, 30.0, None).unwrap().sigma;
            prop_assert!((s2 - factor * s1).abs() <= 1e-12 * s2.max(1.0));
            let t1 = compute_tau(&b, &p, &w, 30.0, None).unwrap().tau;
            let t2 = compute_tau(&b, &q, &w, 30.0, None).unwrap().tau;
            prop_assert!((t2 - factor * t1).abs() <= 1e-12 * t2.max(1.0));
        }

        #[test]
        fn zero_sigma_for_any_bounds(a in -2.0f64..1.0, k in 1.0f64..3.0) {
            let b = DichotomyBounds::new(
                BoundFamily::TemperedExp {
                    k: scalar_field(move |_| k),
                    a: scalar_field(move |_| a),
                    b: scalar_field(|_| -0.4),
                },
                DrivingSystem::integer_shift(),
            );
            let s = compute_sigma(&b, &Perturbation::zero(2), &BasePoint::scalar(0.0), 20.0, None).unwrap();
            prop_assert_eq!(s.sigma, 0.0);
        }
    }
}
