//! Dichotomy bound families and their sampled verification.

use std::fmt;

use serde::Serialize;

use super::{birkhoff_sum, ScalarField, SplitCocycle, TimeField};
use crate::driving::{BasePoint, DrivingSystem, TimeDomain};
use crate::error::{Error, Result};
use crate::linalg::operator_norm;

/// Analytic families for the forward bound `alpha_plus(t, w)` and the
/// backward bound `alpha_minus(t, w)`. The latter is the bound valid at the
/// endpoint `theta^t w`, written as a function of the starting point `w`.
#[derive(Clone)]
pub enum BoundFamily {
    /// `K(w) e^{a(w) t}` and `K(theta^t w) e^{b(w) t}`.
    TemperedExp {
        k: ScalarField,
        a: ScalarField,
        b: ScalarField,
    },
    /// `K(w) exp(int_0^t a(theta^r w) dr)` and the same with `K(theta^t w)`
    /// and `b`; the integral is a composite trapezoid of step `quad_step`.
    IntegralExp {
        k: ScalarField,
        a: ScalarField,
        b: ScalarField,
        quad_step: f64,
    },
    /// `K(w) e^{S_a(n, w)}` and `K(theta^n w) e^{S_b(n, w)}`.
    BirkhoffExp {
        k: ScalarField,
        a: ScalarField,
        b: ScalarField,
    },
    /// `K(w) a(w) / a(theta^t w)` and `K(theta^t w) b(w) / b(theta^t w)`.
    RatioForm {
        k: ScalarField,
        a: ScalarField,
        b: ScalarField,
    },
    Custom {
        plus: TimeField,
        minus: TimeField,
    },
}

impl BoundFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BoundFamily::TemperedExp { .. } => "tempered-exp",
            BoundFamily::IntegralExp { .. } => "integral-exp",
            BoundFamily::BirkhoffExp { .. } => "birkhoff-exp",
            BoundFamily::RatioForm { .. } => "ratio-form",
            BoundFamily::Custom { .. } => "custom",
        }
    }
}

#[derive(Clone)]
pub struct DichotomyBounds {
    pub family: BoundFamily,
    pub driving: DrivingSystem,
    /// Multiplies both bounds; 1 unless deliberately rescaled.
    pub scale: f64,
}

impl fmt::Debug for DichotomyBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DichotomyBounds")
            .field("family", &self.family.name())
            .field("driving", &self.driving)
            .field("scale", &self.scale)
            .finish()
    }
}

impl DichotomyBounds {
    pub fn new(family: BoundFamily, driving: DrivingSystem) -> Self {
        DichotomyBounds {
            family,
            driving,
            scale: 1.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut b = self.clone();
        b.scale *= factor;
        b
    }

    pub fn time_domain(&self) -> TimeDomain {
        self.driving.time_domain
    }

    /// The weight `K(w)` when the family has one.
    pub fn k(&self, omega: &BasePoint) -> Option<f64> {
        match &self.family {
            BoundFamily::TemperedExp { k, .. }
            | BoundFamily::IntegralExp { k, .. }
            | BoundFamily::BirkhoffExp { k, .. }
            | BoundFamily::RatioForm { k, .. } => Some(k(omega)),
            BoundFamily::Custom { .. } => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        self.driving.time_domain.check(t)?;
        if t < 0.0 {
            return Err(Error::Domain(format!("bounds are defined for t >= 0, got {t}")));
        }
        Ok(())
    }

    fn integral(&self, f: &ScalarField, t: f64, omega: &BasePoint, step: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let n = ((t / step) - 1e-9).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut acc = 0.5 * (f(omega) + f(&self.driving.evolve(t, omega)?));
        for j in 1..n {
            acc += f(&self.driving.evolve(j as f64 * h, omega)?);
        }
        Ok(acc * h)
    }

    /// `alpha_plus(t, w)`: bound on `‖Phi^t_w P_w‖`.
    pub fn alpha_plus(&self, t: f64, omega: &BasePoint) -> Result<f64> {
        self.check_time(t)?;
        let v = match &self.family {
            BoundFamily::TemperedExp { k, a, .. } => k(omega) * (a(omega) * t).exp(),
            BoundFamily::IntegralExp { k, a, quad_step, .. } => {
                k(omega) * self.integral(a, t, omega, *quad_step)?.exp()
            }
            BoundFamily::BirkhoffExp { k, a, .. } => {
                k(omega) * birkhoff_sum(a.as_ref(), t, omega, &self.driving)?.exp()
            }
            BoundFamily::RatioForm { k, a, .. } => {
                let target = self.driving.evolve(t, omega)?;
                k(omega) * a(omega) / a(&target)
            }
            BoundFamily::Custom { plus, .. } => plus(t, omega),
        };
        Ok(v * self.scale)
    }

    /// `alpha_minus(t, w)`: bound on `‖Phi-hat^{-t} Q_{theta^t w}‖`, i.e. the
    /// backward bound attached to the endpoint `theta^t w`.
    pub fn alpha_minus(&self, t: f64, omega: &BasePoint) -> Result<f64> {
        self.check_time(t)?;
        let v = match &self.family {
            BoundFamily::TemperedExp { k, b, .. } => {
                k(&self.driving.evolve(t, omega)?) * (b(omega) * t).exp()
            }
            BoundFamily::IntegralExp { k, b, quad_step, .. } => {
                k(&self.driving.evolve(t, omega)?) * self.integral(b, t, omega, *quad_step)?.exp()
            }
            BoundFamily::BirkhoffExp { k, b, .. } => {
                k(&self.driving.evolve(t, omega)?) * birkhoff_sum(b.as_ref(), t, omega, &self.driving)?.exp()
            }
            BoundFamily::RatioForm { k, b, .. } => {
                let target = self.driving.evolve(t, omega)?;
                k(&target) * b(omega) / b(&target)
            }
            BoundFamily::Custom { minus, .. } => minus(t, omega),
        };
        Ok(v * self.scale)
    }
}

/// Largest measured-to-bound ratio and where it occurs.
#[derive(Debug, Clone, Serialize)]
pub struct Worst {
    pub max_ratio: f64,
    /// Smallest `bound - measured`.
    pub min_slack: f64,
    pub t: f64,
    pub omega: Vec<f64>,
}

impl Worst {
    fn empty() -> Self {
        Worst {
            max_ratio: f64::NEG_INFINITY,
            min_slack: f64::INFINITY,
            t: 0.0,
            omega: Vec::new(),
        }
    }

    fn update(&mut self, measured: f64, bound: f64, t: f64, omega: &BasePoint) {
        let ratio = measured / bound;
        self.min_slack = self.min_slack.min(bound - measured);
        if ratio > self.max_ratio || !ratio.is_finite() {
            self.max_ratio = ratio;
            self.t = t;
            self.omega = omega.coords.clone();
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub family: String,
    /// Forward bound: `‖Phi^t_w P_w‖` against `alpha_plus(t, w)`.
    pub forward: Worst,
    /// Backward bound: `‖Phi-hat^{-t} Q_{theta^t w}‖` against `alpha_minus(t, w)`.
    pub backward: Worst,
    pub bounds_positive: bool,
    /// `K >= 1` at every sample (vacuous for custom bounds).
    pub weight_at_least_one: bool,
    pub sample_times: Vec<f64>,
    pub sample_points: Vec<Vec<f64>>,
    pub tol: f64,
    pub pass: bool,
}

/// Compares measured induced norms with the bounds on a sample grid; passes
/// iff `measured <= bound (1 + tol)` everywhere.
pub fn verify_dichotomy(
    c: &SplitCocycle,
    bounds: &DichotomyBounds,
    times: &[f64],
    points: &[BasePoint],
    tol: f64,
) -> Result<DichotomyReport> {
    if times.is_empty() || points.is_empty() {
        return Err(Error::Invalid("verify_dichotomy needs nonempty samples".into()));
    }
    let kind = c.norm_kind();
    let mut forward = Worst::empty();
    let mut backward = Worst::empty();
    let mut bounds_positive = true;
    let mut weight_at_least_one = true;
    for omega in points {
        if let Some(k) = bounds.k(omega) {
            weight_at_least_one &= k >= 1.0;
        }
        for &t in times {
            let ap = bounds.alpha_plus(t, omega)?;
            let am = bounds.alpha_minus(t, omega)?;
            bounds_positive &= ap > 0.0 && am > 0.0;
            let fwd = operator_norm(&(c.matrix(t, omega)? * c.proj_p(omega)), kind);
            forward.update(fwd, ap, t, omega);
            let bwd = operator_norm(&c.fiber_inverse_matrix(t, omega)?, kind);
            backward.update(bwd, am, t, omega);
        }
    }
    let pass = bounds_positive
        && weight_at_least_one
        && forward.max_ratio <= 1.0 + tol
        && backward.max_ratio <= 1.0 + tol;
    Ok(DichotomyReport {
        family: bounds.family.name().to_string(),
        forward,
        backward,
        bounds_positive,
        weight_at_least_one,
        sample_times: times.to_vec(),
        sample_points: points.iter().map(|p| p.coords.clone()).collect(),
        tol,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    /// `alpha_plus(t, w) * alpha_minus(t, w)`.
    pub products: Vec<f64>,
    pub final_value: f64,
    pub decreasing_tail: bool,
    pub tol: f64,
    pub pass: bool,
    pub note: String,
}

/// Tabulates `p(t) = alpha_plus(t, w) alpha_minus(t, w)` up to `horizon`.
/// Passes iff `p(horizon) <= tol` and `p` is non-increasing over the last
/// half of the grid. This is finite-horizon evidence for `p -> 0`, not a proof.
///
/// Discrete systems use every integer time; continuous ones use `samples`
/// equally spaced times.
pub fn check_decay_condition(
    bounds: &DichotomyBounds,
    omega: &BasePoint,
    horizon: f64,
    samples: usize,
    tol: f64,
) -> Result<DecayReport> {
    let times: Vec<f64> = match bounds.time_domain() {
        TimeDomain::Discrete => {
            bounds.time_domain().check(horizon)?;
            (0..=horizon.max(0.0) as usize).map(|n| n as f64).collect()
        }
        TimeDomain::Continuous => {
            let n = samples.max(2);
            (0..n).map(|j| horizon * j as f64 / (n - 1) as f64).collect()
        }
    };
    if times.len() < 20 {
        return Err(Error::Invalid(format!(
            "decay check needs at least 20 samples, got {}",
            times.len()
        )));
    }
    let products = times
        .iter()
        .map(|&t| Ok(bounds.alpha_plus(t, omega)? * bounds.alpha_minus(t, omega)?))
        .collect::<Result<Vec<f64>>>()?;
    let half = products.len() / 2;
    let decreasing_tail = products[half..].windows(2).all(|w| w[1] <= w[0]);
    let final_value = *products.last().unwrap_or(&f64::NAN);
    Ok(DecayReport {
        pass: final_value <= tol && decreasing_tail,
        times,
        products,
        final_value,
        decreasing_tail,
        tol,
        note: "finite-horizon surrogate for the limit; not a proof".into(),
    })
}
