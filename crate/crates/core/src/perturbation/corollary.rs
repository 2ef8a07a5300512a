//! Sampled hypothesis checks for the ready-made sufficient conditions on
//! `Lip(f)` attached to specific dichotomy families.
//!
//! Every hypothesis is evaluated at sampled base points and reported with its
//! smallest margin (`rhs - lhs`, positive when satisfied) and the point where
//! that margin occurs. Conclusions are not checked here.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::sigma_tau::temperedness_lambda;
use super::Perturbation;
use crate::cocycle::{BoundFamily, DichotomyBounds, ScalarField};
use crate::driving::{BasePoint, DrivingSystem, TimeDomain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorollaryKind {
    /// Continuous, tempered exponential bounds.
    C32,
    /// Continuous, integral-exponent bounds with differentiable weight.
    C33,
    /// Continuous, ratio-form bounds.
    C34,
    /// Discrete, tempered exponential bounds.
    C42,
    /// Discrete, Birkhoff-sum bounds.
    C43,
    /// Discrete, ratio-form bounds.
    C44,
}

impl CorollaryKind {
    pub const ALL: [CorollaryKind; 6] = [
        CorollaryKind::C32,
        CorollaryKind::C33,
        CorollaryKind::C34,
        CorollaryKind::C42,
        CorollaryKind::C43,
        CorollaryKind::C44,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CorollaryKind::C32 => "c32",
            CorollaryKind::C33 => "c33",
            CorollaryKind::C34 => "c34",
            CorollaryKind::C42 => "c42",
            CorollaryKind::C43 => "c43",
            CorollaryKind::C44 => "c44",
        }
    }

    pub fn time_domain(self) -> TimeDomain {
        match self {
            CorollaryKind::C32 | CorollaryKind::C33 | CorollaryKind::C34 => TimeDomain::Continuous,
            _ => TimeDomain::Discrete,
        }
    }

    fn needs_gamma(self) -> bool {
        matches!(self, CorollaryKind::C32 | CorollaryKind::C42)
    }
}

impl fmt::Display for CorollaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CorollaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorollaryKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown corollary id '{s}' (expected one of c32, c33, c34, c42, c43, c44)"
                ))
            })
    }
}

/// Inputs of one check: bound data `K, a, b` (and `gamma` where needed), the
/// summable weight `G`, the threshold `delta` and the declared `Lip(f)`.
#[derive(Clone)]
pub struct CorollaryData {
    pub kind: CorollaryKind,
    pub driving: DrivingSystem,
    pub delta: f64,
    pub k: ScalarField,
    pub a: ScalarField,
    pub b: ScalarField,
    pub gamma: Option<f64>,
    pub g: ScalarField,
    pub lip: ScalarField,
}

impl fmt::Debug for CorollaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorollaryData")
            .field("kind", &self.kind)
            .field("delta", &self.delta)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl CorollaryData {
    /// The bound family this kind is stated for.
    pub fn bounds(&self, quad_step: f64) -> DichotomyBounds {
        let (k, a, b) = (self.k.clone(), self.a.clone(), self.b.clone());
        let family = match self.kind {
            CorollaryKind::C32 | CorollaryKind::C42 => BoundFamily::TemperedExp { k, a, b },
            CorollaryKind::C33 => BoundFamily::IntegralExp { k, a, b, quad_step },
            CorollaryKind::C43 => BoundFamily::BirkhoffExp { k, a, b },
            CorollaryKind::C34 | CorollaryKind::C44 => BoundFamily::RatioForm { k, a, b },
        };
        DichotomyBounds::new(family, self.driving.clone())
    }

    /// A sine perturbation of the declared Lipschitz profile.
    pub fn perturbation(&self, dim: usize) -> Perturbation {
        Perturbation::sine(dim, self.lip.clone())
    }
}

/// Where and how densely hypotheses are sampled.
#[derive(Debug, Clone, Serialize)]
pub struct ScanSettings {
    pub anchors: Vec<BasePoint>,
    /// Samples are `theta^s w` for anchors `w` and `|s| <= window`; the mass
    /// of `G` is also summed over this window.
    pub window: f64,
    /// Sample and quadrature step in continuous time.
    pub step: f64,
    /// Horizon for the limit conditions.
    pub limit_horizon: f64,
    pub limit_tol: f64,
    /// Horizon of the sup defining `lambda`.
    pub lambda_horizon: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            anchors: vec![BasePoint::scalar(0.0)],
            window: 30.0,
            step: 0.1,
            limit_horizon: 60.0,
            limit_tol: 1e-3,
            lambda_horizon: 60.0,
            fd_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub pass: bool,
    pub worst_margin: f64,
    /// Base point (or parameter value) attaining the worst margin.
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub kind: CorollaryKind,
    pub hypotheses: Vec<Hypothesis>,
    pub samples: usize,
    pub fd_step: Option<f64>,
    pub pass: bool,
    pub note: String,
}

impl HypothesisReport {
    pub fn get(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }
}

const CEILING_TOL: f64 = 1e-12;

struct Scan<'a> {
    data: &'a CorollaryData,
    settings: &'a ScanSettings,
    /// `(anchor index, offset)`.
    offsets: Vec<(usize, f64)>,
    h_step: f64,
}

impl<'a> Scan<'a> {
    fn point(&self, anchor: usize, s: f64) -> Result<BasePoint> {
        self.data.driving.evolve(s, &self.settings.anchors[anchor])
    }

    fn unit(&self) -> f64 {
        match self.data.kind.time_domain() {
            TimeDomain::Discrete => 1.0,
            TimeDomain::Continuous => self.h_step,
        }
    }

    /// Minimum of `margin(anchor, s, theta^s w)` over all samples.
    fn sweep(
        &self,
        name: &str,
        strict: bool,
        margin: impl Fn(usize, f64, &BasePoint) -> Result<f64>,
    ) -> Result<Hypothesis> {
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for &(i, s) in &self.offsets {
            let w = self.point(i, s)?;
            let m = margin(i, s, &w)?;
            if m < worst || m.is_nan() {
                worst = m;
                witness = Some(w.coords.clone());
                if m.is_nan() {
                    break;
                }
            }
        }
        let pass = if strict { worst > 0.0 } else { worst >= 0.0 };
        Ok(Hypothesis {
            name: name.into(),
            pass,
            worst_margin: worst,
            witness,
        })
    }

    fn derivative(&self, f: &dyn Fn(&BasePoint) -> f64, anchor: usize, s: f64) -> Result<f64> {
        let h = self.settings.fd_step * s.abs().max(1.0);
        Ok((f(&self.point(anchor, s + h)?) - f(&self.point(anchor, s - h)?)) / (2.0 * h))
    }

    fn lambda(&self, w: &BasePoint) -> Result<f64> {
        let gamma = self.data.gamma.unwrap_or(f64::NAN);
        Ok(temperedness_lambda(
            &self.data.k,
            gamma,
            w,
            &self.data.driving,
            self.settings.lambda_horizon,
            Some(self.h_step),
        )?
        .lambda)
    }

    /// `H(w) = -1 / (a b K)`.
    fn h_fn(&self) -> impl Fn(&BasePoint) -> f64 + '_ {
        move |w: &BasePoint| -1.0 / ((self.data.a)(w) * (self.data.b)(w) * (self.data.k)(w))
    }

    /// `1 - sum (or integral) of G` along each anchor's orbit over the window.
    fn g_mass(&self) -> Result<Hypothesis> {
        let g = &self.data.g;
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for (i, anchor) in self.settings.anchors.iter().enumerate() {
            let pts: Vec<f64> = self
                .offsets
                .iter()
                .filter(|(j, _)| *j == i)
                .map(|&(_, s)| Ok(g(&self.point(i, s)?)))
                .collect::<Result<_>>()?;
            let mass = match self.data.kind.time_domain() {
                TimeDomain::Discrete => pts.iter().sum::<f64>(),
                TimeDomain::Continuous => {
                    let n = pts.len() - 1;
                    self.h_step * (0.5 * (pts[0] + pts[n]) + pts[1..n].iter().sum::<f64>())
                }
            };
            let m = 1.0 + CEILING_TOL - mass;
            if m < worst {
                worst = m;
                witness = Some(anchor.coords.clone());
            }
        }
        Ok(Hypothesis {
            name: "g_mass_at_most_one".into(),
            pass: worst >= 0.0,
            worst_margin: worst,
            witness,
        })
    }

    /// Finite-horizon surrogate for `value(t) -> 0`: the last value is below
    /// `limit_tol` and the tail half is non-increasing.
    fn limit(&self, name: &str, value: impl Fn(&BasePoint) -> Result<Vec<f64>>) -> Result<Hypothesis> {
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for anchor in &self.settings.anchors {
            let seq = value(anchor)?;
            let last = *seq.last().unwrap_or(&f64::NAN);
            let half = seq.len() / 2;
            let rise = seq[half..]
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0_f64, f64::max);
            let m = (self.settings.limit_tol - last).min(-rise);
            if m < worst || m.is_nan() {
                worst = m;
                witness = Some(anchor.coords.clone());
            }
        }
        Ok(Hypothesis {
            name: name.into(),
            pass: worst >= 0.0,
            worst_margin: worst,
            witness,
        })
    }

    fn limit_times(&self) -> Vec<f64> {
        let u = self.unit();
        let n = (self.settings.limit_horizon / u).round() as usize;
        (0..=n).map(|j| j as f64 * u).collect()
    }
}

/// Evaluates every hypothesis of `data.kind` on the sampled orbits.
///
/// A `delta` outside `]0, 1/4[` is reported as a failed hypothesis with the
/// value as witness; only malformed input (wrong time domain, missing
/// `gamma`, bad settings) is an error.
pub fn check_corollary(data: &CorollaryData, settings: &ScanSettings) -> Result<HypothesisReport> {
    let kind = data.kind;
    if data.driving.time_domain != kind.time_domain() {
        return Err(Error::Config(format!(
            "{kind} needs a {:?} driving system",
            kind.time_domain()
        )));
    }
    if kind.needs_gamma() && !data.gamma.is_some_and(f64::is_finite) {
        return Err(Error::Config(format!("{kind} needs a finite gamma")));
    }
    if !data.delta.is_finite() {
        return Err(Error::Config("delta must be finite".into()));
    }
    if settings.anchors.is_empty() || !(settings.window > 0.0) || !(settings.step > 0.0) {
        return Err(Error::Config(
            "scan needs anchors, a positive window and step".into(),
        ));
    }
    if !(settings.fd_step > 0.0) || !(settings.limit_horizon > 0.0) {
        return Err(Error::Config(
            "scan needs positive fd_step and limit_horizon".into(),
        ));
    }
    let h_step = match kind.time_domain() {
        TimeDomain::Discrete => 1.0,
        TimeDomain::Continuous => settings.step,
    };
    let half = (settings.window / h_step).round() as i64;
    let offsets = (0..settings.anchors.len())
        .flat_map(|i| (-half..=half).map(move |j| (i, j as f64 * h_step)))
        .collect();
    let scan = Scan {
        data,
        settings,
        offsets,
        h_step,
    };
    let (k, a, b, g, lip) = (&data.k, &data.a, &data.b, &data.g, &data.lip);
    let delta = data.delta;
    let ds = &data.driving;
    let next = |w: &BasePoint| ds.evolve(1.0, w);

    let mut hyps = vec![Hypothesis {
        name: "delta_in_open_quarter".into(),
        pass: delta > 0.0 && delta < 0.25,
        worst_margin: delta.min(0.25 - delta),
        witness: Some(vec![delta]),
    }];
    hyps.push(scan.sweep("g_positive", true, |_, _, w| Ok(g(w)))?);
    hyps.push(scan.g_mass()?);
    hyps.push(scan.sweep("k_at_least_one", false, |_, _, w| Ok(k(w) - 1.0))?);
    let ceiling = |name: &str, c: &dyn Fn(usize, f64, &BasePoint) -> Result<f64>| {
        scan.sweep(name, false, |i, s, w| {
            let cap = c(i, s, w)?;
            Ok(cap * (1.0 + CEILING_TOL) - lip(w))
        })
    };
    let mut fd_step = None;

    match kind {
        CorollaryKind::C32 | CorollaryKind::C42 => {
            let gamma = data.gamma.unwrap_or(f64::NAN);
            hyps.push(scan.sweep("a_plus_b_negative", true, |_, _, w| Ok(-(a(w) + b(w))))?);
            hyps.push(Hypothesis {
                name: "gamma_positive".into(),
                pass: gamma > 0.0,
                worst_margin: gamma,
                witness: Some(vec![gamma]),
            });
            hyps.push(scan.sweep("a_plus_b_plus_gamma_negative", true, |_, _, w| {
                Ok(-(a(w) + b(w) + gamma))
            })?);
            let u = scan.unit();
            hyps.push(scan.sweep("rates_invariant", false, |i, s, w| {
                let v = scan.point(i, s + u)?;
                Ok(CEILING_TOL - (a(&v) - a(w)).abs() - (b(&v) - b(w)).abs())
            })?);
            if gamma > 0.0 {
                let mut t_worst = f64::INFINITY;
                let mut t_wit = None;
                for anchor in &settings.anchors {
                    let r = temperedness_lambda(k, gamma, anchor, ds, settings.lambda_horizon, Some(h_step))?;
                    let m = if r.growing { r.lambda_half - r.lambda } else { 0.0 };
                    if m < t_worst {
                        t_worst = m;
                        t_wit = Some(anchor.coords.clone());
                    }
                }
                hyps.push(Hypothesis {
                    name: "k_tempered".into(),
                    pass: t_worst >= 0.0,
                    worst_margin: t_worst,
                    witness: t_wit,
                });
                if kind == CorollaryKind::C32 {
                    hyps.push(ceiling("lip_ceiling", &|_, _, w| {
                        let lam = scan.lambda(w)?;
                        Ok(delta / k(w) * g(w).min((a(w) + b(w) + gamma).abs() / lam))
                    })?);
                } else {
                    hyps.push(ceiling("lip_ceiling", &|_, _, w| {
                        let lam = scan.lambda(w)?;
                        let (aw, bw) = (a(w), b(w));
                        Ok(delta / k(&next(w)?)
                            * (aw.exp() * g(w)).min(bw.exp() * (1.0 - (aw + bw + gamma).exp()) / lam))
                    })?);
                }
            }
        }
        CorollaryKind::C33 => {
            fd_step = Some(settings.fd_step);
            let kf = |w: &BasePoint| k(w);
            hyps.push(scan.sweep("derivative_condition", true, |i, s, w| {
                Ok(scan.derivative(&kf, i, s)? - k(w) * (a(w) + b(w)))
            })?);
            hyps.push(ceiling("lip_ceiling", &|i, s, w| {
                let d = scan.derivative(&kf, i, s)?;
                let kw = k(w);
                Ok(delta / kw * g(w).min((d / kw - (a(w) + b(w))) / kw))
            })?);
            let times = scan.limit_times();
            hyps.push(scan.limit("weighted_rate_limit", |anchor| {
                let mut out = Vec::with_capacity(times.len());
                let mut integral = 0.0;
                let mut prev = a(anchor) + b(anchor);
                for (j, &t) in times.iter().enumerate() {
                    let w = ds.evolve(t, anchor)?;
                    let cur = a(&w) + b(&w);
                    if j > 0 {
                        integral += 0.5 * (prev + cur) * (t - times[j - 1]);
                    }
                    prev = cur;
                    out.push(k(&w) * integral.exp());
                }
                Ok(out)
            })?);
        }
        CorollaryKind::C34 => {
            fd_step = Some(settings.fd_step);
            let hf = scan.h_fn();
            hyps.push(scan.sweep("rates_positive", true, |_, _, w| Ok(a(w).min(b(w))))?);
            hyps.push(scan.sweep("h_derivative_positive", true, |i, s, _| {
                scan.derivative(&hf, i, s)
            })?);
            hyps.push(ceiling("lip_ceiling", &|i, s, w| {
                let dh = scan.derivative(&hf, i, s)?;
                Ok(delta / k(w) * g(w).min(a(w) * b(w) * dh))
            })?);
            let times = scan.limit_times();
            hyps.push(scan.limit("weight_over_rates_limit", |anchor| {
                times
                    .iter()
                    .map(|&t| {
                        let w = ds.evolve(t, anchor)?;
                        Ok(k(&w) / (a(&w) * b(&w)))
                    })
                    .collect()
            })?);
        }
        CorollaryKind::C43 => {
            hyps.push(scan.sweep("weight_compatibility", false, |_, _, w| {
                Ok(k(&next(w)?) * (1.0 + CEILING_TOL) - k(w) * (a(w) + b(w)).exp())
            })?);
            hyps.push(ceiling("lip_ceiling", &|_, _, w| {
                let (aw, bw, kw, kn) = (a(w), b(w), k(w), k(&next(w)?));
                Ok(
                    delta
                        * ((aw.exp() / kn) * g(w)).min((1.0 / kw - (aw + bw).exp() / kn) / kn * (-bw).exp()),
                )
            })?);
            let times = scan.limit_times();
            hyps.push(scan.limit("weighted_sum_limit", |anchor| {
                let mut out = Vec::with_capacity(times.len());
                let mut sum = 0.0_f64;
                let mut w = anchor.clone();
                for _ in &times {
                    out.push(k(&w) * sum.exp());
                    sum += a(&w) + b(&w);
                    w = next(&w)?;
                }
                Ok(out)
            })?);
        }
        CorollaryKind::C44 => {
            let hf = scan.h_fn();
            hyps.push(scan.sweep("rates_positive", true, |_, _, w| Ok(a(w).min(b(w))))?);
            hyps.push(scan.sweep("h_nondecreasing", false, |_, _, w| Ok(hf(&next(w)?) - hf(w)))?);
            hyps.push(ceiling("lip_ceiling", &|_, _, w| {
                let v = next(w)?;
                Ok(delta * (a(w) * b(&v) / k(&v) * (hf(&v) - hf(w))).min(g(w)))
            })?);
            let times = scan.limit_times();
            hyps.push(scan.limit("weight_over_rates_limit", |anchor| {
                times
                    .iter()
                    .map(|&t| {
                        let w = ds.evolve(t, anchor)?;
                        Ok(k(&w) / (a(&w) * b(&w)))
                    })
                    .collect()
            })?);
        }
    }
    let pass = hyps.iter().all(|h| h.pass);
    Ok(HypothesisReport {
        kind,
        samples: scan.offsets.len(),
        hypotheses: hyps,
        fd_step,
        pass,
        note: "hypotheses sampled on finite orbit windows; conclusions are checked by the solver".into(),
    })
}
