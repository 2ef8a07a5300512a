//! Driving systems: the invertible flow or map `theta` on the base space whose
//! orbits index the fibers of a random dynamical system.
//!
//! Base points are plain coordinate vectors. No measure is attached to the base;
//! all computations work pointwise along sampled orbits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `omega` of the base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub coords: Vec<f64>,
}

impl BasePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        BasePoint { coords }
    }

    pub fn scalar(x: f64) -> Self {
        BasePoint { coords: vec![x] }
    }

    pub fn planar(x: f64, y: f64) -> Self {
        BasePoint { coords: vec![x, y] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// First coordinate, or 0 for an empty point.
    pub fn x(&self) -> f64 {
        self.coords.first().copied().unwrap_or(0.0)
    }

    /// Second coordinate, or 0 when absent.
    pub fn y(&self) -> f64 {
        self.coords.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDomain {
    /// Integer times.
    Discrete,
    /// Real times.
    Continuous,
}

impl TimeDomain {
    pub fn contains(self, t: f64) -> bool {
        match self {
            TimeDomain::Discrete => t.is_finite() && t.fract() == 0.0,
            TimeDomain::Continuous => t.is_finite(),
        }
    }

    pub fn check(self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("t = {t} is not a valid {self:?} time")))
        }
    }
}

/// One tabulated transition `theta^t(from) = to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DrivingKind {
    /// `theta^t(x) = (x + t * angle) mod 1` on the circle `[0, 1)`.
    CircleRotation { angle: f64 },
    /// `theta^t(x, y) = (x + t, y)`.
    PlanarShiftFlow,
    /// `theta^n(k) = k + n` on the integers (discrete only).
    IntegerShiftIndexed,
    /// Tabulated transitions, no interpolation: querying anything not in
    /// the table is an error.
    UserTable {
        dim: usize,
        transitions: Vec<Transition>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingSystem {
    pub time_domain: TimeDomain,
    pub kind: DrivingKind,
}

/// Result of sampling the flow axioms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowReport {
    pub identity_residual: f64,
    pub composition_residual: f64,
    /// `(t, s, omega)` where the composition residual is largest.
    pub worst: Option<(f64, f64, Vec<f64>)>,
    pub checked: usize,
    /// Combinations skipped because a table had no entry for them.
    pub skipped: usize,
    pub tol: f64,
    pub pass: bool,
}

const TABLE_MATCH_TOL: f64 = 1e-12;

impl DrivingSystem {
    pub fn circle_rotation(angle: f64, time_domain: TimeDomain) -> Self {
        DrivingSystem {
            time_domain,
            kind: DrivingKind::CircleRotation { angle },
        }
    }

    pub fn planar_shift(time_domain: TimeDomain) -> Self {
        DrivingSystem {
            time_domain,
            kind: DrivingKind::PlanarShiftFlow,
        }
    }

    pub fn integer_shift() -> Self {
        DrivingSystem {
            time_domain: TimeDomain::Discrete,
            kind: DrivingKind::IntegerShiftIndexed,
        }
    }

    pub fn user_table(time_domain: TimeDomain, dim: usize, transitions: Vec<Transition>) -> Self {
        DrivingSystem {
            time_domain,
            kind: DrivingKind::UserTable { dim, transitions },
        }
    }

    /// Builds a table holding every forward transition between samples of a
    /// single orbit, `theta^{t_j - t_i}(p_i) = p_j` for `i <= j`.
    pub fn table_from_orbit(time_domain: TimeDomain, times: &[f64], points: &[BasePoint]) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: points.len(),
            });
        }
        let dim = points.first().map(|p| p.dim()).unwrap_or(0);
        let mut transitions = Vec::new();
        for i in 0..times.len() {
            for j in i..times.len() {
                transitions.push(Transition {
                    t: times[j] - times[i],
                    from: points[i].coords.clone(),
                    to: points[j].coords.clone(),
                });
            }
        }
        Ok(Self::user_table(time_domain, dim, transitions))
    }

    pub fn base_dim(&self) -> usize {
        match &self.kind {
            DrivingKind::CircleRotation { .. } => 1,
            DrivingKind::PlanarShiftFlow => 2,
            DrivingKind::IntegerShiftIndexed => 1,
            DrivingKind::UserTable { dim, .. } => *dim,
        }
    }

    /// Canonical base point for this system (reduced for the circle).
    pub fn point(&self, coords: Vec<f64>) -> Result<BasePoint> {
        self.check_point(&BasePoint::new(coords))
            .map(|p| match self.kind {
                DrivingKind::CircleRotation { .. } => BasePoint::scalar(reduce_unit(p.x())),
                _ => p,
            })
    }

    fn check_point(&self, omega: &BasePoint) -> Result<BasePoint> {
        if omega.dim() != self.base_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base_dim(),
                got: omega.dim(),
            });
        }
        Ok(omega.clone())
    }

    /// `theta^t omega`.
    pub fn evolve(&self, t: f64, omega: &BasePoint) -> Result<BasePoint> {
        self.time_domain.check(t)?;
        self.check_point(omega)?;
        if t == 0.0 {
            return Ok(omega.clone());
        }
        match &self.kind {
            DrivingKind::CircleRotation { angle } => {
                Ok(BasePoint::scalar(reduce_unit(omega.x() + t * angle)))
            }
            DrivingKind::PlanarShiftFlow => Ok(BasePoint::planar(omega.x() + t, omega.y())),
            DrivingKind::IntegerShiftIndexed => Ok(BasePoint::scalar(omega.x() + t)),
            DrivingKind::UserTable { transitions, .. } => transitions
                .iter()
                .find(|tr| {
                    (tr.t - t).abs() <= TABLE_MATCH_TOL * t.abs().max(1.0) && close(&tr.from, &omega.coords)
                })
                .map(|tr| BasePoint::new(tr.to.clone()))
                .ok_or_else(|| Error::NotTabulated {
                    t,
                    from: omega.coords.clone(),
                }),
        }
    }

    /// Pointwise `evolve` over a sorted list of times.
    pub fn orbit(&self, omega: &BasePoint, times: &[f64]) -> Result<Vec<BasePoint>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("orbit times must be sorted ascending".into()));
        }
        times.iter().map(|&t| self.evolve(t, omega)).collect()
    }

    /// Distance between base points; circular on the circle.
    pub fn distance(&self, a: &BasePoint, b: &BasePoint) -> f64 {
        match self.kind {
            DrivingKind::CircleRotation { .. } => {
                let d = (a.x() - b.x()).abs().rem_euclid(1.0);
                d.min(1.0 - d)
            }
            _ => a
                .coords
                .iter()
                .zip(&b.coords)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
        }
    }

    /// A few fixed points of the base used for construction-time spot checks.
    pub fn reference_points(&self) -> Vec<BasePoint> {
        match &self.kind {
            DrivingKind::CircleRotation { .. } => {
                vec![
                    BasePoint::scalar(0.0),
                    BasePoint::scalar(0.25),
                    BasePoint::scalar(0.7),
                ]
            }
            DrivingKind::PlanarShiftFlow => vec![
                BasePoint::planar(0.0, 0.0),
                BasePoint::planar(1.0, -0.5),
                BasePoint::planar(-2.0, 1.0),
            ],
            DrivingKind::IntegerShiftIndexed => {
                vec![
                    BasePoint::scalar(0.0),
                    BasePoint::scalar(3.0),
                    BasePoint::scalar(-2.0),
                ]
            }
            DrivingKind::UserTable { transitions, .. } => transitions
                .iter()
                .take(1)
                .map(|tr| BasePoint::new(tr.from.clone()))
                .collect(),
        }
    }

    /// Samples `theta^0 = Id` and `theta^{t+s} = theta^t o theta^s`.
    ///
    /// Table-backed systems skip combinations they cannot evaluate; those are
    /// counted in `skipped`.
    pub fn check_flow_property(
        &self,
        sample_times: &[f64],
        sample_points: &[BasePoint],
        tol: f64,
    ) -> Result<FlowReport> {
        if !(tol > 0.0) {
            return Err(Error::Invalid(format!("tol must be positive, got {tol}")));
        }
        let mut identity_residual = 0.0_f64;
        let mut composition_residual = 0.0_f64;
        let mut worst = None;
        let mut checked = 0;
        let mut skipped = 0;
        for omega in sample_points {
            let id = self.evolve(0.0, omega)?;
            identity_residual = identity_residual.max(self.distance(&id, omega));
            for &t in sample_times {
                for &s in sample_times {
                    let direct = self.evolve(t + s, omega);
                    let composed = self.evolve(s, omega).and_then(|p| self.evolve(t, &p));
                    match (direct, composed) {
                        (Ok(a), Ok(b)) => {
                            checked += 1;
                            let r = self.distance(&a, &b);
                            if r > composition_residual || worst.is_none() {
                                composition_residual = composition_residual.max(r);
                                worst = Some((t, s, omega.coords.clone()));
                            }
                        }
                        (Err(Error::NotTabulated { .. }), _) | (_, Err(Error::NotTabulated { .. })) => {
                            skipped += 1
                        }
                        (Err(e), _) | (_, Err(e)) => return Err(e),
                    }
                }
            }
        }
        Ok(FlowReport {
            identity_residual,
            composition_residual,
            worst,
            checked,
            skipped,
            tol,
            pass: identity_residual <= tol && composition_residual <= tol,
        })
    }
}

fn reduce_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can return 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= TABLE_MATCH_TOL * x.abs().max(y.abs()).max(1.0))
}
