//! Run configuration: a TOML file, optionally layered over a built-in preset.
//!
//! ```toml
//! preset = "toy-pseudo-hyperbolic"   # optional; the rest of the file overrides it
//! threads = 4                        # optional worker count
//!
//! [driving]        # kind, time_domain, anchor, plus kind-specific keys
//! [cocycle]        # diagonal-exp (rates, stable_dim) or example2 (weight, factors, a, b)
//! [bounds]         # family, k, a, b, quad_step, scale; defaults follow the cocycle
//! [perturbation]   # zero | sine (lip) | linear (matrix, scale)
//! [grids]          # xi_points, xi_extent, k_max, horizon, time_step
//! [tolerances]     # stop, max_iters, ratio, membership, verify, growth
//! [samples]        # count, seed, times, points, psi_step
//! [decay]          # horizon, samples, tol
//! [corollary.c42]  # delta, k, a, b, gamma, g, lip, driving, scan
//! ```
//!
//! Scalar fields on the base are written either as a number or as a table
//! with a `kind` key; see [`FieldSpec`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::{
    example2_cocycle, scalar_field, BoundFamily, DichotomyBounds, ScalarField, SplitCocycle, TimeField,
};
use crate::driving::{BasePoint, DrivingKind, DrivingSystem, TimeDomain};
use crate::error::{Error, Result};
use crate::linalg::NormKind;
use crate::perturbation::{CorollaryData, CorollaryKind, Perturbation, ScanSettings};
use crate::presets;
use crate::solver::{LpProblem, SolveSettings};

/// A scalar function on the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Const(f64),
    Spec(FieldKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldKind {
    Const {
        value: f64,
    },
    /// `base + amp sin^2(x)`.
    Sin2 {
        base: f64,
        amp: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `scale / (1 + x^2)`, a probability density for the default scale.
    Cauchy {
        #[serde(default = "inv_pi")]
        scale: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `scale ratio^{|x|}`.
    Geometric {
        scale: f64,
        ratio: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `scale e^{rate x}`.
    Exp {
        #[serde(default = "one")]
        scale: f64,
        rate: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `scale (1 + x^2)^{power (1 + y^2)}`.
    Planar {
        #[serde(default = "one")]
        scale: f64,
        power: f64,
    },
    Product {
        factors: Vec<FieldSpec>,
    },
    Min {
        of: Vec<FieldSpec>,
    },
    Recip {
        of: Box<FieldSpec>,
    },
}

fn inv_pi() -> f64 {
    1.0 / PI
}

fn one() -> f64 {
    1.0
}

fn coord(w: &BasePoint, axis: usize) -> f64 {
    w.coords.get(axis).copied().unwrap_or(f64::NAN)
}

impl FieldSpec {
    pub fn build(&self) -> Result<ScalarField> {
        let kind = match self {
            FieldSpec::Const(v) => {
                let v = *v;
                return Ok(scalar_field(move |_| v));
            }
            FieldSpec::Spec(k) => k.clone(),
        };
        Ok(match kind {
            FieldKind::Const { value } => scalar_field(move |_| value),
            FieldKind::Sin2 { base, amp, axis } => {
                scalar_field(move |w| base + amp * coord(w, axis).sin().powi(2))
            }
            FieldKind::Cauchy { scale, axis } => {
                scalar_field(move |w| scale / (1.0 + coord(w, axis).powi(2)))
            }
            FieldKind::Geometric { scale, ratio, axis } => {
                if !(ratio > 0.0) {
                    return Err(Error::Config(format!(
                        "geometric ratio must be positive, got {ratio}"
                    )));
                }
                scalar_field(move |w| scale * ratio.powf(coord(w, axis).abs()))
            }
            FieldKind::Exp { scale, rate, axis } => {
                scalar_field(move |w| scale * (rate * coord(w, axis)).exp())
            }
            FieldKind::Planar { scale, power } => {
                scalar_field(move |w| scale * (1.0 + w.x() * w.x()).powf(power * (1.0 + w.y() * w.y())))
            }
            FieldKind::Product { factors } => {
                let fs = factors.iter().map(|f| f.build()).collect::<Result<Vec<_>>>()?;
                scalar_field(move |w| fs.iter().map(|f| f(w)).product())
            }
            FieldKind::Min { of } => {
                if of.is_empty() {
                    return Err(Error::Config("min needs at least one field".into()));
                }
                let fs = of.iter().map(|f| f.build()).collect::<Result<Vec<_>>>()?;
                scalar_field(move |w| fs.iter().map(|f| f(w)).fold(f64::INFINITY, f64::min))
            }
            FieldKind::Recip { of } => {
                let f = of.build()?;
                scalar_field(move |w| 1.0 / f(w))
            }
        })
    }

    /// The value if the field is constant.
    pub fn constant(&self) -> Option<f64> {
        match self {
            FieldSpec::Const(v) | FieldSpec::Spec(FieldKind::Const { value: v }) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrivingSpec {
    #[serde(flatten)]
    pub kind: DrivingKind,
    pub time_domain: TimeDomain,
    /// Anchor `w0` of the solver orbit.
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
}

impl DrivingSpec {
    pub fn build(&self) -> Result<DrivingSystem> {
        let ds = DrivingSystem {
            time_domain: self.time_domain,
            kind: self.kind.clone(),
        };
        if matches!(ds.kind, DrivingKind::IntegerShiftIndexed) && ds.time_domain != TimeDomain::Discrete {
            return Err(Error::Config("integer shift needs discrete time".into()));
        }
        Ok(ds)
    }

    pub fn anchor(&self, ds: &DrivingSystem) -> Result<BasePoint> {
        let coords = self.anchor.clone().unwrap_or_else(|| vec![0.0; ds.base_dim()]);
        ds.point(coords)
            .map_err(|e| Error::Config(format!("anchor: {e}")))
    }
}

/// Rate families for the scalar factors of the planar example cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorFamily {
    /// `e^{a t}` with `a` invariant along orbits.
    TemperedExp,
    /// `e^{S_a(n, w)}` (discrete time).
    BirkhoffExp,
    /// `a(w) / a(theta^t w)`.
    RatioForm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CocycleSpec {
    /// `diag(e^{r_1 t}, ..., e^{r_d t})`; the first `stable_dim` axes span `E`.
    DiagonalExp {
        rates: Vec<f64>,
        stable_dim: usize,
        #[serde(default)]
        norm: NormKind,
    },
    /// The planar cocycle with weight `K` and factors built from `a`, `b`.
    Example2 {
        weight: FieldSpec,
        factors: FactorFamily,
        a: FieldSpec,
        b: FieldSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    TemperedExp,
    IntegralExp,
    BirkhoffExp,
    RatioForm,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub family: Option<FamilyName>,
    pub k: Option<FieldSpec>,
    pub a: Option<FieldSpec>,
    pub b: Option<FieldSpec>,
    pub quad_step: Option<f64>,
    /// Multiplies both bounds (fault injection).
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Zero,
    Sine {
        lip: FieldSpec,
    },
    /// `scale(w) A x`; the declared constant is `scale(w) ‖A‖`.
    Linear {
        matrix: Vec<Vec<f64>>,
        scale: FieldSpec,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub xi_points: usize,
    pub xi_extent: f64,
    pub k_max: usize,
    pub horizon: f64,
    pub time_step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        let s = SolveSettings::default();
        GridSpec {
            xi_points: s.xi_points,
            xi_extent: s.xi_extent,
            k_max: s.k_max,
            horizon: s.horizon,
            time_step: s.time_step,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub stop: f64,
    pub max_iters: usize,
    pub ratio: f64,
    pub membership: f64,
    /// Splitting and dichotomy verification.
    pub verify: f64,
    /// Relative slack of the growth bound.
    pub growth: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        let s = SolveSettings::default();
        ToleranceSpec {
            stop: s.stop_tol,
            max_iters: s.max_iters,
            ratio: s.ratio_tol,
            membership: s.membership_tol,
            verify: 1e-12,
            growth: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    /// Verification times; defaults depend on the time domain.
    pub times: Option<Vec<f64>>,
    /// Verification base points; defaults to the driving system's
    /// reference points.
    pub points: Option<Vec<Vec<f64>>>,
    /// Stepping size for continuous `Psi`; defaults to `time_step / 8`.
    pub psi_step: Option<f64>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 10_000,
            seed: 7,
            times: None,
            points: None,
            psi_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySpec {
    pub horizon: f64,
    pub samples: usize,
    pub tol: f64,
}

impl Default for DecaySpec {
    fn default() -> Self {
        DecaySpec {
            horizon: 100.0,
            samples: 200,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub anchors: Option<Vec<Vec<f64>>>,
    pub window: Option<f64>,
    pub step: Option<f64>,
    pub limit_horizon: Option<f64>,
    pub limit_tol: Option<f64>,
    pub lambda_horizon: Option<f64>,
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollarySpec {
    pub delta: f64,
    pub k: FieldSpec,
    pub a: FieldSpec,
    pub b: FieldSpec,
    #[serde(default)]
    pub gamma: Option<f64>,
    pub g: FieldSpec,
    pub lip: FieldSpec,
    /// Defaults to the planar shift (continuous kinds) or the integer shift.
    #[serde(default)]
    pub driving: Option<DrivingSpec>,
    #[serde(default)]
    pub scan: ScanSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub driving: Option<DrivingSpec>,
    #[serde(default)]
    pub cocycle: Option<CocycleSpec>,
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub grids: GridSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub decay: DecaySpec,
    #[serde(default)]
    pub corollary: BTreeMap<String, CorollarySpec>,
}

/// Recursively merges `over` into `base`: tables merge key by key, anything
/// else is replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

impl Config {
    /// Parses `text`, layering it over the preset it names (if any).
    pub fn from_toml(text: &str) -> Result<Config> {
        let user = parse_table(text, "config")?;
        let table = match user.get("preset") {
            Some(toml::Value::String(name)) => {
                let mut base = parse_table(presets::source(name)?, name)?;
                merge(&mut base, user);
                base
            }
            Some(_) => return Err(Error::Config("preset must be a string".into())),
            None => user,
        };
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Config> {
        Self::from_toml(&format!("preset = {name:?}\n"))
    }

    fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| Error::Config(format!("missing [{what}] section")))
    }

    pub fn driving_system(&self) -> Result<DrivingSystem> {
        Self::require(&self.driving, "driving")?.build()
    }

    pub fn anchor(&self) -> Result<BasePoint> {
        let ds = self.driving_system()?;
        Self::require(&self.driving, "driving")?.anchor(&ds)
    }

    pub fn cocycle(&self) -> Result<SplitCocycle> {
        let ds = self.driving_system()?;
        match Self::require(&self.cocycle, "cocycle")? {
            CocycleSpec::DiagonalExp {
                rates,
                stable_dim,
                norm,
            } => SplitCocycle::diagonal_exp(rates.clone(), *stable_dim, ds, *norm),
            CocycleSpec::Example2 {
                weight,
                factors,
                a,
                b,
            } => {
                let (phi, psi) = (factor(*factors, a, &ds)?, factor(*factors, b, &ds)?);
                example2_cocycle(weight.build()?, phi, psi, ds)
            }
        }
        .map_err(|e| match e {
            Error::Invalid(m) => Error::Config(m),
            e => e,
        })
    }

    /// The bounds named in `[bounds]`, with unspecified parts taken from the
    /// cocycle: exact rates for `diagonal-exp`, the factors' family for the
    /// planar example.
    pub fn bounds(&self) -> Result<DichotomyBounds> {
        let ds = self.driving_system()?;
        let spec = self.bounds.clone().unwrap_or_default();
        let (fam, k, a, b) = match Self::require(&self.cocycle, "cocycle")? {
            CocycleSpec::DiagonalExp {
                rates, stable_dim, ..
            } => {
                let (st, un) = rates.split_at((*stable_dim).min(rates.len()));
                let a = st.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let b = un.iter().map(|r| -r).fold(f64::NEG_INFINITY, f64::max);
                (
                    FamilyName::TemperedExp,
                    FieldSpec::Const(1.0),
                    FieldSpec::Const(if st.is_empty() { 0.0 } else { a }),
                    FieldSpec::Const(if un.is_empty() { 0.0 } else { b }),
                )
            }
            CocycleSpec::Example2 {
                weight,
                factors,
                a,
                b,
            } => (
                match factors {
                    FactorFamily::TemperedExp => FamilyName::TemperedExp,
                    FactorFamily::BirkhoffExp => FamilyName::BirkhoffExp,
                    FactorFamily::RatioForm => FamilyName::RatioForm,
                },
                weight.clone(),
                a.clone(),
                b.clone(),
            ),
        };
        let family = build_family(
            spec.family.unwrap_or(fam),
            spec.k.as_ref().unwrap_or(&k),
            spec.a.as_ref().unwrap_or(&a),
            spec.b.as_ref().unwrap_or(&b),
            spec.quad_step.unwrap_or(0.01),
        )?;
        let bounds = DichotomyBounds::new(family, ds);
        Ok(match spec.scale {
            Some(s) if !(s > 0.0) => {
                return Err(Error::Config(format!("bounds scale must be positive, got {s}")))
            }
            Some(s) => bounds.scaled(s),
            None => bounds,
        })
    }

    pub fn perturbation(&self) -> Result<Perturbation> {
        let d = self.cocycle()?.fiber_dim();
        Ok(match Self::require(&self.perturbation, "perturbation")? {
            PerturbationSpec::Zero => Perturbation::zero(d),
            PerturbationSpec::Sine { lip } => Perturbation::sine(d, lip.build()?),
            PerturbationSpec::Linear { matrix, scale } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!("perturbation matrix must be {d} x {d}")));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                Perturbation::linear(DMatrix::from_row_slice(d, d, &flat), scale.build()?, self.norm()?)
            }
        })
    }

    pub fn norm(&self) -> Result<NormKind> {
        Ok(self.cocycle()?.norm_kind())
    }

    pub fn problem(&self) -> Result<LpProblem> {
        Ok(LpProblem {
            cocycle: self.cocycle()?,
            bounds: self.bounds()?,
            perturbation: self.perturbation()?,
            anchor: self.anchor()?,
        })
    }

    pub fn solve_settings(&self) -> SolveSettings {
        let (g, t) = (&self.grids, &self.tolerances);
        SolveSettings {
            xi_points: g.xi_points,
            xi_extent: g.xi_extent,
            k_max: g.k_max,
            horizon: g.horizon,
            time_step: g.time_step,
            stop_tol: t.stop,
            max_iters: t.max_iters,
            ratio_tol: t.ratio,
            membership_tol: t.membership,
        }
    }

    /// Step for continuous `Psi`; `None` in discrete time.
    pub fn psi_step(&self) -> Result<Option<f64>> {
        Ok(match self.driving_system()?.time_domain {
            TimeDomain::Discrete => None,
            TimeDomain::Continuous => Some(self.samples.psi_step.unwrap_or(self.grids.time_step / 8.0)),
        })
    }

    pub fn verify_times(&self) -> Result<Vec<f64>> {
        Ok(match &self.samples.times {
            Some(t) => t.clone(),
            None => match self.driving_system()?.time_domain {
                TimeDomain::Discrete => (0..=20).map(f64::from).collect(),
                TimeDomain::Continuous => (0..=40).map(|j| 0.25 * j as f64).collect(),
            },
        })
    }

    pub fn verify_points(&self) -> Result<Vec<BasePoint>> {
        let ds = self.driving_system()?;
        match &self.samples.points {
            Some(ps) => ps.iter().map(|p| ds.point(p.clone())).collect(),
            None => Ok(ds.reference_points()),
        }
    }

    pub fn corollary(&self, id: &str) -> Result<(CorollaryData, ScanSettings)> {
        let kind: CorollaryKind = id.parse()?;
        let spec = self
            .corollary
            .get(id)
            .ok_or_else(|| Error::Config(format!("no [corollary.{id}] section")))?;
        let domain = kind.time_domain();
        let driving = match &spec.driving {
            Some(d) => d.build()?,
            None => match domain {
                TimeDomain::Discrete => DrivingSystem::integer_shift(),
                TimeDomain::Continuous => DrivingSystem::planar_shift(TimeDomain::Continuous),
            },
        };
        let data = CorollaryData {
            kind,
            driving: driving.clone(),
            delta: spec.delta,
            k: spec.k.build()?,
            a: spec.a.build()?,
            b: spec.b.build()?,
            gamma: spec.gamma,
            g: spec.g.build()?,
            lip: spec.lip.build()?,
        };
        let d = ScanSettings::default();
        let s = &spec.scan;
        let anchors = match &s.anchors {
            Some(a) => a
                .iter()
                .map(|p| driving.point(p.clone()))
                .collect::<Result<Vec<_>>>()?,
            None => driving.reference_points(),
        };
        let scan = ScanSettings {
            anchors,
            window: s.window.unwrap_or(match domain {
                TimeDomain::Discrete => 40.0,
                TimeDomain::Continuous => d.window,
            }),
            step: s.step.unwrap_or(d.step),
            limit_horizon: s.limit_horizon.unwrap_or(d.limit_horizon),
            limit_tol: s.limit_tol.unwrap_or(d.limit_tol),
            lambda_horizon: s.lambda_horizon.unwrap_or(d.lambda_horizon),
            fd_step: s.fd_step.unwrap_or(d.fd_step),
        };
        Ok((data, scan))
    }
}

fn factor(family: FactorFamily, rate: &FieldSpec, ds: &DrivingSystem) -> Result<TimeField> {
    let r = rate.build()?;
    let ds = ds.clone();
    Ok(match family {
        FactorFamily::TemperedExp => Arc::new(move |t, w| (r(w) * t).exp()),
        FactorFamily::BirkhoffExp => {
            if ds.time_domain != TimeDomain::Discrete {
                return Err(Error::Config("birkhoff-exp factors need discrete time".into()));
            }
            Arc::new(move |t, w| {
                crate::cocycle::birkhoff_sum(&*r, t, w, &ds)
                    .map(f64::exp)
                    .unwrap_or(f64::NAN)
            })
        }
        FactorFamily::RatioForm => Arc::new(move |t, w| match ds.evolve(t, w) {
            Ok(end) => r(w) / r(&end),
            Err(_) => f64::NAN,
        }),
    })
}

fn build_family(
    name: FamilyName,
    k: &FieldSpec,
    a: &FieldSpec,
    b: &FieldSpec,
    quad_step: f64,
) -> Result<BoundFamily> {
    let (k, a, b) = (k.build()?, a.build()?, b.build()?);
    Ok(match name {
        FamilyName::TemperedExp => BoundFamily::TemperedExp { k, a, b },
        FamilyName::IntegralExp => {
            if !(quad_step > 0.0) {
                return Err(Error::Config(format!(
                    "quad_step must be positive, got {quad_step}"
                )));
            }
            BoundFamily::IntegralExp { k, a, b, quad_step }
        }
        FamilyName::BirkhoffExp => BoundFamily::BirkhoffExp { k, a, b },
        FamilyName::RatioForm => BoundFamily::RatioForm { k, a, b },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_specs() {
        let f: FieldSpec =
            toml::from_str::<toml::Table>("f = { kind = \"geometric\", scale = 0.05, ratio = 0.5 }").unwrap()
                ["f"]
                .clone()
                .try_into()
                .unwrap();
        let g = f.build().unwrap();
        assert!((g(&BasePoint::scalar(-2.0)) - 0.0125).abs() < 1e-15);
        let c: FieldSpec = toml::Value::Float(2.5).try_into().unwrap();
        assert_eq!(c.constant(), Some(2.5));
        let i: FieldSpec = toml::Value::Integer(1).try_into().unwrap();
        assert_eq!(i.constant(), Some(1.0));
    }

    #[test]
    fn preset_overrides_merge() {
        let c = Config::from_toml(
            "preset = \"toy-pseudo-hyperbolic\"\n[grids]\nxi_points = 21\n[perturbation]\nkind = \"zero\"\n",
        )
        .unwrap();
        assert_eq!(c.grids.xi_points, 21);
        assert_eq!(c.grids.k_max, 40);
        assert!(c.perturbation().unwrap().is_zero());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            Config::from_toml("preset = \"nope\""),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::from_toml("[grids]\nbogus = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::from_toml("x = ").err().unwrap(),
            Error::Config(_)
        ));
        let c = Config::from_toml("").unwrap();
        assert!(matches!(c.cocycle(), Err(Error::Config(_))));
    }

    #[test]
    fn every_preset_parses() {
        for name in presets::NAMES {
            let c = Config::preset(name).unwrap();
            if c.cocycle.is_some() {
                c.bounds().unwrap();
            }
            for id in c.corollary.keys() {
                c.corollary(id).unwrap();
            }
        }
    }
}
