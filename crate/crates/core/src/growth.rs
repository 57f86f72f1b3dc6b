//! Logarithmic volume–compliance growth curves.
//!
//! A curve is the family `1/c = a ln(v) + b` anchored at `(v0, c = inf)` and
//! at the solid point `(1, c_min)`, which gives `b = 1/c_min` and
//! `a = -1 / (c_min ln v0)`. Solving for `v` yields the per-iteration target
//! `v_{i+1} = v0^(1 - c_min / c_i)`.
//!
//! Compliance here is always `c = u^T K u`. Strain energy is `c / 2`; the
//! growth constants absorb any fixed factor between the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DensityField, GridMesh, LoadCase, MaterialLaw, StiffnessSystem};

/// Distance to a curve, in `1/c` units, that counts as lying on it.
pub const CURVE_TOLERANCE: f64 = 1e-3;

/// Starting volumes closer to 1 than this make the slope blow up.
pub const MAX_START_VOLUME: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCurve {
    v0: f64,
    c_min: f64,
    a: f64,
    b: f64,
}

impl GrowthCurve {
    pub fn new(v0: f64, c_min: f64) -> Result<Self> {
        if !(v0.is_finite() && c_min.is_finite()) {
            return Err(Error::NonFiniteInput("growth curve parameters"));
        }
        if !(v0 > 0.0 && v0 <= MAX_START_VOLUME) {
            return Err(Error::DegenerateCurve(format!(
                "starting volume {v0} must lie in (0, {MAX_START_VOLUME}]"
            )));
        }
        if c_min <= 0.0 {
            return Err(Error::DegenerateCurve(format!(
                "solid compliance must be positive, got {c_min}"
            )));
        }
        Ok(Self {
            v0,
            c_min,
            a: -1.0 / (c_min * v0.ln()),
            b: 1.0 / c_min,
        })
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn slope(&self) -> f64 {
        self.a
    }

    pub fn intercept(&self) -> f64 {
        self.b
    }

    /// `a ln(v) + b`.
    pub fn inverse_compliance(&self, v: f64) -> f64 {
        self.a * v.ln() + self.b
    }

    /// Compliance on the curve at volume `v`; infinite at or below `v0`.
    pub fn compliance_at(&self, v: f64) -> f64 {
        let inv = self.inverse_compliance(v);
        if inv <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / inv
        }
    }

    /// Volume on the curve at compliance `c`, i.e. `v0^(1 - c_min/c)`.
    pub fn volume_at(&self, c: f64) -> f64 {
        self.v0.powf(1.0 - self.c_min / c)
    }

    /// Off-curve distance `|1/c - (a ln v + b)|`.
    pub fn residual(&self, v: f64, c: f64) -> f64 {
        (1.0 / c - self.inverse_compliance(v)).abs()
    }

    pub fn contains(&self, v: f64, c: f64) -> bool {
        self.residual(v, c) <= CURVE_TOLERANCE
    }

    /// Integration constants of the underlying density law, for a given
    /// ratio `psi_per_compliance` between strain energy and compliance.
    pub fn constants(&self, psi_per_compliance: f64) -> GrowthConstants {
        GrowthConstants {
            alpha: self.a / psi_per_compliance,
            beta: self.b / psi_per_compliance,
            gamma: 1.0,
        }
    }
}

/// Constants of `alpha ln(rho) + beta = 1/Psi`, with `alpha = B dt` from the
/// mechanostat rate law and the Carter–Hayes exponent `gamma` fixed at 1.
/// Only their combinations `a`, `b` are used at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn make_curve(v0: f64, c_min: f64) -> Result<GrowthCurve> {
    GrowthCurve::new(v0, c_min)
}

/// Which closed form drives the volume update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeUpdateForm {
    /// `v0^(1 - c_min / c)`.
    #[default]
    Exponential,
    /// `(1/c_min - 1/c) c_min ln(v0)` as typeset, which is `ln v` rather
    /// than `v`. Kept for comparison runs only.
    AsPrinted,
}

/// Raw volume from the update law, before the monotone clamp.
pub fn raw_volume(curve: &GrowthCurve, c: f64, form: VolumeUpdateForm) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::NonFiniteInput("compliance"));
    }
    let c = c.max(curve.c_min);
    Ok(match form {
        VolumeUpdateForm::Exponential => curve.volume_at(c),
        VolumeUpdateForm::AsPrinted => (1.0 / curve.c_min - 1.0 / c) * curve.c_min * curve.v0.ln(),
    })
}

/// Next volume target: the curve's volume at `c_i`, never below `v_i` and
/// never above 1.
pub fn next_volume(curve: &GrowthCurve, c_i: f64, v_i: f64) -> Result<f64> {
    next_volume_with(curve, c_i, v_i, VolumeUpdateForm::Exponential)
}

pub fn next_volume_with(
    curve: &GrowthCurve,
    c_i: f64,
    v_i: f64,
    form: VolumeUpdateForm,
) -> Result<f64> {
    if !v_i.is_finite() {
        return Err(Error::NonFiniteInput("volume fraction"));
    }
    if !(v_i > 0.0 && v_i <= 1.0) {
        return Err(Error::Domain(format!("volume fraction {v_i} outside (0, 1]")));
    }
    let raw = raw_volume(curve, c_i, form)?;
    Ok(raw.max(v_i).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub v: f64,
    pub c: f64,
}

/// Fraction of `(1 - v0)` skipped at the start of a sampled curve, where
/// compliance is unbounded.
const CURVE_START_OFFSET: f64 = 1e-3;

/// `n` samples with `v` log-spaced from just above `v0` up to exactly 1.
pub fn curve_points(curve: &GrowthCurve, n: usize) -> Result<Vec<CurvePoint>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two curve samples, got {n}"
        )));
    }
    let start = curve.v0 + CURVE_START_OFFSET * (1.0 - curve.v0);
    let log_start = start.ln();
    Ok((0..n)
        .map(|k| {
            let v = if k == n - 1 {
                1.0
            } else {
                (log_start * (1.0 - k as f64 / (n - 1) as f64)).exp()
            };
            CurvePoint {
                v,
                c: 1.0 / curve.inverse_compliance(v),
            }
        })
        .collect())
}

/// Compliance of the fully solid domain, averaged over load cases with the
/// given weights (equal weights when `None`).
pub fn solid_compliance(
    mesh: &GridMesh,
    law: &MaterialLaw,
    loads: &[LoadCase],
    weights: Option<&[f64]>,
) -> Result<f64> {
    if loads.is_empty() {
        return Err(Error::InvalidParameter("no load cases".into()));
    }
    let solid = DensityField::uniform(mesh, 1.0)?;
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    let mut systems: Vec<(std::collections::BTreeSet<usize>, StiffnessSystem)> = Vec::new();
    for (k, load) in loads.iter().enumerate() {
        load.validate(mesh)?;
        let w = weights.map_or(1.0, |w| w[k]);
        let idx = match systems.iter().position(|(fixed, _)| *fixed == load.fixed_dofs) {
            Some(i) => i,
            None => {
                let s = StiffnessSystem::assemble(mesh, law, &solid, load.fixed_dofs.iter().copied())?;
                systems.push((load.fixed_dofs.clone(), s));
                systems.len() - 1
            }
        };
        let system = &systems[idx].1;
        let u = system.solve(load)?;
        let f = load.load_vector(mesh.n_dofs());
        let c: f64 = f.iter().zip(&u).map(|(f, u)| f * u).sum();
        total += w * c;
        weight_sum += w;
    }
    Ok(total / weight_sum)
}

/// A declarative jump from the current growth curve onto another one,
/// executed by [`crate::simp::PlanRunner`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InterpolationPlan {
    /// Keep growing on the current curve until compliance drops to
    /// `compliance_threshold`, then follow the target law (volume held by the
    /// monotone clamp) until the state lies on the target curve.
    Horizontal {
        compliance_threshold: f64,
        target: GrowthCurve,
    },
    /// Grow on the current curve up to `volume_threshold`, then run
    /// fixed-volume updates there until compliance meets the target curve.
    Vertical {
        volume_threshold: f64,
        target: GrowthCurve,
    },
}

impl InterpolationPlan {
    pub fn target(&self) -> &GrowthCurve {
        match self {
            InterpolationPlan::Horizontal { target, .. } => target,
            InterpolationPlan::Vertical { target, .. } => target,
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            InterpolationPlan::Horizontal { .. } => "horizontal",
            InterpolationPlan::Vertical { .. } => "vertical",
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            InterpolationPlan::Horizontal {
                compliance_threshold,
                ..
            } => *compliance_threshold,
            InterpolationPlan::Vertical {
                volume_threshold, ..
            } => *volume_threshold,
        }
    }

    /// Whether the state `(v, c)` has crossed the plan's threshold.
    pub fn threshold_reached(&self, v: f64, c: f64) -> bool {
        match self {
            InterpolationPlan::Horizontal {
                compliance_threshold,
                ..
            } => c <= *compliance_threshold,
            InterpolationPlan::Vertical {
                volume_threshold, ..
            } => v >= volume_threshold - 1e-9,
        }
    }

    pub fn on_target(&self, v: f64, c: f64) -> bool {
        self.target().contains(v, c)
    }
}

fn check_same_family(source: &GrowthCurve, target: &GrowthCurve) -> Result<()> {
    let rel = (source.c_min - target.c_min).abs() / source.c_min;
    if rel > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "curves belong to different problems (c_min {} vs {})",
            source.c_min, target.c_min
        )));
    }
    Ok(())
}

pub fn interpolate_horizontal(
    source: &GrowthCurve,
    compliance_threshold: f64,
    target: &GrowthCurve,
) -> Result<InterpolationPlan> {
    check_same_family(source, target)?;
    if !compliance_threshold.is_finite() {
        return Err(Error::NonFiniteInput("compliance threshold"));
    }
    if compliance_threshold <= target.c_min {
        return Err(Error::Unreachable(format!(
            "compliance {compliance_threshold} is at or below the solid limit {} of the target curve",
            target.c_min
        )));
    }
    Ok(InterpolationPlan::Horizontal {
        compliance_threshold,
        target: *target,
    })
}

pub fn interpolate_vertical(
    source: &GrowthCurve,
    volume_threshold: f64,
    target: &GrowthCurve,
) -> Result<InterpolationPlan> {
    check_same_family(source, target)?;
    let lo = source.v0.max(target.v0);
    if !(volume_threshold > lo && volume_threshold < 1.0) {
        return Err(Error::Domain(format!(
            "volume threshold {volume_threshold} must lie in ({lo}, 1)"
        )));
    }
    Ok(InterpolationPlan::Vertical {
        volume_threshold,
        target: *target,
    })
}
