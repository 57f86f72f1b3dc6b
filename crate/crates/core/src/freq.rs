//! Normalized volume–stiffness–frequency design curves and band queries.
//!
//! Stiffness is `k = 1/c` relative to the solid block and mass is
//! proportional to volume, so `f_norm = sqrt(k_norm / v_norm)`. No
//! eigenproblem is solved; `f_norm` is a single-degree-of-freedom estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{curve_points, GrowthCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqPoint {
    pub v_norm: f64,
    pub k_norm: f64,
    pub f_norm: f64,
}

/// Normalized point for volume `v` and compliance `c` of a problem whose
/// solid compliance is `c_min`.
pub fn freq_point(v: f64, c: f64, c_min: f64) -> Result<FreqPoint> {
    if !(v.is_finite() && c.is_finite() && c_min.is_finite()) {
        return Err(Error::NonFiniteInput("frequency point"));
    }
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Domain(format!("volume {v} outside (0, 1]")));
    }
    if !(c_min > 0.0 && c >= c_min) {
        return Err(Error::Domain(format!(
            "compliance {c} below the solid limit {c_min}"
        )));
    }
    let k_norm = c_min / c;
    Ok(FreqPoint {
        v_norm: v,
        k_norm,
        f_norm: (k_norm / v).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandGap {
    lo: f64,
    hi: f64,
}

impl BandGap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "band gap needs 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Keep volumes whose frequency lies outside the band.
    Avoid,
    /// Keep volumes whose frequency lies inside the band.
    Target,
}

/// Frequency samples along one growth curve or run history, ordered by
/// increasing volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqCurve {
    pub v0: f64,
    pub points: Vec<FreqPoint>,
}

impl FreqCurve {
    pub fn from_curve(curve: &GrowthCurve, n: usize) -> Result<Self> {
        let points = curve_points(curve, n)?
            .into_iter()
            .map(|p| freq_point(p.v, p.c, curve.c_min()))
            .collect::<Result<_>>()?;
        Ok(Self {
            v0: curve.v0(),
            points,
        })
    }

    /// Samples from `(v, c)` pairs of a run. Points are sorted by volume;
    /// for repeated volumes the latest compliance wins.
    pub fn from_history(v0: f64, c_min: f64, history: &[(f64, f64)]) -> Result<Self> {
        let mut points: Vec<FreqPoint> = Vec::with_capacity(history.len());
        let mut order: Vec<usize> = (0..history.len()).collect();
        order.sort_by(|&a, &b| history[a].0.total_cmp(&history[b].0).then(a.cmp(&b)));
        for i in order {
            let (v, c) = history[i];
            let p = freq_point(v, c.max(c_min), c_min)?;
            match points.last_mut() {
                Some(last) if last.v_norm == v => *last = p,
                _ => points.push(p),
            }
        }
        Ok(Self { v0, points })
    }
}

/// A closed volume interval `[v_lo, v_hi]` on the curve started at `v0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub v0: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

/// Volume intervals of each curve whose frequency is outside (avoid) or
/// inside (target) the band, with linear interpolation between samples.
/// An empty result is valid.
pub fn band_query(curves: &[FreqCurve], gap: &BandGap, mode: BandMode) -> Result<Vec<Segment>> {
    if curves.is_empty() {
        return Err(Error::InvalidParameter("band query needs at least one curve".into()));
    }
    let mut segments = Vec::new();
    for curve in curves {
        if curve.points.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "curve v0 = {} has no samples",
                curve.v0
            )));
        }
        let keep = |f: f64| gap.contains(f) == (mode == BandMode::Target);
        let pts = &curve.points;
        if pts.len() == 1 {
            let p = pts[0];
            if keep(p.f_norm) {
                segments.push(Segment {
                    v0: curve.v0,
                    v_lo: p.v_norm,
                    v_hi: p.v_norm,
                });
            }
            continue;
        }

        let mut open: Option<Segment> = None;
        for pair in pts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let mut cuts = vec![a.v_norm];
            for level in [gap.lo, gap.hi] {
                let (da, db) = (a.f_norm - level, b.f_norm - level);
                if da * db < 0.0 {
                    let t = da / (da - db);
                    cuts.push(a.v_norm + t * (b.v_norm - a.v_norm));
                }
            }
            cuts.push(b.v_norm);
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi <= lo {
                    continue;
                }
                let t = (0.5 * (lo + hi) - a.v_norm) / (b.v_norm - a.v_norm);
                let f_mid = a.f_norm + t * (b.f_norm - a.f_norm);
                if keep(f_mid) {
                    match &mut open {
                        Some(seg) => seg.v_hi = hi,
                        None => {
                            open = Some(Segment {
                                v0: curve.v0,
                                v_lo: lo,
                                v_hi: hi,
                            })
                        }
                    }
                } else if let Some(seg) = open.take() {
                    segments.push(seg);
                }
            }
        }
        segments.extend(open);
    }
    Ok(segments)
}
