//! CSV tables for curves, frequency samples and band queries.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::{BandMode, FreqCurve, Segment};
use crate::growth::{curve_points, GrowthCurve};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))
}

/// Sample of an analytic growth curve `1/c = a ln v + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub v0: f64,
    pub c_min: f64,
    pub a: f64,
    pub b: f64,
    pub v: f64,
    pub c: f64,
    pub inv_c: f64,
}

pub fn curve_rows(curves: &[GrowthCurve], samples: usize) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for curve in curves {
        for p in curve_points(curve, samples)? {
            rows.push(CurveRow {
                v0: curve.v0(),
                c_min: curve.c_min(),
                a: curve.slope(),
                b: curve.intercept(),
                v: p.v,
                c: p.c,
                inv_c: 1.0 / p.c,
            });
        }
    }
    Ok(rows)
}

/// One iteration of a run, for plotting histories against the curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub v0: f64,
    pub iter: usize,
    pub v: f64,
    pub c: f64,
    pub inv_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqRow {
    pub v0: f64,
    pub v: f64,
    pub k_norm: f64,
    pub f_norm: f64,
}

pub fn freq_rows(curves: &[FreqCurve]) -> Vec<FreqRow> {
    curves
        .iter()
        .flat_map(|fc| {
            fc.points.iter().map(move |p| FreqRow {
                v0: fc.v0,
                v: p.v_norm,
                k_norm: p.k_norm,
                f_norm: p.f_norm,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub v0: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub mode: BandMode,
}

pub fn band_rows(segments: &[Segment], mode: BandMode) -> Vec<BandRow> {
    segments
        .iter()
        .map(|s| BandRow {
            v0: s.v0,
            v_lo: s.v_lo,
            v_hi: s.v_hi,
            mode,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let curves = [GrowthCurve::new(0.3, 0.75).unwrap()];
        let rows = curve_rows(&curves, 5).unwrap();
        write_rows(&path, &rows).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back: Vec<CurveRow> = read_rows(&path).unwrap();
        assert_eq!(back, rows);
        write_rows(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        let text = String::from_utf8(first).unwrap();
        assert!(text.starts_with("v0,c_min,a,b,v,c,inv_c\n"));
    }
}
