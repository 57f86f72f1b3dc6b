//! Field images, raw field grids and threshold masks.
//!
//! For load case `k > 1` file names carry a `_case<k>` suffix. Images show
//! `255 |v| / max |v|`; the CSV next to each image holds the signed values
//! as a top-row-first grid. A mask marks elements whose value exceeds the
//! threshold.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{field_map, DensityField, FieldKind, FieldMap};
use crate::io::pgm::{write_grid, Grid};
use crate::simp::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldExport {
    pub kind: FieldKind,
    pub case: usize,
    pub image: PathBuf,
    pub max_abs: f64,
    pub mask: Option<MaskStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub threshold: f64,
    pub area: usize,
    pub components: usize,
}

pub fn threshold_mask(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v > threshold).collect()
}

/// 4-connected components of a row-major mask.
pub fn count_components(mask: &[bool], width: usize, height: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
    }
    count
}

pub fn mask_stats(grid: &Grid, threshold: f64) -> MaskStats {
    let mask = threshold_mask(&grid.values, threshold);
    MaskStats {
        threshold,
        area: mask.iter().filter(|m| **m).count(),
        components: count_components(&mask, grid.width, grid.height),
    }
}

fn grid_csv(grid: &Grid) -> String {
    let mut out = String::new();
    for row in grid.values.chunks(grid.width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Evaluates one field per load case.
pub fn evaluate_fields(
    problem: &Problem,
    densities: &DensityField,
    kind: FieldKind,
) -> Result<Vec<FieldMap>> {
    let analysis = problem.analyze(densities)?;
    analysis
        .displacements
        .iter()
        .map(|u| field_map(kind, u, &problem.mesh, &problem.law, densities))
        .collect()
}

/// Writes images, CSV grids and masks for `kinds` into `dir`.
pub fn export_fields(
    dir: &Path,
    problem: &Problem,
    densities: &DensityField,
    kinds: &[FieldKind],
    thresholds: &[(FieldKind, f64)],
) -> Result<Vec<FieldExport>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let analysis = problem.analyze(densities)?;
    let mut exports = Vec::new();
    for &kind in kinds {
        for (k, u) in analysis.displacements.iter().enumerate() {
            let field = field_map(kind, u, &problem.mesh, &problem.law, densities)?;
            let stem = if k == 0 {
                kind.name().to_string()
            } else {
                format!("{}_case{}", kind.name(), k + 1)
            };
            let raw = Grid::from_elements(&problem.mesh, &field.values)?;
            let csv_path = dir.join(format!("{stem}.csv"));
            std::fs::write(&csv_path, grid_csv(&raw)).map_err(|e| Error::io(&csv_path, e))?;

            let norm = field.normalized();
            let shown = Grid::from_elements(
                &problem.mesh,
                &norm.values.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            )?;
            let image = dir.join(format!("{stem}.pgm"));
            write_grid(&image, &shown)?;

            let mask = match thresholds.iter().find(|(t, _)| *t == kind) {
                Some(&(_, threshold)) => {
                    let stats = mask_stats(&raw, threshold);
                    let bits = threshold_mask(&raw.values, threshold);
                    let grid = Grid::new(
                        raw.width,
                        raw.height,
                        bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
                    )?;
                    write_grid(&dir.join(format!("{stem}_mask.pgm")), &grid)?;
                    Some(stats)
                }
                None => None,
            };
            exports.push(FieldExport {
                kind,
                case: k + 1,
                image,
                max_abs: field.max_abs(),
                mask,
            });
        }
    }
    Ok(exports)
}
