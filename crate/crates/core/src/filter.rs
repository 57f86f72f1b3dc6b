//! Cone-weight convolution filters for sensitivities and densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::GridMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    Sensitivity,
    Density,
}

/// Precomputed weights `w(e, j) = max(0, rmin - dist(e, j))` between element
/// centres, stored row-compressed.
#[derive(Debug, Clone)]
pub struct ConvolutionFilter {
    offsets: Vec<usize>,
    columns: Vec<usize>,
    weights: Vec<f64>,
    row_sums: Vec<f64>,
}

impl ConvolutionFilter {
    pub fn new(mesh: &GridMesh, rmin: f64) -> Result<Self> {
        if !(rmin.is_finite() && rmin >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "filter radius must be >= 1, got {rmin}"
            )));
        }
        let reach = rmin.ceil() as isize - 1;
        let (nelx, nely) = (mesh.nelx() as isize, mesh.nely() as isize);
        let mut offsets = Vec::with_capacity(mesh.n_elements() + 1);
        let mut columns = Vec::new();
        let mut weights = Vec::new();
        let mut row_sums = Vec::with_capacity(mesh.n_elements());
        offsets.push(0);
        for e in 0..mesh.n_elements() {
            let (ex, ey) = mesh.element_coords(e);
            let (ex, ey) = (ex as isize, ey as isize);
            let mut sum = 0.0;
            for kx in (ex - reach).max(0)..=(ex + reach).min(nelx - 1) {
                for ky in (ey - reach).max(0)..=(ey + reach).min(nely - 1) {
                    let dist = (((ex - kx).pow(2) + (ey - ky).pow(2)) as f64).sqrt();
                    let w = rmin - dist;
                    if w > 0.0 {
                        columns.push(mesh.element_index(kx as usize, ky as usize));
                        weights.push(w);
                        sum += w;
                    }
                }
            }
            row_sums.push(sum);
            offsets.push(columns.len());
        }
        Ok(Self {
            offsets,
            columns,
            weights,
            row_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.row_sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_sums.is_empty()
    }

    fn weighted_sum(&self, e: usize, values: impl Fn(usize) -> f64) -> f64 {
        let range = self.offsets[e]..self.offsets[e + 1];
        self.columns[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&j, &w)| w * values(j))
            .sum()
    }

    /// Normalized average `sum_j w x_j / sum_j w`.
    pub fn density(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|e| self.weighted_sum(e, |j| x[j]) / self.row_sums[e])
            .collect()
    }

    /// Classical density-weighted sensitivity average.
    pub fn sensitivity(&self, x: &[f64], dc: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|e| {
                self.weighted_sum(e, |j| x[j] * dc[j]) / self.row_sums[e] / x[e].max(1e-3)
            })
            .collect()
    }

    /// Chain rule through [`ConvolutionFilter::density`]: maps derivatives with
    /// respect to physical densities onto design densities.
    pub fn chain(&self, d: &[f64]) -> Vec<f64> {
        // weights are symmetric, so H^T = H
        (0..self.len())
            .map(|e| self.weighted_sum(e, |j| d[j] / self.row_sums[j]))
            .collect()
    }
}

/// One-shot filter application.
///
/// In density mode `values` are densities; in sensitivity mode `values` are
/// sensitivities weighted by `densities`.
pub fn convolution_filter(
    values: &[f64],
    densities: &[f64],
    mesh: &GridMesh,
    rmin: f64,
    mode: FilterMode,
) -> Result<Vec<f64>> {
    if values.len() != mesh.n_elements() || densities.len() != mesh.n_elements() {
        return Err(Error::DimensionMismatch {
            what: "filter input",
            expected: mesh.n_elements(),
            actual: values.len().min(densities.len()),
        });
    }
    let filter = ConvolutionFilter::new(mesh, rmin)?;
    Ok(match mode {
        FilterMode::Density => filter.density(values),
        FilterMode::Sensitivity => filter.sensitivity(densities, values),
    })
}
