use super::element::{element_stiffness, ElementStiffness};
use super::{DensityField, GridMesh, LoadCase, MaterialLaw};
use crate::error::{Error, Result};

/// Pivots smaller than this fraction of their original diagonal are treated
/// as a lost rank (rigid-body motion left unconstrained).
const PIVOT_TOLERANCE: f64 = 1e-10;
const REFINE_THRESHOLD: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 3;

/// Symmetric band matrix holding the lower triangle row by row.
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    half_band: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, half_band: usize) -> Self {
        Self {
            n,
            half_band,
            data: vec![0.0; n * (half_band + 1)],
        }
    }

    fn width(&self) -> usize {
        self.half_band + 1
    }

    /// Slot of entry `(i, j)` with `j <= i` and `i - j <= half_band`.
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width() + self.half_band - (i - j)
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.data[self.slot(i, i)]
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.half_band);
            let row = &self.data[i * self.width()..(i + 1) * self.width()];
            let offset = self.half_band - (i - lo);
            let mut acc = 0.0;
            for (k, j) in (lo..i).enumerate() {
                let a = row[offset + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc + row[self.half_band] * x[i];
        }
    }

    /// In-place Cholesky `A = L L^T` within the band.
    fn factorize(&mut self) -> Result<()> {
        let w = self.width();
        let hb = self.half_band;
        for i in 0..self.n {
            let lo_i = i.saturating_sub(hb);
            let original_diag = self.diagonal(i);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(hb));
                let len = j - lo;
                let row_i = i * w + hb - (i - lo);
                let row_j = j * w + hb - (j - lo);
                let mut s = self.data[i * w + hb - (i - j)];
                for k in 0..len {
                    s -= self.data[row_i + k] * self.data[row_j + k];
                }
                if i == j {
                    if !(s.is_finite() && s > PIVOT_TOLERANCE * original_diag.abs()) {
                        return Err(Error::SingularSystem {
                            equation: i,
                            pivot: s,
                        });
                    }
                    self.data[i * w + hb] = s.sqrt();
                } else {
                    self.data[i * w + hb - (i - j)] = s / self.data[j * w + hb];
                }
            }
        }
        Ok(())
    }

    fn substitute(&self, b: &mut [f64]) {
        let w = self.width();
        let hb = self.half_band;
        for i in 0..self.n {
            let lo = i.saturating_sub(hb);
            let row = &self.data[i * w + hb - (i - lo)..i * w + hb];
            let dot: f64 = row.iter().zip(&b[lo..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - dot) / self.data[i * w + hb];
        }
        for i in (0..self.n).rev() {
            b[i] /= self.data[i * w + hb];
            let xi = b[i];
            let lo = i.saturating_sub(hb);
            let row = &self.data[i * w + hb - (i - lo)..i * w + hb];
            for (l, y) in row.iter().zip(&mut b[lo..i]) {
                *y -= l * xi;
            }
        }
    }
}

/// A factorized global stiffness matrix restricted to the free DOFs.
///
/// One factorization serves every load case that shares the same supports.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    n_dofs: usize,
    free: Vec<usize>,
    reduced: Vec<Option<usize>>,
    matrix: BandMatrix,
    factor: BandMatrix,
}

impl StiffnessSystem {
    pub fn assemble(
        mesh: &GridMesh,
        law: &MaterialLaw,
        densities: &DensityField,
        fixed_dofs: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        densities.check_mesh(mesh)?;
        let ke = element_stiffness(law);
        let n_dofs = mesh.n_dofs();
        let mut is_fixed = vec![false; n_dofs];
        let mut any_fixed = false;
        for d in fixed_dofs {
            if d >= n_dofs {
                return Err(Error::InvalidParameter(format!(
                    "fixed DOF {d} outside mesh with {n_dofs} DOFs"
                )));
            }
            is_fixed[d] = true;
            any_fixed = true;
        }
        if !any_fixed {
            return Err(Error::InvalidParameter(
                "at least one DOF must be constrained".into(),
            ));
        }
        let mut reduced = vec![None; n_dofs];
        let mut free = Vec::with_capacity(n_dofs);
        for d in 0..n_dofs {
            if !is_fixed[d] {
                reduced[d] = Some(free.len());
                free.push(d);
            }
        }

        let mut half_band = 0;
        for e in 0..mesh.n_elements() {
            let ids: Vec<usize> = mesh
                .element_dofs(e)
                .iter()
                .filter_map(|d| reduced[*d])
                .collect();
            if let (Some(lo), Some(hi)) = (ids.iter().min(), ids.iter().max()) {
                half_band = half_band.max(hi - lo);
            }
        }

        let mut matrix = BandMatrix::zeros(free.len(), half_band);
        scatter(mesh, law, densities, &ke, &reduced, &mut matrix);
        let mut factor = matrix.clone();
        factor.factorize()?;
        Ok(Self {
            n_dofs,
            free,
            reduced,
            matrix,
            factor,
        })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.matrix.half_band
    }

    /// Solves `K u = f` for one load case; constrained DOFs stay at zero.
    pub fn solve(&self, load: &LoadCase) -> Result<Vec<f64>> {
        let f = load.load_vector(self.n_dofs);
        self.solve_vector(&f)
    }

    /// Solves with a dense load vector of full length; entries on constrained
    /// DOFs are ignored.
    pub fn solve_vector(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                what: "load vector",
                expected: self.n_dofs,
                actual: f.len(),
            });
        }
        let rhs: Vec<f64> = self.free.iter().map(|&d| f[d]).collect();
        let mut x = rhs.clone();
        self.factor.substitute(&mut x);

        // iterative refinement keeps the residual bound under high density contrast
        let rhs_norm = norm(&rhs);
        if rhs_norm > 0.0 {
            let mut ax = vec![0.0; rhs.len()];
            for _ in 0..MAX_REFINEMENTS {
                self.matrix.mul(&x, &mut ax);
                let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                if norm(&r) <= REFINE_THRESHOLD * rhs_norm {
                    break;
                }
                self.factor.substitute(&mut r);
                x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
            }
        }

        let mut u = vec![0.0; self.n_dofs];
        for (k, &d) in self.free.iter().enumerate() {
            u[d] = x[k];
        }
        Ok(u)
    }

    /// Relative residual `|K u - f| / |f|` over the free DOFs.
    pub fn relative_residual(&self, u: &[f64], f: &[f64]) -> f64 {
        let x: Vec<f64> = self.free.iter().map(|&d| u[d]).collect();
        let rhs: Vec<f64> = self.free.iter().map(|&d| f[d]).collect();
        let mut ax = vec![0.0; x.len()];
        self.matrix.mul(&x, &mut ax);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let denom = norm(&rhs);
        if denom == 0.0 {
            norm(&r)
        } else {
            norm(&r) / denom
        }
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.reduced[dof].is_some()
    }
}

fn scatter(
    mesh: &GridMesh,
    law: &MaterialLaw,
    densities: &DensityField,
    ke: &ElementStiffness,
    reduced: &[Option<usize>],
    matrix: &mut BandMatrix,
) {
    for (e, &rho) in densities.physical().iter().enumerate() {
        let modulus = law.modulus(rho);
        let dofs = mesh.element_dofs(e);
        for a in 0..8 {
            let Some(i) = reduced[dofs[a]] else { continue };
            for b in 0..8 {
                let Some(j) = reduced[dofs[b]] else { continue };
                if j <= i {
                    matrix.add(i, j, modulus * ke[a][b]);
                }
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembles `K(rho_phys)`, applies the supports of `load` and solves.
pub fn assemble_and_solve(
    mesh: &GridMesh,
    law: &MaterialLaw,
    densities: &DensityField,
    load: &LoadCase,
) -> Result<Vec<f64>> {
    load.validate(mesh)?;
    let system = StiffnessSystem::assemble(mesh, law, densities, load.fixed_dofs.iter().copied())?;
    system.solve(load)
}
