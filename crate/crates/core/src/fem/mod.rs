//! Regular-grid Q4 plane-stress finite elements.
//!
//! Elements are unit squares with unit thickness. Nodes and elements are
//! numbered column-major from the top-left corner, the same layout as the
//! classic 88-line MATLAB code, so published fixtures can be cross-checked
//! DOF-for-DOF. Public coordinates use `(ix, iy)` with `iy` pointing up.

mod element;
mod fields;
mod solver;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use element::{element_stiffness, ElementStiffness};
pub use fields::{compliance, field_map, Compliance, FieldKind, FieldMap};
pub use solver::{assemble_and_solve, StiffnessSystem};

/// Lower bound on any element density. Keeps the stiffness matrix regular
/// even where material has been removed.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl Component {
    fn offset(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridMesh {
    nelx: usize,
    nely: usize,
}

impl GridMesh {
    pub fn new(nelx: usize, nely: usize) -> Result<Self> {
        if nelx == 0 || nely == 0 {
            return Err(Error::InvalidMesh(format!(
                "element counts must be positive, got {nelx}x{nely}"
            )));
        }
        Ok(Self { nelx, nely })
    }

    pub fn nelx(&self) -> usize {
        self.nelx
    }

    pub fn nely(&self) -> usize {
        self.nely
    }

    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_nodes(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn contains_node(&self, ix: usize, iy: usize) -> bool {
        ix <= self.nelx && iy <= self.nely
    }

    /// Global node number of node `(ix, iy)`; `iy = 0` is the bottom edge.
    pub fn node_id(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(self.contains_node(ix, iy));
        (self.nely + 1) * ix + (self.nely - iy)
    }

    pub fn node_dof(&self, ix: usize, iy: usize, component: Component) -> usize {
        2 * self.node_id(ix, iy) + component.offset()
    }

    /// Inverse of [`GridMesh::node_id`].
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        let ix = node / (self.nely + 1);
        let row = node % (self.nely + 1);
        (ix, self.nely - row)
    }

    /// Element storage index of element `(ex, ey)`; `ey = 0` is the bottom row.
    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        debug_assert!(ex < self.nelx && ey < self.nely);
        ex * self.nely + (self.nely - 1 - ey)
    }

    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        let ex = e / self.nely;
        let row = e % self.nely;
        (ex, self.nely - 1 - row)
    }

    /// DOFs of element `e` in local order: bottom-left, bottom-right,
    /// top-right, top-left, each as (x, y).
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let (ex, ey) = self.element_coords(e);
        let corners = [
            self.node_id(ex, ey),
            self.node_id(ex + 1, ey),
            self.node_id(ex + 1, ey + 1),
            self.node_id(ex, ey + 1),
        ];
        let mut dofs = [0; 8];
        for (k, n) in corners.iter().enumerate() {
            dofs[2 * k] = 2 * n;
            dofs[2 * k + 1] = 2 * n + 1;
        }
        dofs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialLaw {
    e0: f64,
    emin: f64,
    nu: f64,
    penal: f64,
}

impl MaterialLaw {
    pub fn new(e0: f64, emin: f64, nu: f64, penal: f64) -> Result<Self> {
        let all_finite = [e0, emin, nu, penal].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidMaterial("parameters must be finite".into()));
        }
        if !(e0 > 0.0 && emin > 0.0 && emin < e0) {
            return Err(Error::InvalidMaterial(format!(
                "need 0 < Emin < E0, got Emin={emin}, E0={e0}"
            )));
        }
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidMaterial(format!(
                "Poisson ratio must lie in (0, 0.5), got {nu}"
            )));
        }
        if penal < 1.0 {
            return Err(Error::InvalidMaterial(format!(
                "penalization exponent must be >= 1, got {penal}"
            )));
        }
        Ok(Self { e0, emin, nu, penal })
    }

    /// `E0 = 1`, `Emin = 1e-9 E0`, `nu = 0.3`, `p = 3`.
    pub fn standard() -> Self {
        Self {
            e0: 1.0,
            emin: 1e-9,
            nu: 0.3,
            penal: 3.0,
        }
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn emin(&self) -> f64 {
        self.emin
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn penal(&self) -> f64 {
        self.penal
    }

    /// SIMP interpolation `Emin + rho^p (E0 - Emin)`.
    pub fn modulus(&self, rho: f64) -> f64 {
        self.emin + rho.powf(self.penal) * (self.e0 - self.emin)
    }

    /// Derivative of [`MaterialLaw::modulus`] with respect to `rho`.
    pub fn modulus_slope(&self, rho: f64) -> f64 {
        self.penal * rho.powf(self.penal - 1.0) * (self.e0 - self.emin)
    }

    pub fn with_e0(&self, e0: f64) -> Result<Self> {
        Self::new(e0, self.emin * e0 / self.e0, self.nu, self.penal)
    }
}

impl Default for MaterialLaw {
    fn default() -> Self {
        Self::standard()
    }
}

/// Design densities and the physical (filtered) densities used for stiffness.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    design: Vec<f64>,
    physical: Vec<f64>,
}

impl DensityField {
    pub fn new(design: Vec<f64>, physical: Vec<f64>) -> Result<Self> {
        if design.len() != physical.len() {
            return Err(Error::DimensionMismatch {
                what: "design vs physical densities",
                expected: design.len(),
                actual: physical.len(),
            });
        }
        for (name, values) in [("design", &design), ("physical", &physical)] {
            if let Some(bad) = values
                .iter()
                .find(|v| !(v.is_finite() && **v > 0.0 && **v <= 1.0))
            {
                return Err(Error::Domain(format!(
                    "{name} density {bad} outside (0, 1]"
                )));
            }
        }
        Ok(Self { design, physical })
    }

    pub fn uniform(mesh: &GridMesh, value: f64) -> Result<Self> {
        let values = vec![value; mesh.n_elements()];
        Self::new(values.clone(), values)
    }

    /// A field whose design and physical densities coincide.
    pub fn from_physical(values: Vec<f64>) -> Result<Self> {
        Self::new(values.clone(), values)
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn physical(&self) -> &[f64] {
        &self.physical
    }

    pub fn len(&self) -> usize {
        self.physical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.physical.is_empty()
    }

    /// Volume fraction, the mean physical density.
    pub fn volume(&self) -> f64 {
        mean(&self.physical)
    }

    pub fn check_mesh(&self, mesh: &GridMesh) -> Result<()> {
        if self.len() != mesh.n_elements() {
            return Err(Error::DimensionMismatch {
                what: "density field vs mesh elements",
                expected: mesh.n_elements(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Supports and nodal forces for one loading state.
///
/// A force on a constrained DOF is kept in the record but never enters the
/// solve: the support absorbs it as a reaction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadCase {
    pub fixed_dofs: BTreeSet<usize>,
    pub forces: BTreeMap<usize, f64>,
}

impl LoadCase {
    pub fn new(fixed_dofs: impl IntoIterator<Item = usize>) -> Self {
        Self {
            fixed_dofs: fixed_dofs.into_iter().collect(),
            forces: BTreeMap::new(),
        }
    }

    pub fn with_force(mut self, dof: usize, magnitude: f64) -> Self {
        *self.forces.entry(dof).or_insert(0.0) += magnitude;
        self
    }

    pub fn validate(&self, mesh: &GridMesh) -> Result<()> {
        if self.fixed_dofs.is_empty() {
            return Err(Error::InvalidParameter(
                "load case has no constrained DOFs".into(),
            ));
        }
        let n = mesh.n_dofs();
        if let Some(d) = self
            .fixed_dofs
            .iter()
            .chain(self.forces.keys())
            .find(|d| **d >= n)
        {
            return Err(Error::InvalidParameter(format!(
                "DOF {d} outside mesh with {n} DOFs"
            )));
        }
        if self.forces.values().any(|f| !f.is_finite()) {
            return Err(Error::NonFiniteInput("force magnitude"));
        }
        Ok(())
    }

    /// Dense load vector with forces on constrained DOFs dropped.
    pub fn load_vector(&self, n_dofs: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_dofs];
        for (&dof, &value) in &self.forces {
            if !self.fixed_dofs.contains(&dof) {
                f[dof] += value;
            }
        }
        f
    }
}
