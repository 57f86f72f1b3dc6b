use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::element::{centre_gradients, element_stiffness, quadratic_form};
use super::{DensityField, GridMesh, MaterialLaw};
use crate::error::{Error, Result};

/// Compliance of a solved state.
///
/// `total` is `u^T K u`. The stored strain energy is half of it; the two
/// differ by exactly that factor everywhere in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Compliance {
    pub total: f64,
    /// `u_e^T k0 u_e` with the unit-modulus element matrix.
    pub element_unit: Vec<f64>,
    /// Per-element contribution `E_e u_e^T k0 u_e`; sums to `total`.
    pub element: Vec<f64>,
}

impl Compliance {
    pub fn strain_energy(&self) -> f64 {
        0.5 * self.total
    }
}

fn gather(u: &[f64], dofs: &[usize; 8]) -> [f64; 8] {
    let mut ue = [0.0; 8];
    for (k, d) in dofs.iter().enumerate() {
        ue[k] = u[*d];
    }
    ue
}

fn check_dims(u: &[f64], mesh: &GridMesh, densities: &DensityField) -> Result<()> {
    if u.len() != mesh.n_dofs() {
        return Err(Error::DimensionMismatch {
            what: "displacement vector",
            expected: mesh.n_dofs(),
            actual: u.len(),
        });
    }
    densities.check_mesh(mesh)
}

pub fn compliance(
    u: &[f64],
    mesh: &GridMesh,
    law: &MaterialLaw,
    densities: &DensityField,
) -> Result<Compliance> {
    check_dims(u, mesh, densities)?;
    let ke = element_stiffness(law);
    let mut element_unit = Vec::with_capacity(mesh.n_elements());
    let mut element = Vec::with_capacity(mesh.n_elements());
    for (e, &rho) in densities.physical().iter().enumerate() {
        let ue = gather(u, &mesh.element_dofs(e));
        let raw = quadratic_form(&ke, &ue);
        element_unit.push(raw);
        element.push(law.modulus(rho) * raw);
    }
    let total = element.iter().sum();
    Ok(Compliance {
        total,
        element_unit,
        element,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    VonMises,
    ShearStrain,
    DisplacementX,
    DisplacementY,
    StrainEnergyDensity,
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] = [
        FieldKind::VonMises,
        FieldKind::ShearStrain,
        FieldKind::DisplacementX,
        FieldKind::DisplacementY,
        FieldKind::StrainEnergyDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::VonMises => "von_mises",
            FieldKind::ShearStrain => "shear_strain",
            FieldKind::DisplacementX => "displacement_x",
            FieldKind::DisplacementY => "displacement_y",
            FieldKind::StrainEnergyDensity => "strain_energy_density",
        }
    }

    /// Fields whose sign carries meaning (rendered around zero).
    pub fn is_signed(self) -> bool {
        matches!(
            self,
            FieldKind::ShearStrain | FieldKind::DisplacementX | FieldKind::DisplacementY
        )
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownFieldKind(s.to_string()))
    }
}

/// Per-element scalar post-processing field, evaluated at element centres.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub kind: FieldKind,
    pub values: Vec<f64>,
}

impl FieldMap {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Divides by the largest magnitude; an all-zero field stays zero.
    pub fn normalized(&self) -> FieldMap {
        let m = self.max_abs();
        let values = if m > 0.0 {
            self.values.iter().map(|v| v / m).collect()
        } else {
            self.values.clone()
        };
        FieldMap {
            kind: self.kind,
            values,
        }
    }
}

pub fn field_map(
    kind: FieldKind,
    u: &[f64],
    mesh: &GridMesh,
    law: &MaterialLaw,
    densities: &DensityField,
) -> Result<FieldMap> {
    check_dims(u, mesh, densities)?;
    let (dndx, dndy) = centre_gradients();
    let nu = law.nu();
    let ke = element_stiffness(law);
    let values = densities
        .physical()
        .iter()
        .enumerate()
        .map(|(e, &rho)| {
            let ue = gather(u, &mesh.element_dofs(e));
            let modulus = law.modulus(rho);
            match kind {
                FieldKind::DisplacementX => (0..4).map(|a| ue[2 * a]).sum::<f64>() / 4.0,
                FieldKind::DisplacementY => (0..4).map(|a| ue[2 * a + 1]).sum::<f64>() / 4.0,
                FieldKind::StrainEnergyDensity => 0.5 * modulus * quadratic_form(&ke, &ue),
                FieldKind::ShearStrain | FieldKind::VonMises => {
                    let mut exx = 0.0;
                    let mut eyy = 0.0;
                    let mut gxy = 0.0;
                    for a in 0..4 {
                        exx += dndx[a] * ue[2 * a];
                        eyy += dndy[a] * ue[2 * a + 1];
                        gxy += dndy[a] * ue[2 * a] + dndx[a] * ue[2 * a + 1];
                    }
                    if kind == FieldKind::ShearStrain {
                        return gxy;
                    }
                    let c = modulus / (1.0 - nu * nu);
                    let sxx = c * (exx + nu * eyy);
                    let syy = c * (nu * exx + eyy);
                    let txy = c * 0.5 * (1.0 - nu) * gxy;
                    (sxx * sxx - sxx * syy + syy * syy + 3.0 * txy * txy)
                        .max(0.0)
                        .sqrt()
                }
            }
        })
        .collect();
    Ok(FieldMap { kind, values })
}
