//! Built-in benchmark problems. Supports and loads are generated for any
//! mesh size; each fixture also suggests a mesh and material.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Component, GridMesh, LoadCase, MaterialLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// Left wall clamped; two load cases with an upward unit force at the
    /// top-right and at the bottom-right corner.
    #[serde(rename = "cantilever_2corner")]
    Cantilever2Corner,
    /// Right wall clamped; downward unit force at the top-left corner.
    CantileverTip,
    /// Both walls clamped; downward unit force at the top midpoint.
    BifixedCenter,
    /// Pin at the bottom-left corner, roller at the bottom-right corner,
    /// downward unit force at the top midpoint.
    Threepoint,
}

/// Young's modulus of the `threepoint` fixture. At the default 80x40 mesh it
/// puts the solid compliance near 0.75, the scale of the published
/// three-point bending runs.
pub const THREEPOINT_E0: f64 = 13.0;

impl Fixture {
    pub const ALL: [Fixture; 4] = [
        Fixture::Cantilever2Corner,
        Fixture::CantileverTip,
        Fixture::BifixedCenter,
        Fixture::Threepoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Cantilever2Corner => "cantilever_2corner",
            Fixture::CantileverTip => "cantilever_tip",
            Fixture::BifixedCenter => "bifixed_center",
            Fixture::Threepoint => "threepoint",
        }
    }

    pub fn default_mesh(self) -> (usize, usize) {
        match self {
            Fixture::Cantilever2Corner => (80, 40),
            Fixture::CantileverTip => (60, 20),
            Fixture::BifixedCenter => (120, 40),
            Fixture::Threepoint => (80, 40),
        }
    }

    pub fn default_material(self) -> MaterialLaw {
        match self {
            Fixture::Threepoint => MaterialLaw::standard()
                .with_e0(THREEPOINT_E0)
                .expect("valid modulus"),
            _ => MaterialLaw::standard(),
        }
    }

    pub fn load_cases(self, mesh: &GridMesh) -> Result<Vec<LoadCase>> {
        let (nx, ny) = (mesh.nelx(), mesh.nely());
        let wall = |ix: usize| -> Vec<usize> {
            (0..=ny)
                .flat_map(|iy| {
                    [
                        mesh.node_dof(ix, iy, Component::X),
                        mesh.node_dof(ix, iy, Component::Y),
                    ]
                })
                .collect()
        };
        let y = |ix, iy| mesh.node_dof(ix, iy, Component::Y);
        let needs_even = |what: &str| {
            if nx % 2 == 0 {
                Ok(())
            } else {
                Err(Error::InvalidMesh(format!(
                    "{what} needs an even number of elements along x, got {nx}"
                )))
            }
        };
        Ok(match self {
            Fixture::Cantilever2Corner => vec![
                LoadCase::new(wall(0)).with_force(y(nx, ny), 1.0),
                LoadCase::new(wall(0)).with_force(y(nx, 0), 1.0),
            ],
            Fixture::CantileverTip => vec![LoadCase::new(wall(nx)).with_force(y(0, ny), -1.0)],
            Fixture::BifixedCenter => {
                needs_even(self.name())?;
                let mut fixed = wall(0);
                fixed.extend(wall(nx));
                vec![LoadCase::new(fixed).with_force(y(nx / 2, ny), -1.0)]
            }
            Fixture::Threepoint => {
                needs_even(self.name())?;
                let fixed = [mesh.node_dof(0, 0, Component::X), y(0, 0), y(nx, 0)];
                vec![LoadCase::new(fixed).with_force(y(nx / 2, ny), -1.0)]
            }
        })
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = Fixture::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown fixture `{s}` (known: {})", known.join(", ")))
            })
    }
}
