//! Minimum-thickness erosion ("twig cutting") on the element grid.
//!
//! Every material element (density at or above `threshold_hi`) looks along
//! eight senses `l1..l8`: right, up-right, up, up-left, left, down-left, down,
//! down-right. In each sense it measures `l`, the run of non-material
//! elements starting at its immediate neighbour, capped at `2r`; a ray that
//! leaves the domain counts as the full cap. When an enabled opposite pair
//! satisfies `l_d + l_opp >= 2r`, the first neighbour in each sense of that
//! pair is erased if it is below the threshold.
//!
//! All decisions read the input snapshot, so the result does not depend on
//! scan order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DensityField, GridMesh, DEFAULT_DENSITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::L1,
        Direction::L2,
        Direction::L3,
        Direction::L4,
        Direction::L5,
        Direction::L6,
        Direction::L7,
        Direction::L8,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Direction {
        Direction::ALL[i % 8]
    }

    pub fn opposite(self) -> Direction {
        Direction::from_index(self.index() + 4)
    }

    /// Grid offset `(dx, dy)` with `y` pointing up.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::L1 => (1, 0),
            Direction::L2 => (1, 1),
            Direction::L3 => (0, 1),
            Direction::L4 => (-1, 1),
            Direction::L5 => (-1, 0),
            Direction::L6 => (-1, -1),
            Direction::L7 => (0, -1),
            Direction::L8 => (1, -1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.offset();
        dx != 0 && dy != 0
    }

    /// Neighbouring element one step away, or `None` past the domain edge.
    /// Diagonal steps move one element along both axes.
    pub fn step(self, mesh: &GridMesh, e: usize) -> Option<usize> {
        let (ex, ey) = mesh.element_coords(e);
        let (dx, dy) = self.offset();
        let nx = ex.checked_add_signed(dx)?;
        let ny = ey.checked_add_signed(dy)?;
        (nx < mesh.nelx() && ny < mesh.nely()).then(|| mesh.element_index(nx, ny))
    }
}

/// Enabled senses, one bit per direction (`l1` is bit 0). A sense is only
/// meaningful together with its opposite, so masks must be pair-symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DirectionMask(u8);

impl DirectionMask {
    pub const ALL: DirectionMask = DirectionMask(0xFF);
    pub const HORIZONTAL: DirectionMask = DirectionMask(0b0001_0001);
    pub const RISING_DIAGONAL: DirectionMask = DirectionMask(0b0010_0010);
    pub const VERTICAL: DirectionMask = DirectionMask(0b0100_0100);
    pub const FALLING_DIAGONAL: DirectionMask = DirectionMask(0b1000_1000);

    pub fn new(bits: u8) -> Result<Self> {
        if bits & 0x0F != bits >> 4 {
            return Err(Error::InvalidParameter(format!(
                "direction mask {bits:#010b} enables a sense without its opposite"
            )));
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, d: Direction) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn union(self, other: DirectionMask) -> DirectionMask {
        DirectionMask(self.0 | other.0)
    }

    /// Enabled pairs, represented by their first sense (`l1..l4`).
    pub fn pairs(self) -> impl Iterator<Item = Direction> {
        Direction::ALL[..4]
            .iter()
            .copied()
            .filter(move |d| self.contains(*d))
    }
}

impl TryFrom<u8> for DirectionMask {
    type Error = Error;

    fn try_from(bits: u8) -> Result<Self> {
        DirectionMask::new(bits)
    }
}

impl From<DirectionMask> for u8 {
    fn from(m: DirectionMask) -> u8 {
        m.0
    }
}

/// How far a diagonal step advances along a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMetric {
    /// Every step counts one element.
    #[default]
    Element,
    /// Diagonal steps count `sqrt(2)`.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErosionSpec {
    pub radius: usize,
    pub threshold_hi: f64,
    pub rho_erased: f64,
    pub directions: DirectionMask,
    /// Apply every `cadence` iterations.
    pub cadence: usize,
    /// First iteration at which the filter may run.
    pub activation_iter: usize,
    pub metric: StepMetric,
    pub density_floor: f64,
}

impl ErosionSpec {
    pub fn new(radius: usize) -> Self {
        Self {
            radius,
            threshold_hi: 0.8,
            rho_erased: 1e-3,
            directions: DirectionMask::ALL,
            cadence: 10,
            activation_iter: 30,
            metric: StepMetric::Element,
            density_floor: DEFAULT_DENSITY_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::InvalidParameter("erosion radius must be >= 1".into()));
        }
        if !(self.rho_erased > 0.0
            && self.rho_erased < self.threshold_hi
            && self.threshold_hi <= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 < rho_erased < threshold_hi <= 1, got {} and {}",
                self.rho_erased, self.threshold_hi
            )));
        }
        if self.cadence == 0 {
            return Err(Error::InvalidParameter("erosion cadence must be >= 1".into()));
        }
        if !(self.density_floor > 0.0 && self.density_floor < self.threshold_hi) {
            return Err(Error::InvalidParameter(format!(
                "density floor {} must lie in (0, threshold_hi)",
                self.density_floor
            )));
        }
        Ok(())
    }

    /// Whether the filter runs at (1-based) iteration `iter`.
    pub fn is_due(&self, iter: usize) -> bool {
        iter >= self.activation_iter && iter.is_multiple_of(self.cadence)
    }

    fn cap(&self) -> f64 {
        2.0 * self.radius as f64
    }

    fn step_length(&self, d: Direction) -> f64 {
        match (self.metric, d.is_diagonal()) {
            (StepMetric::Euclidean, true) => std::f64::consts::SQRT_2,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErosionReport {
    pub erased_count: usize,
    /// Removed density as a fraction of the whole domain.
    pub volume_removed: f64,
    /// Erasures triggered per sense `l1..l8`.
    pub per_direction: [usize; 8],
    /// Erased element indices, ascending.
    pub erased: Vec<usize>,
    /// Set when the radius exceeds the domain and nothing was done.
    pub degenerate: bool,
}

/// Non-material run starting at each element along one direction.
#[derive(Debug, Clone, Copy, Default)]
struct Run {
    len: usize,
    reaches_edge: bool,
}

fn runs_along(mesh: &GridMesh, material: &[bool], d: Direction) -> Vec<Run> {
    let mut runs = vec![Run::default(); material.len()];
    let back = d.opposite();
    let mut line = Vec::new();
    for start in 0..material.len() {
        if back.step(mesh, start).is_some() {
            continue;
        }
        line.clear();
        let mut cur = Some(start);
        while let Some(e) = cur {
            line.push(e);
            cur = d.step(mesh, e);
        }
        let mut next = Run {
            len: 0,
            reaches_edge: true,
        };
        for &e in line.iter().rev() {
            next = if material[e] {
                Run::default()
            } else {
                Run {
                    len: next.len + 1,
                    reaches_edge: next.reaches_edge,
                }
            };
            runs[e] = next;
        }
    }
    runs
}

/// Erodes a physical density vector. See the module docs for the rule.
pub fn erode(values: &[f64], mesh: &GridMesh, spec: &ErosionSpec) -> Result<(Vec<f64>, ErosionReport)> {
    spec.validate()?;
    if values.len() != mesh.n_elements() {
        return Err(Error::DimensionMismatch {
            what: "erosion input",
            expected: mesh.n_elements(),
            actual: values.len(),
        });
    }
    if spec.radius > mesh.nelx().max(mesh.nely()) {
        log::warn!(
            "erosion radius {} exceeds the {}x{} domain; field left unchanged",
            spec.radius,
            mesh.nelx(),
            mesh.nely()
        );
        let report = ErosionReport {
            degenerate: true,
            ..Default::default()
        };
        return Ok((values.to_vec(), report));
    }

    let material: Vec<bool> = values.iter().map(|&v| v >= spec.threshold_hi).collect();
    let runs: Vec<Vec<Run>> = Direction::ALL
        .iter()
        .map(|&d| {
            if spec.directions.contains(d) {
                runs_along(mesh, &material, d)
            } else {
                Vec::new()
            }
        })
        .collect();
    let cap = spec.cap();
    let advance = |e: usize, d: Direction| -> f64 {
        match d.step(mesh, e) {
            None => cap,
            Some(n) => {
                let run = runs[d.index()][n];
                if run.reaches_edge {
                    cap
                } else {
                    (run.len as f64 * spec.step_length(d)).min(cap)
                }
            }
        }
    };
    let erasable = |n: usize| values[n] < spec.threshold_hi && values[n] > spec.rho_erased;

    let mut marked = vec![false; values.len()];
    let mut report = ErosionReport::default();
    for e in (0..values.len()).filter(|&e| material[e]) {
        for d in spec.directions.pairs() {
            let opp = d.opposite();
            if advance(e, d) + advance(e, opp) < cap {
                continue;
            }
            for sense in [d, opp] {
                if let Some(n) = sense.step(mesh, e).filter(|&n| erasable(n)) {
                    marked[n] = true;
                    report.per_direction[sense.index()] += 1;
                }
            }
        }
    }

    let mut out = values.to_vec();
    let mut removed = 0.0;
    for (e, m) in marked.iter().enumerate() {
        if *m {
            out[e] = spec.rho_erased.max(spec.density_floor);
            removed += values[e] - out[e];
            report.erased.push(e);
        }
    }
    for v in out.iter_mut() {
        *v = v.max(spec.density_floor);
    }
    report.erased_count = report.erased.len();
    report.volume_removed = removed.max(0.0) / values.len() as f64;
    Ok((out, report))
}

/// Erodes the physical densities of `densities`; erased elements are also
/// reset in the design field so the next update starts from the cut state.
pub fn apply(
    densities: &DensityField,
    mesh: &GridMesh,
    spec: &ErosionSpec,
) -> Result<(DensityField, ErosionReport)> {
    densities.check_mesh(mesh)?;
    let (physical, report) = erode(densities.physical(), mesh, spec)?;
    let mut design = densities.design().to_vec();
    for &e in &report.erased {
        design[e] = design[e].min(physical[e]);
    }
    Ok((DensityField::new(design, physical)?, report))
}
