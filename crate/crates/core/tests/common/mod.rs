#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topogrow::erosion::{ErosionSpec, StepMetric};
use topogrow::fem::{Component, DensityField, GridMesh, MaterialLaw};
use topogrow::io::fixtures::Fixture;
use topogrow::simp::Problem;

pub fn fixture_problem(fixture: Fixture, nelx: usize, nely: usize) -> Problem {
    let mesh = GridMesh::new(nelx, nely).unwrap();
    let loads = fixture.load_cases(&mesh).unwrap();
    Problem::new(mesh, fixture.default_material(), loads).unwrap()
}

pub fn default_problem(fixture: Fixture) -> Problem {
    let (nelx, nely) = fixture.default_mesh();
    fixture_problem(fixture, nelx, nely)
}

pub fn random_field(mesh: &GridMesh, seed: u64, lo: f64) -> DensityField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.n_elements()).map(|_| rng.gen_range(lo..=1.0)).collect();
    DensityField::from_physical(values).unwrap()
}

/// Unit-modulus Q4 plane-stress stiffness by 2x2 Gauss quadrature.
pub fn gauss_element(nu: f64) -> DMatrix<f64> {
    let d = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0],
    ) / (1.0 - nu * nu);
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let g = 1.0 / 3f64.sqrt();
    let mut ke = DMatrix::zeros(8, 8);
    for xi in [-g, g] {
        for eta in [-g, g] {
            let mut b = DMatrix::zeros(3, 8);
            for (a, (xa, ya)) in corners.iter().enumerate() {
                // unit square: x = (1 + xi) / 2, so d/dx = 2 d/dxi
                let dx = 2.0 * xa * (1.0 + ya * eta) / 4.0;
                let dy = 2.0 * ya * (1.0 + xa * xi) / 4.0;
                b[(0, 2 * a)] = dx;
                b[(1, 2 * a + 1)] = dy;
                b[(2, 2 * a)] = dy;
                b[(2, 2 * a + 1)] = dx;
            }
            ke += b.transpose() * &d * b * 0.25;
        }
    }
    ke
}

/// Global DOFs of element `(ex, ey)`: bottom-left, bottom-right, top-right,
/// top-left, each as (x, y).
pub fn element_dofs_by_coords(mesh: &GridMesh, ex: usize, ey: usize) -> [usize; 8] {
    let nodes = [(ex, ey), (ex + 1, ey), (ex + 1, ey + 1), (ex, ey + 1)];
    let mut dofs = [0; 8];
    for (a, (ix, iy)) in nodes.iter().enumerate() {
        dofs[2 * a] = mesh.node_dof(*ix, *iy, Component::X);
        dofs[2 * a + 1] = mesh.node_dof(*ix, *iy, Component::Y);
    }
    dofs
}

pub fn dense_stiffness(mesh: &GridMesh, law: &MaterialLaw, physical: &[f64]) -> DMatrix<f64> {
    let ke = gauss_element(law.nu());
    let n = mesh.n_dofs();
    let mut k = DMatrix::zeros(n, n);
    for ex in 0..mesh.nelx() {
        for ey in 0..mesh.nely() {
            let rho = physical[mesh.element_index(ex, ey)];
            let modulus = law.emin() + rho.powf(law.penal()) * (law.e0() - law.emin());
            let dofs = element_dofs_by_coords(mesh, ex, ey);
            for i in 0..8 {
                for j in 0..8 {
                    k[(dofs[i], dofs[j])] += modulus * ke[(i, j)];
                }
            }
        }
    }
    k
}

/// Weighted compliance of `problem` at `physical` by dense LU.
pub fn dense_compliance(problem: &Problem, physical: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let k = dense_stiffness(mesh, &problem.law, physical);
    let mut total = 0.0;
    for (load, w) in problem.loads.iter().zip(&problem.weights) {
        let free: Vec<usize> = (0..mesh.n_dofs())
            .filter(|d| !load.fixed_dofs.contains(d))
            .collect();
        let kff = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
        let f = DVector::from_iterator(
            free.len(),
            free.iter().map(|d| load.forces.get(d).copied().unwrap_or(0.0)),
        );
        let u = kff.lu().solve(&f).expect("singular oracle system");
        total += w * f.dot(&u);
    }
    total
}

/// Central-difference gradient of the dense compliance.
pub fn fd_gradient(problem: &Problem, physical: &[f64], h: f64) -> Vec<f64> {
    (0..physical.len())
        .map(|e| {
            let mut plus = physical.to_vec();
            let mut minus = physical.to_vec();
            plus[e] += h;
            minus[e] -= h;
            (dense_compliance(problem, &plus) - dense_compliance(problem, &minus)) / (2.0 * h)
        })
        .collect()
}

const OFFSETS: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Direct transcription of the erosion rule, scanning every element and
/// every ray step by step.
pub fn brute_force_erode(values: &[f64], mesh: &GridMesh, spec: &ErosionSpec) -> Vec<f64> {
    let (nx, ny) = (mesh.nelx() as isize, mesh.nely() as isize);
    if spec.radius > mesh.nelx().max(mesh.nely()) {
        return values.to_vec();
    }
    let at = |x: isize, y: isize| values[mesh.element_index(x as usize, y as usize)];
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && x < nx && y < ny;
    let cap = 2.0 * spec.radius as f64;
    let bits = spec.directions.bits();
    let ray = |x: isize, y: isize, k: usize| -> f64 {
        let (dx, dy) = OFFSETS[k];
        let step = if spec.metric == StepMetric::Euclidean && dx != 0 && dy != 0 {
            2f64.sqrt()
        } else {
            1.0
        };
        let mut count = 0.0;
        let (mut cx, mut cy) = (x + dx, y + dy);
        loop {
            if !inside(cx, cy) {
                return cap;
            }
            if at(cx, cy) >= spec.threshold_hi {
                return (count * step).min(cap);
            }
            count += 1.0;
            cx += dx;
            cy += dy;
        }
    };
    let mut out = values.to_vec();
    for x in 0..nx {
        for y in 0..ny {
            if at(x, y) < spec.threshold_hi {
                continue;
            }
            for k in 0..4 {
                if bits & (1 << k) == 0 || bits & (1 << (k + 4)) == 0 {
                    continue;
                }
                if ray(x, y, k) + ray(x, y, k + 4) < cap {
                    continue;
                }
                for s in [k, k + 4] {
                    let (nxp, nyp) = (x + OFFSETS[s].0, y + OFFSETS[s].1);
                    if !inside(nxp, nyp) {
                        continue;
                    }
                    let v = at(nxp, nyp);
                    if v < spec.threshold_hi && v > spec.rho_erased {
                        out[mesh.element_index(nxp as usize, nyp as usize)] =
                            spec.rho_erased.max(spec.density_floor);
                    }
                }
            }
        }
    }
    out.iter().map(|v| v.max(spec.density_floor)).collect()
}

/// Random 40x40-style field: material bars and blobs over a grey sea.
pub fn structured_field(mesh: &GridMesh, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (nx, ny) = (mesh.nelx(), mesh.nely());
    let mut values: Vec<f64> = (0..mesh.n_elements())
        .map(|_| match rng.gen_range(0..10) {
            0 => 1e-3,
            1..=6 => rng.gen_range(0.01..0.8),
            _ => rng.gen_range(0.8..=1.0),
        })
        .collect();
    for _ in 0..rng.gen_range(2..8) {
        let horizontal = rng.gen_bool(0.5);
        let width = rng.gen_range(1..6);
        let (len, across) = if horizontal { (nx, ny) } else { (ny, nx) };
        let start = rng.gen_range(0..across);
        for a in start..(start + width).min(across) {
            for l in 0..len {
                let (ex, ey) = if horizontal { (l, a) } else { (a, l) };
                values[mesh.element_index(ex, ey)] = rng.gen_range(0.85..=1.0);
            }
        }
    }
    values
}

/// Holes and open cavities: 4-connected components of `values < threshold`.
pub fn void_components(mesh: &GridMesh, values: &[f64], threshold: f64) -> usize {
    let grid = topogrow::io::pgm::Grid::from_elements(mesh, values).unwrap();
    let mask: Vec<bool> = grid.values.iter().map(|v| *v < threshold).collect();
    topogrow::io::fields::count_components(&mask, grid.width, grid.height)
}
