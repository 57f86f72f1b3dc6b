use super::MaterialLaw;

/// 8x8 stiffness of a unit-square, unit-thickness Q4 element with `E = 1`.
pub type ElementStiffness = [[f64; 8]; 8];

/// Closed-form bilinear plane-stress stiffness for `E = 1`.
///
/// Local DOF order is bottom-left, bottom-right, top-right, top-left, each
/// as (x, y). Callers scale the result by the interpolated modulus.
pub fn element_stiffness(law: &MaterialLaw) -> ElementStiffness {
    let nu = law.nu();
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    let idx: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = 1.0 / (1.0 - nu * nu);
    let mut ke = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            ke[i][j] = scale * k[idx[i][j]];
        }
    }
    ke
}

/// `u_e^T K u_e` for an 8-vector.
pub(crate) fn quadratic_form(ke: &ElementStiffness, ue: &[f64; 8]) -> f64 {
    let mut acc = 0.0;
    for i in 0..8 {
        let mut row = 0.0;
        for j in 0..8 {
            row += ke[i][j] * ue[j];
        }
        acc += ue[i] * row;
    }
    acc
}

/// Strain-displacement rows evaluated at the element centre of a unit square.
/// Returns `(d/dx, d/dy)` of the four shape functions.
pub(crate) fn centre_gradients() -> ([f64; 4], [f64; 4]) {
    // dN/dx = xi_a / 2, dN/dy = eta_a / 2 at xi = eta = 0
    ([-0.5, 0.5, 0.5, -0.5], [-0.5, -0.5, 0.5, 0.5])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rigid_modes() -> [[f64; 8]; 3] {
        // nodes at (0,0), (1,0), (1,1), (0,1); rotation about the origin
        let xy = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let mut rot = [0.0; 8];
        for (a, (x, y)) in xy.iter().enumerate() {
            rot[2 * a] = -y;
            rot[2 * a + 1] = *x;
        }
        [
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            rot,
        ]
    }

    #[test]
    fn symmetric_for_any_poisson_ratio() {
        for nu in [0.01, 0.2, 0.3, 0.45, 0.499] {
            let law = MaterialLaw::new(1.0, 1e-9, nu, 3.0).unwrap();
            let ke = element_stiffness(&law);
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(ke[i][j], ke[j][i]);
                }
            }
        }
    }

    #[test]
    fn rigid_body_modes_are_in_the_null_space() {
        let ke = element_stiffness(&MaterialLaw::standard());
        for v in rigid_modes() {
            let norm: f64 = (0..8)
                .map(|i| (0..8).map(|j| ke[i][j] * v[j]).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(norm <= 1e-12, "|K v| = {norm}");
        }
    }

    #[test]
    fn first_row_matches_reference_values() {
        // row 0 of the 88-line KE at nu = 0.3
        let ke = element_stiffness(&MaterialLaw::standard());
        let expected = [
            0.494_505_494_505_494_4,
            0.178_571_428_571_428_5,
            -0.302_197_802_197_802,
            -0.013_736_263_736_263_73,
            -0.247_252_747_252_747_15,
            -0.178_571_428_571_428_5,
            0.054_945_054_945_054_9,
            0.013_736_263_736_263_73,
        ];
        for (a, b) in ke[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
