//! Benchmark plants used by the experiments and tests.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::model::StateSpaceModel;

/// Monic polynomial coefficients (highest power first) from its roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        coeffs = next;
    }
    coeffs.iter().map(|c| c.re).collect()
}

/// Controller-canonical realization of a strictly proper SISO transfer
/// function `num(z)/den(z)` with monic `den`.
pub fn controller_canonical(num: &[f64], den: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = den.len() - 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -den[j + 1] / den[0];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DMatrix::<f64>::zeros(n, 1);
    b[(0, 0)] = 1.0;
    let mut c = DMatrix::<f64>::zeros(1, n);
    let offset = n - (num.len() - 1) - 1;
    for (k, &v) in num.iter().enumerate() {
        c[(0, offset + k)] = v / den[0];
    }
    (a, b, c)
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Seventh-order plant with stable poles −0.6, −0.5, ±0.4j and unstable
/// poles 1.5, 1.6, 1.7; zeros ±0.3j, ±0.2. Process noise enters through `B`.
pub fn example1() -> StateSpaceModel {
    let num = poly_from_roots(&[
        Complex64::new(0.0, 0.3),
        Complex64::new(0.0, -0.3),
        real(-0.2),
        real(0.2),
    ]);
    let den = poly_from_roots(&example1_poles());
    let (a, b, c) = controller_canonical(&num, &den);
    StateSpaceModel::siso_like(a, b, c).expect("example1 plant is valid")
}

pub fn example1_poles() -> Vec<Complex64> {
    vec![
        real(-0.6),
        real(-0.5),
        Complex64::new(0.0, 0.4),
        Complex64::new(0.0, -0.4),
        real(1.7),
        real(1.6),
        real(1.5),
    ]
}

/// Third-order plant `A = diag(0.3, 1.5, 2.0)`, `B = 1`, `C = 1ᵀ` with
/// process noise entering every state (`B_w = I₃`).
pub fn example4() -> StateSpaceModel {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, 1.5, 2.0]));
    let b = DMatrix::from_element(3, 1, 1.0);
    let c = DMatrix::from_element(1, 3, 1.0);
    StateSpaceModel::new(a, b, DMatrix::identity(3, 3), c, DMatrix::zeros(1, 1))
        .expect("example4 plant is valid")
}

/// Third-order stable plant `(z − 0.1)/((z − 0.4)(z + 0.2)(z + 0.5))`.
pub fn stable_siso() -> StateSpaceModel {
    let num = poly_from_roots(&[real(0.1)]);
    let den = poly_from_roots(&[real(0.4), real(-0.2), real(-0.5)]);
    let (a, b, c) = controller_canonical(&num, &den);
    StateSpaceModel::siso_like(a, b, c).expect("stable plant is valid")
}
