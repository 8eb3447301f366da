use nalgebra::DMatrix;

use super::model::StateSpaceModel;
use super::spectral::spectral_radius;
use crate::error::{Error, Result};
use crate::linalg::{solve_quasi_triangular_sylvester, spectral_norm, RealSchur};

/// Block-diagonal realization `T⁻¹ A T = diag(A_s, A_u)` with `ρ(A_s) < 1`
/// and `ρ(A_u⁻¹) < 1`.
///
/// `T = V W` where `V` is the orthogonal reordered Schur basis and
/// `W = [[I, S], [0, I]]` removes the Schur coupling block.
#[derive(Debug, Clone)]
pub struct DecomposedRealization {
    pub a_s: DMatrix<f64>,
    pub a_u: DMatrix<f64>,
    pub b_s: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub bw_s: DMatrix<f64>,
    pub bw_u: DMatrix<f64>,
    pub c_s: DMatrix<f64>,
    pub c_u: DMatrix<f64>,
    /// Similarity `x = T x_d`.
    pub t: DMatrix<f64>,
    /// `T⁻¹ = W⁻¹ Vᵀ`, formed without a general inverse.
    pub t_inv: DMatrix<f64>,
    /// Sylvester solution `A_11 S − S A_22 + A_12 = 0`.
    pub sylvester: DMatrix<f64>,
    pub rho_s: f64,
    pub rho_u_inv: f64,
}

impl DecomposedRealization {
    pub fn n_s(&self) -> usize {
        self.a_s.nrows()
    }
    pub fn n_u(&self) -> usize {
        self.a_u.nrows()
    }
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Splits a state vector (columns are time samples) into `(x_s, x_u)`.
    pub fn split_states(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let xd = &self.t_inv * x;
        let ns = self.n_s();
        (
            xd.rows(0, ns).into_owned(),
            xd.rows(ns, self.n_u()).into_owned(),
        )
    }
}

/// Separates a plant into its stable and anti-stable parts.
pub fn decompose(model: &StateSpaceModel, unit_circle_tol: f64) -> Result<DecomposedRealization> {
    let a = model.a();
    let n = model.n();
    let mut schur = RealSchur::new(a)?;
    for lambda in schur.eigenvalues() {
        let modulus = lambda.norm();
        if (modulus - 1.0).abs() < unit_circle_tol {
            return Err(Error::UnitCircle {
                modulus,
                tol: unit_circle_tol,
            });
        }
    }
    let n_s = schur.reorder(|l| l.norm() < 1.0)?;
    let n_u = n - n_s;
    let v = schur.q.clone();
    let at = &schur.t;
    let a11 = at.view((0, 0), (n_s, n_s)).into_owned();
    let a12 = at.view((0, n_s), (n_s, n_u)).into_owned();
    let a22 = at.view((n_s, n_s), (n_u, n_u)).into_owned();

    // A11 S − S A22 = −A12
    let s = solve_quasi_triangular_sylvester(&a11, &a22, &(-&a12))?;
    let residual = spectral_norm(&(&a11 * &s - &s * &a22 + &a12));
    let a_norm = spectral_norm(a);
    if residual > 1e-10 * a_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "Sylvester residual {residual:e} exceeds 1e-10 * ‖A‖"
        )));
    }

    let mut w = DMatrix::<f64>::identity(n, n);
    let mut w_inv = DMatrix::<f64>::identity(n, n);
    w.view_mut((0, n_s), (n_s, n_u)).copy_from(&s);
    w_inv.view_mut((0, n_s), (n_s, n_u)).copy_from(&(-&s));
    let t = &v * &w;
    let t_inv = &w_inv * v.transpose();

    let b_d = &t_inv * model.b();
    let bw_d = &t_inv * model.bw();
    let c_d = model.c() * &t;

    let rho_s = spectral_radius(&a11)?;
    let rho_u_inv = if n_u == 0 {
        0.0
    } else {
        let inv = a22
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("anti-stable block is singular".into()))?;
        spectral_radius(&inv)?
    };

    Ok(DecomposedRealization {
        b_s: b_d.rows(0, n_s).into_owned(),
        b_u: b_d.rows(n_s, n_u).into_owned(),
        bw_s: bw_d.rows(0, n_s).into_owned(),
        bw_u: bw_d.rows(n_s, n_u).into_owned(),
        c_s: c_d.columns(0, n_s).into_owned(),
        c_u: c_d.columns(n_s, n_u).into_owned(),
        a_s: a11,
        a_u: a22,
        t,
        t_inv,
        sylvester: s,
        rho_s,
        rho_u_inv,
    })
}
