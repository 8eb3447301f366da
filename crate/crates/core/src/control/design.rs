use nalgebra::DMatrix;
use num_complex::Complex64;

use super::controller::Controller;
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, singular_values, spectral_norm};
use crate::lti::presets::poly_from_roots;
use crate::lti::{spectral_radius, StateSpaceModel};

const RICCATI_TOL: f64 = 1e-10;
const RICCATI_MAX_ITER: usize = 100_000;

/// Infinite-horizon discrete LQR gain by fixed-point Riccati iteration
/// started from `P = Q`.
pub fn design_lqr(model: &StateSpaceModel, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Controller> {
    let (n, p) = (model.n(), model.p());
    if q.shape() != (n, n) || r.shape() != (p, p) {
        return Err(Error::Dimension(format!("LQR weights must be Q {n}x{n} and R {p}x{p}")));
    }
    ensure_finite(q, "Q")?;
    ensure_finite(r, "R")?;
    if r.clone().cholesky().is_none() {
        return Err(Error::Domain("R must be positive definite".into()));
    }
    let a = model.a();
    let b = model.b();
    let at = a.transpose();
    let bt = b.transpose();

    let gain = |pm: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let s = r + &bt * pm * b;
        let rhs = &bt * pm * a;
        s.cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| Error::Stabilizability("R + BᵀPB lost positive definiteness".into()))
    };

    let mut pm = q.clone();
    let mut converged = false;
    for _ in 0..RICCATI_MAX_ITER {
        let k = gain(&pm)?;
        let mut next = q + &at * &pm * a - &at * &pm * b * &k;
        next = (&next + next.transpose()) * 0.5;
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        let step = spectral_norm(&(&next - &pm));
        pm = next;
        if step <= RICCATI_TOL * pm.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Stabilizability(format!(
            "Riccati iteration did not converge within {RICCATI_MAX_ITER} iterations"
        )));
    }
    let k = gain(&pm)?;
    let rho = spectral_radius(&(a - b * &k))?;
    if rho >= 1.0 {
        return Err(Error::Stabilizability(format!(
            "LQR gain leaves closed-loop spectral radius {rho:.6} ≥ 1"
        )));
    }
    Ok(Controller::StateFeedback { k })
}

/// Single-input pole placement by Ackermann's formula
/// `K = e_nᵀ 𝒞⁻¹ χ(A)` with `χ` the target characteristic polynomial.
pub fn design_pole_placement(model: &StateSpaceModel, targets: &[Complex64]) -> Result<Controller> {
    let n = model.n();
    if model.p() != 1 {
        return Err(Error::Unsupported(format!(
            "pole placement supports a single input, plant has {}",
            model.p()
        )));
    }
    if targets.len() != n {
        return Err(Error::Dimension(format!("expected {n} target poles, got {}", targets.len())));
    }
    for t in targets {
        let has_conj = targets
            .iter()
            .any(|s| (s - t.conj()).norm() <= 1e-9 * (1.0 + t.norm()));
        if !has_conj || !t.re.is_finite() || !t.im.is_finite() {
            return Err(Error::Domain("target poles must be finite and closed under conjugation".into()));
        }
    }
    let a = model.a();
    let b = model.b();
    let mut ctrb = DMatrix::<f64>::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col.column(0));
        col = a * col;
    }
    let sv = singular_values(&ctrb);
    if sv.is_empty() || sv[sv.len() - 1] <= 1e-10 * sv[0].max(1.0) {
        return Err(Error::Rank("(A, B) is not controllable".into()));
    }
    // χ(A) by Horner on the monic coefficients.
    let coeffs = poly_from_roots(targets);
    let mut chi = DMatrix::<f64>::zeros(n, n);
    for &c in &coeffs {
        chi = &chi * a + DMatrix::identity(n, n) * c;
    }
    // e_nᵀ 𝒞⁻¹ is the last row of the inverse: solve 𝒞ᵀ z = e_n.
    let mut en = DMatrix::<f64>::zeros(n, 1);
    en[(n - 1, 0)] = 1.0;
    let z = ctrb
        .transpose()
        .lu()
        .solve(&en)
        .ok_or_else(|| Error::Rank("controllability matrix is singular".into()))?;
    let k = z.transpose() * chi;
    Ok(Controller::StateFeedback { k })
}
