use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::regressors::{CrossMoments, DataMatrices, RegressorConfig};
use crate::error::{Error, Result};
use crate::linalg::{min_singular_value, singular_values, spectral_norm};
use crate::lti::write_lag_csv;

/// Relative floor on `σ_min` of the normal-equation matrix.
pub const CONDITIONING_FLOOR: f64 = 1e-10;

fn threshold(sv: &[f64]) -> f64 {
    CONDITIONING_FLOOR * sv.iter().sum::<f64>() / sv.len().max(1) as f64
}

/// Solves `X G = rhs` for symmetric positive definite `G`.
fn solve_spd_right(gram: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sv = singular_values(gram);
    let (smin, thr) = (sv.last().copied().unwrap_or(0.0), threshold(&sv));
    if !(smin > thr) {
        return Err(Error::Conditioning { sigma_min: smin, threshold: thr });
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::Conditioning { sigma_min: smin, threshold: thr })?;
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// `X R = rhs` for a general square `R`, by LU with partial pivoting on `Rᵀ`.
fn solve_general_right(r: &DMatrix<f64>, rhs: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let sv = singular_values(r);
    let (smin, thr) = (sv.last().copied().unwrap_or(0.0), threshold(&sv));
    let weak = Error::WeakInstrument { s_iv: smin / n as f64, sigma_min: smin, threshold: thr };
    if !(smin > thr) {
        return Err(weak);
    }
    let sol = r.transpose().lu().solve(&rhs.transpose()).ok_or(weak)?;
    Ok(sol.transpose())
}

/// Ordinary least squares `θ̂ = Ψ_y Φᵀ (ΦΦᵀ)⁻¹`.
pub fn batch_ls(dm: &DataMatrices) -> Result<DMatrix<f64>> {
    let gram = &dm.phi * dm.phi.transpose();
    solve_spd_right(&gram, &(&dm.psi_y * dm.phi.transpose()))
}

/// Instrumental variables `θ̂ = Ψ_y Φ_cᵀ (ΦΦ_cᵀ)⁻¹` with the excitation as instrument.
pub fn batch_iv(dm: &DataMatrices) -> Result<DMatrix<f64>> {
    let z = dm.instrument()?;
    let cross = &dm.phi * z.transpose();
    solve_general_right(&cross, &(&dm.psi_y * z.transpose()), dm.cfg.n)
}

impl CrossMoments {
    pub fn ls(&self) -> Result<DMatrix<f64>> {
        solve_spd_right(&self.gram, &self.y_phi)
    }

    pub fn iv(&self) -> Result<DMatrix<f64>> {
        match (&self.cross, &self.y_phi_c) {
            (Some(cross), Some(yc)) => solve_general_right(cross, yc, self.cfg.n),
            _ => Err(Error::Data("excitation channel c is required for IV estimation".into())),
        }
    }
}

/// Conditioning of the instrument, from the empirical cross-covariance.
#[derive(Debug, Clone)]
pub struct InstrumentDiagnostics {
    pub cfg: RegressorConfig,
    /// `(1/N) Φ Φ_cᵀ`.
    pub r_uc: DMatrix<f64>,
    /// `(1/N) Φ_f Φ_cᵀ`, when ground truth was recorded.
    pub s_fc: Option<DMatrix<f64>>,
    /// `σ_c⁻² S_fc` with blocks `j ≤ i` zeroed.
    pub u_blocks: Option<DMatrix<f64>>,
    pub s_iv: f64,
    pub lambda_iv: f64,
    /// Largest spectral norm among the blocks `(i, j)` of `S_fc` with `j ≤ i`.
    pub triangularity_residual: Option<f64>,
}

/// Norm of block `(i, j)` (zero-based, `p × p` blocks).
pub fn block_norm(m: &DMatrix<f64>, p: usize, i: usize, j: usize) -> f64 {
    spectral_norm(&m.view((i * p, j * p), (p, p)).into_owned())
}

/// Largest block norm on or below the block diagonal.
pub fn lower_block_residual(m: &DMatrix<f64>, p: usize) -> f64 {
    let mu = m.nrows() / p;
    let mut worst: f64 = 0.0;
    for i in 0..mu {
        for j in 0..=i {
            worst = worst.max(block_norm(m, p, i, j));
        }
    }
    worst
}

pub fn instrument_diagnostics(dm: &DataMatrices, sigma_c: f64) -> Result<InstrumentDiagnostics> {
    if !(sigma_c > 0.0 && sigma_c.is_finite()) {
        return Err(Error::Domain(format!("λ_IV is undefined for σ_c = {sigma_c}")));
    }
    let z = dm.instrument()?;
    let n = dm.cfg.n as f64;
    let r_uc = &dm.phi * z.transpose() / n;
    let s_iv = min_singular_value(&r_uc);
    let s_fc = dm.phi_f.as_ref().map(|f| f * z.transpose() / n);
    let p = dm.cfg.p;
    let triangularity_residual = s_fc.as_ref().map(|s| lower_block_residual(s, p));
    let u_blocks = s_fc.as_ref().map(|s| {
        let mut u = s / (sigma_c * sigma_c);
        let mu = dm.cfg.mu();
        for i in 0..mu {
            for j in 0..=i {
                u.view_mut((i * p, j * p), (p, p)).fill(0.0);
            }
        }
        u
    });
    Ok(InstrumentDiagnostics {
        cfg: dm.cfg,
        r_uc,
        s_fc,
        u_blocks,
        s_iv,
        lambda_iv: s_iv * s_iv / (sigma_c * sigma_c),
        triangularity_residual,
    })
}

#[derive(Serialize)]
struct DiagnosticsJson {
    schema_version: &'static str,
    s_iv: f64,
    lambda_iv: f64,
    triangularity_residual: Option<f64>,
    #[serde(rename = "N")]
    n: usize,
    r: usize,
    d: usize,
}

impl InstrumentDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DiagnosticsJson {
            schema_version: crate::SCHEMA_VERSION,
            s_iv: self.s_iv,
            lambda_iv: self.lambda_iv,
            triangularity_residual: self.triangularity_residual,
            n: self.cfg.n,
            r: self.cfg.r,
            d: self.cfg.d,
        })?)
    }
}

/// Writes an estimate as `lag_index,out_row,in_col,value`.
pub fn write_estimate_csv<W: Write>(out: W, theta: &DMatrix<f64>, cfg: &RegressorConfig) -> Result<()> {
    write_lag_csv(out, theta, cfg.p, cfg.r, cfg.d, ["lag_index", "out_row", "in_col", "value"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Trajectory;
    use crate::estimation::build_matrices;

    #[test]
    fn duplicate_regressor_rows_raise_conditioning() {
        // identical input channels make ΦΦᵀ singular
        let u1 = DMatrix::from_fn(1, 50, |_, k| ((k * 7919) % 13) as f64 - 6.0);
        let u = DMatrix::from_fn(2, 50, |_, k| u1[(0, k)]);
        let traj = Trajectory { y: u1.clone(), c: None, u, truth: None };
        let cfg = RegressorConfig::fit(1, 1, &traj).unwrap();
        let dm = build_matrices(&traj, &cfg, false).unwrap();
        assert!(matches!(batch_ls(&dm), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn diagnostics_need_positive_sigma_c() {
        let u = DMatrix::from_fn(1, 30, |_, k| (k % 5) as f64);
        let traj = Trajectory { y: u.clone(), c: Some(u.clone()), u, truth: None };
        let cfg = RegressorConfig::fit(1, 0, &traj).unwrap();
        let dm = build_matrices(&traj, &cfg, false).unwrap();
        assert!(matches!(instrument_diagnostics(&dm, 0.0), Err(Error::Domain(_))));
    }
}
