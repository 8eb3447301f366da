use nalgebra::DMatrix;

use super::decompose::DecomposedRealization;
use super::spectral::transient_amplification;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Truncation-tail sizes for horizons `(r, d)`.
#[derive(Debug, Clone)]
pub struct TruncationTailReport {
    pub r: usize,
    pub d: usize,
    /// `‖C_s A_s^r‖`.
    pub stable_tail_norm: f64,
    /// `‖C_u A_u^{-d-1}‖`.
    pub unstable_tail_norm: f64,
    /// `Φ(A_s)`; 1 for an empty stable part.
    pub phi_s: f64,
    /// `Φ(A_u⁻¹)`; 1 for an empty unstable part.
    pub phi_u: f64,
    /// Per-sample tails, present when state sequences were supplied.
    pub signals: Option<TailSignals>,
}

/// `e_s(k) = C_s A_s^r x_s(k−r)` and `e_u(k) = C_u A_u^{-d-1} x_u(k+d+1)`
/// for `k = start, start+1, …`.
#[derive(Debug, Clone)]
pub struct TailSignals {
    pub start: usize,
    pub e_s: DMatrix<f64>,
    pub e_u: DMatrix<f64>,
}

impl TailSignals {
    fn rms(m: &DMatrix<f64>) -> f64 {
        if m.ncols() == 0 {
            return 0.0;
        }
        (m.norm_squared() / m.ncols() as f64).sqrt()
    }
    pub fn rms_stable(&self) -> f64 {
        Self::rms(&self.e_s)
    }
    pub fn rms_unstable(&self) -> f64 {
        Self::rms(&self.e_u)
    }
}

/// `C_s A_s^r` and `C_u A_u^{-d-1}` (the latter by repeated solves).
pub fn tail_gains(dec: &DecomposedRealization, r: usize, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut gs = dec.c_s.clone();
    for _ in 0..r {
        gs = &gs * &dec.a_s;
    }
    let gu = if dec.n_u() == 0 {
        dec.c_u.clone()
    } else {
        // (C_u A_u^{-k})ᵀ = A_u^{-T} (C_u A_u^{-(k-1)})ᵀ
        let lu = dec.a_u.transpose().lu();
        let mut g = dec.c_u.transpose();
        for _ in 0..=d {
            g = lu
                .solve(&g)
                .ok_or_else(|| Error::Numeric("anti-stable block A_u is singular".into()))?;
        }
        g.transpose()
    };
    Ok((gs, gu))
}

fn phi_or_one(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        Ok(1.0)
    } else {
        transient_amplification(m)
    }
}

/// Computes the tail norms and, when `(x_s, x_u)` sequences are supplied
/// (columns are time samples), the per-sample tails over every `k` with
/// `k − r ≥ 0` and `k + d + 1 < len`.
pub fn truncation_tails(
    dec: &DecomposedRealization,
    r: usize,
    d: usize,
    states: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<TruncationTailReport> {
    let (gs, gu) = tail_gains(dec, r, d)?;
    let phi_s = phi_or_one(&dec.a_s)?;
    let phi_u = if dec.n_u() == 0 {
        1.0
    } else {
        let inv = dec
            .a_u
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("anti-stable block A_u is singular".into()))?;
        transient_amplification(&inv)?
    };
    let signals = match states {
        None => None,
        Some((xs, xu)) => {
            if xs.nrows() != dec.n_s() || xu.nrows() != dec.n_u() || xs.ncols() != xu.ncols() {
                return Err(Error::Dimension(
                    "state sequences do not match the decomposition".into(),
                ));
            }
            let len = xs.ncols();
            if len < r + d + 2 {
                return Err(Error::Range(format!(
                    "state sequences of length {len} do not cover k−{r} and k+{d}+1"
                )));
            }
            let count = len - r - d - 1;
            let e_s = &gs * xs.columns(0, count);
            let e_u = &gu * xu.columns(r + d + 1, count);
            Some(TailSignals { start: r, e_s, e_u })
        }
    };
    Ok(TruncationTailReport {
        r,
        d,
        stable_tail_norm: spectral_norm(&gs),
        unstable_tail_norm: spectral_norm(&gu),
        phi_s,
        phi_u,
        signals,
    })
}
