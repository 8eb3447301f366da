use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, ensure_finite, ensure_square, spectral_norm};

/// Number of consecutive decreasing ratios that ends the τ-scan.
pub const MONOTONE_STOP: usize = 50;
/// Hard cap on the τ-scan.
pub const MAX_TAU: usize = 10_000;

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Result of the τ-scan behind [`transient_amplification`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationScan {
    /// `sup_τ ‖M^τ‖ / ρ(M)^{τ/2}` over the scanned range.
    pub value: f64,
    /// τ attaining the supremum.
    pub argmax: usize,
    /// Number of τ values evaluated.
    pub steps: usize,
    /// False when the cap was hit before the monotone-decrease rule fired.
    pub settled: bool,
}

/// `Φ(M) = sup_{τ≥0} ‖M^τ‖ / ρ(M)^{τ/2}` for a Schur-stable `M`.
///
/// The scan iterates `(M/√ρ)^τ`, which keeps the ratio itself as the running
/// quantity, and stops after [`MONOTONE_STOP`] consecutive decreases.
pub fn transient_amplification(m: &DMatrix<f64>) -> Result<f64> {
    let scan = transient_amplification_scan(m, MAX_TAU)?;
    if !scan.settled {
        log::warn!(
            "transient amplification scan hit the cap of {MAX_TAU} steps; returning best value {}",
            scan.value
        );
    }
    Ok(scan.value)
}

pub fn transient_amplification_scan(m: &DMatrix<f64>, max_tau: usize) -> Result<AmplificationScan> {
    let rho = spectral_radius(m)?;
    if rho >= 1.0 {
        return Err(Error::Domain(format!(
            "transient amplification needs rho(M) < 1, got {rho}"
        )));
    }
    let n = m.nrows();
    if n == 0 || m.iter().all(|v| *v == 0.0) {
        return Ok(AmplificationScan {
            value: 1.0,
            argmax: 0,
            steps: 1,
            settled: true,
        });
    }
    if rho == 0.0 {
        return Err(Error::Domain(
            "nilpotent non-zero matrix: ‖M^τ‖/ρ^{τ/2} is unbounded".into(),
        ));
    }
    let step = m / rho.sqrt();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut best = 1.0;
    let mut argmax = 0;
    let mut prev = 1.0;
    let mut decreasing = 0;
    let mut tau = 0;
    while tau < max_tau {
        tau += 1;
        power = &power * &step;
        let ratio = spectral_norm(&power);
        if ratio > best {
            best = ratio;
            argmax = tau;
        }
        if ratio < prev {
            decreasing += 1;
        } else {
            decreasing = 0;
        }
        prev = ratio;
        if decreasing >= MONOTONE_STOP || ratio == 0.0 {
            return Ok(AmplificationScan {
                value: best,
                argmax,
                steps: tau + 1,
                settled: true,
            });
        }
    }
    Ok(AmplificationScan {
        value: best,
        argmax,
        steps: tau + 1,
        settled: false,
    })
}
