//! Finite-sample error bound for the IV estimator and horizon selection.
//!
//! Every scalar entering the bound is evaluated by its own function so the
//! terms can be inspected and tested one at a time. The universal constants
//! are not known numerically; they default to 1 and are always reported.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::lti::{laurent_noise_coeffs, tail_gains, transient_amplification, DecomposedRealization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalConstants {
    pub c0: f64,
    pub c_w: f64,
    pub c_v: f64,
    pub c_es: f64,
    pub c_eu: f64,
    pub kappa_w: f64,
}

impl Default for UniversalConstants {
    fn default() -> Self {
        Self { c0: 1.0, c_w: 1.0, c_v: 1.0, c_es: 1.0, c_eu: 1.0, kappa_w: 1.0 }
    }
}

/// Everything the bound depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub rho_s: f64,
    pub rho_u_inv: f64,
    pub phi_s: f64,
    pub phi_u: f64,
    /// `‖C_s A_s^r‖`
    pub tail_s: f64,
    /// `‖C_u A_u^{-d-1}‖`
    pub tail_u: f64,
    /// `‖γ_{r,d}‖`, the noise-to-output coefficient block.
    pub gamma_norm: f64,
    pub gamma_cl: f64,
    pub gamma_cl_s: f64,
    pub gamma_cl_u: f64,
    pub sigma_c: f64,
    pub sigma_w: f64,
    pub sigma_v: f64,
    pub m: usize,
    pub p: usize,
    pub l: usize,
    pub r: usize,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    pub lambda_iv: f64,
    #[serde(default)]
    pub constants: UniversalConstants,
}

impl BoundInputs {
    /// Fills the system constants from a decomposition; moments, noise
    /// levels, `N`, `δ` and `λ_IV` are left for the caller.
    pub fn from_system(dec: &DecomposedRealization, r: usize, d: usize) -> Result<Self> {
        let (gs, gu) = tail_gains(dec, r, d)?;
        let phi_or_one = |m: &nalgebra::DMatrix<f64>| -> Result<f64> {
            if m.nrows() == 0 || m.iter().all(|v| *v == 0.0) {
                Ok(1.0)
            } else {
                transient_amplification(m)
            }
        };
        let phi_u = if dec.n_u() == 0 {
            1.0
        } else {
            let inv = dec
                .a_u
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numeric("anti-stable block A_u is singular".into()))?;
            phi_or_one(&inv)?
        };
        let gamma = laurent_noise_coeffs(dec, r, d)?;
        Ok(Self {
            rho_s: dec.rho_s,
            rho_u_inv: dec.rho_u_inv,
            phi_s: phi_or_one(&dec.a_s)?,
            phi_u,
            tail_s: spectral_norm(&gs),
            tail_u: spectral_norm(&gu),
            gamma_norm: spectral_norm(&gamma.theta()),
            gamma_cl: 0.0,
            gamma_cl_s: 0.0,
            gamma_cl_u: 0.0,
            sigma_c: 1.0,
            sigma_w: 0.0,
            sigma_v: 0.0,
            m: dec.c_s.nrows(),
            p: dec.b_s.ncols(),
            l: dec.bw_s.ncols(),
            r,
            d,
            n: 1,
            delta: 0.05,
            lambda_iv: 1.0,
            constants: UniversalConstants::default(),
        })
    }

    pub fn mu(&self) -> usize {
        self.r + self.d + 1
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("δ must lie in (0, 1), got {}", self.delta)));
        }
        for (name, v) in [("rho_s", self.rho_s), ("rho_u_inv", self.rho_u_inv)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        let c = &self.constants;
        if [c.c0, c.c_w, c.c_v, c.c_es, c.c_eu, c.kappa_w].iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("universal constants must be positive and finite".into()));
        }
        let nonneg = [
            self.phi_s, self.phi_u, self.tail_s, self.tail_u, self.gamma_norm, self.gamma_cl,
            self.gamma_cl_s, self.gamma_cl_u, self.sigma_c, self.sigma_w, self.sigma_v,
        ];
        if nonneg.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("system constants, moments and noise levels must be finite and nonnegative".into()));
        }
        if self.n == 0 || self.p == 0 || self.m == 0 {
            return Err(Error::Domain("N, p and m must be positive".into()));
        }
        Ok(())
    }
}

/// Dimension and confidence helpers of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Helpers {
    pub chi_n: f64,
    pub l_w1: f64,
    pub l_w2: f64,
    pub n_w: f64,
    pub m_v: f64,
    pub d_s: f64,
    pub m_s: f64,
    pub d_u: f64,
    pub m_u: f64,
}

fn degenerate(which: &str) -> Error {
    Error::Domain(format!("degenerate horizon: {which} = 0 makes 1 − ρ^{which} vanish"))
}

/// `D(N, h) = 1 + m h / (N (1 − ρ^h))`.
fn d_term(m: usize, h: usize, n: usize, rho: f64, which: &str) -> Result<f64> {
    let gap = 1.0 - rho.powi(h as i32);
    if h == 0 || gap <= 0.0 {
        return Err(degenerate(which));
    }
    Ok(1.0 + (m * h) as f64 / (n as f64 * gap))
}

pub fn evaluate_helpers(inp: &BoundInputs) -> Result<Helpers> {
    inp.validate()?;
    let (mu, p, m, l, n, delta) = (inp.mu() as f64, inp.p as f64, inp.m as f64, inp.l as f64, inp.n as f64, inp.delta);
    let chi_n = (16.0 * mu * p / delta).ln().powi(2) * (16.0 * n * p / delta).ln().powi(2);
    let l_w1 = (16.0 * mu * (l + p) / delta).ln();
    let l_w2 = (16.0 * n * (l + p) / delta).ln();
    let n_w = inp.constants.kappa_w * mu * (l + p) * l_w1 * l_w1 * l_w2 * l_w2;
    let m_v = mu * p + m + (16.0 / delta).ln();
    let (r, d) = (inp.r as f64, inp.d as f64);
    Ok(Helpers {
        chi_n,
        l_w1,
        l_w2,
        n_w,
        m_v,
        d_s: d_term(inp.m, inp.r, inp.n, inp.rho_s, "r")?,
        m_s: r * p + m + (16.0 * (r + 1.0) / delta).ln(),
        d_u: d_term(inp.m, inp.d, inp.n, inp.rho_u_inv, "d")?,
        m_u: d * p + m + (16.0 * (d + 1.0) / delta).ln(),
    })
}

/// `σ_{e,s} = Φ(A_s) ‖C_s A_s^r‖ √(r Γ_cl,s / (1 − ρ_s^r))` and its reverse-time analog.
pub fn truncation_scales(inp: &BoundInputs) -> Result<(f64, f64)> {
    inp.validate()?;
    let scale = |phi: f64, tail: f64, h: usize, gamma: f64, rho: f64, which: &str| -> Result<f64> {
        let gap = 1.0 - rho.powi(h as i32);
        if h == 0 || gap <= 0.0 {
            return Err(degenerate(which));
        }
        Ok(phi * tail * (h as f64 * gamma / gap).sqrt())
    };
    Ok((
        scale(inp.phi_s, inp.tail_s, inp.r, inp.gamma_cl_s, inp.rho_s, "r")?,
        scale(inp.phi_u, inp.tail_u, inp.d, inp.gamma_cl_u, inp.rho_u_inv, "d")?,
    ))
}

/// Every scalar of the bound, plus the inputs and constants it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "chi_N")]
    pub chi_n: f64,
    #[serde(rename = "N_w")]
    pub n_w: f64,
    #[serde(rename = "L_w1")]
    pub l_w1: f64,
    #[serde(rename = "L_w2")]
    pub l_w2: f64,
    #[serde(rename = "M_v")]
    pub m_v: f64,
    #[serde(rename = "D_s")]
    pub d_s: f64,
    #[serde(rename = "M_s")]
    pub m_s: f64,
    #[serde(rename = "D_u")]
    pub d_u: f64,
    #[serde(rename = "M_u")]
    pub m_u: f64,
    pub sigma_e_s: f64,
    pub sigma_e_u: f64,
    pub beta_w: f64,
    pub beta_v: f64,
    pub beta_es: f64,
    pub beta_eu: f64,
    pub sample_size_required: f64,
    pub sample_size_satisfied: bool,
    pub bound_value: f64,
    pub inputs: BoundInputs,
}

pub fn theorem_bound(inp: &BoundInputs) -> Result<BoundReport> {
    if !(inp.lambda_iv > 0.0 && inp.lambda_iv.is_finite()) {
        let s = (inp.lambda_iv.max(0.0)).sqrt() * inp.sigma_c;
        return Err(Error::WeakInstrument { s_iv: s, sigma_min: s, threshold: 0.0 });
    }
    let h = evaluate_helpers(inp)?;
    let (sigma_e_s, sigma_e_u) = truncation_scales(inp)?;
    let c = &inp.constants;
    let n = inp.n as f64;
    let beta_w = c.c_w * inp.sigma_w * inp.gamma_norm * h.n_w.sqrt().max(h.n_w / n.sqrt());
    let beta_v = c.c_v * inp.sigma_v * h.m_v.sqrt();
    let beta_es = c.c_es * sigma_e_s * (h.d_s * h.m_s).sqrt();
    let beta_eu = c.c_eu * sigma_e_u * (h.d_u * h.m_u).sqrt();
    let sample_size_required = c.c0
        * (inp.mu() * inp.p) as f64
        * h.chi_n
        * 1f64.max(inp.sigma_c * inp.sigma_c / inp.lambda_iv);
    let bound_value = (beta_w + beta_es + beta_eu + beta_v) / (inp.lambda_iv * n).sqrt();
    Ok(BoundReport {
        chi_n: h.chi_n,
        n_w: h.n_w,
        l_w1: h.l_w1,
        l_w2: h.l_w2,
        m_v: h.m_v,
        d_s: h.d_s,
        m_s: h.m_s,
        d_u: h.d_u,
        m_u: h.m_u,
        sigma_e_s,
        sigma_e_u,
        beta_w,
        beta_v,
        beta_es,
        beta_eu,
        sample_size_required,
        sample_size_satisfied: n >= sample_size_required,
        bound_value,
        inputs: inp.clone(),
    })
}

/// Smallest `h ≥ 0` with `ρ^h ≤ target`, evaluated in floating point.
fn minimal_horizon(rho: f64, target: f64) -> usize {
    let mut h = (target.ln() / rho.ln()).ceil().max(0.0) as usize;
    while rho.powi(h as i32) > target {
        h += 1;
    }
    while h > 0 && rho.powi(h as i32 - 1) <= target {
        h -= 1;
    }
    h
}

/// Horizons `r = ⌈log(N/ε₀)/|log ρ_s|⌉`, `d = ⌈log(N/ε₀)/|log ρ(A_u⁻¹)|⌉`,
/// adjusted so that `ρ^h ≤ ε₀/N` holds in floating point with `h` minimal.
pub fn corollary_horizons(rho_s: f64, rho_u_inv: f64, n: usize, eps0: f64) -> Result<(usize, usize)> {
    for (name, v) in [("rho_s", rho_s), ("rho_u_inv", rho_u_inv)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::Domain(format!("ε₀ must lie in (0, 1), got {eps0}")));
    }
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    let target = eps0 / n as f64;
    Ok((minimal_horizon(rho_s, target), minimal_horizon(rho_u_inv, target)))
}

/// Bound reports for a list of sample sizes.
pub fn bound_vs_n(inp: &BoundInputs, ns: &[usize]) -> Result<Vec<BoundReport>> {
    ns.iter()
        .map(|&n| theorem_bound(&BoundInputs { n, ..inp.clone() }))
        .collect()
}

impl BoundReport {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: &'static str,
            #[serde(flatten)]
            report: &'a BoundReport,
        }
        Ok(serde_json::to_string_pretty(&Doc { schema_version: crate::SCHEMA_VERSION, report: self })?)
    }
}

/// One row per report: `N` followed by every scalar.
pub fn write_bound_series_csv<W: Write>(out: W, reports: &[BoundReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "N", "chi_N", "N_w", "M_v", "D_s", "M_s", "D_u", "M_u", "sigma_e_s", "sigma_e_u", "beta_w",
        "beta_v", "beta_es", "beta_eu", "sample_size_required", "sample_size_satisfied", "bound_value",
    ])?;
    for r in reports {
        let vals = [
            r.chi_n, r.n_w, r.m_v, r.d_s, r.m_s, r.d_u, r.m_u, r.sigma_e_s, r.sigma_e_u, r.beta_w, r.beta_v,
            r.beta_es, r.beta_eu, r.sample_size_required,
        ];
        let mut row = vec![r.inputs.n.to_string()];
        row.extend(vals.iter().map(|v| v.to_string()));
        row.push(r.sample_size_satisfied.to_string());
        row.push(r.bound_value.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> BoundInputs {
        BoundInputs {
            rho_s: 0.5,
            rho_u_inv: 0.6,
            phi_s: 1.3,
            phi_u: 1.1,
            tail_s: 0.01,
            tail_u: 0.02,
            gamma_norm: 2.0,
            gamma_cl: 4.0,
            gamma_cl_s: 1.5,
            gamma_cl_u: 3.0,
            sigma_c: 1.0,
            sigma_w: 0.5,
            sigma_v: 0.1,
            m: 1,
            p: 1,
            l: 1,
            r: 10,
            d: 10,
            n: 1000,
            delta: 0.1,
            lambda_iv: 0.5,
            constants: UniversalConstants::default(),
        }
    }

    #[test]
    fn degenerate_horizons_rejected() {
        let inp = BoundInputs { r: 0, ..sample() };
        assert!(matches!(truncation_scales(&inp), Err(Error::Domain(_))));
        assert!(matches!(evaluate_helpers(&BoundInputs { d: 0, ..sample() }), Err(Error::Domain(_))));
    }

    #[test]
    fn weak_instrument_rejected() {
        let inp = BoundInputs { lambda_iv: 0.0, ..sample() };
        assert!(matches!(theorem_bound(&inp), Err(Error::WeakInstrument { .. })));
    }

    #[test]
    fn composition_is_exact() {
        let rep = theorem_bound(&sample()).unwrap();
        let want = (rep.beta_w + rep.beta_es + rep.beta_eu + rep.beta_v) / (0.5f64 * 1000.0).sqrt();
        assert_eq!(rep.bound_value, want);
    }

    #[test]
    fn corollary_examples() {
        assert_eq!(corollary_horizons(0.5, 0.5, 512, 0.5).unwrap().0, 10);
        let (r, d) = corollary_horizons(0.7, 0.7, 500, 0.1).unwrap();
        assert_eq!(r, d);
        let (r, d) = corollary_horizons(0.5, 0.96, 100, 0.01).unwrap();
        assert_relative_eq!(d as f64 / r as f64, 0.5f64.ln() / 0.96f64.ln(), max_relative = 0.1);
    }
}
