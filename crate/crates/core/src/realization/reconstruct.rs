use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hankel::{ho_kalman_causal, ho_kalman_noncausal, HankelSpec, Realization};
use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::lti::{matrix_from_rows, rows_of, LaurentBlock};

/// Which coefficients and orders produced a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub r: usize,
    pub d: usize,
    pub order_s: usize,
    pub order_u: usize,
}

/// `Ĝ(z) = Ĉ_s(zI − Â_s)⁻¹B̂_s + Ĉ_u(zI − Â_u)⁻¹B̂_u + D̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedModel {
    pub stable: Realization,
    pub unstable: Realization,
    pub d: DMatrix<f64>,
    pub provenance: Provenance,
}

impl ReconstructedModel {
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }

    /// Poles of both halves, stable first.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        let mut out = if self.stable.order() > 0 { eigenvalues(&self.stable.a)? } else { Vec::new() };
        if self.unstable.order() > 0 {
            out.extend(eigenvalues(&self.unstable.a)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> ReconstructedJson {
        let part = |r: &Realization| PartJson { a: rows_of(&r.a), b: rows_of(&r.b), c: rows_of(&r.c) };
        ReconstructedJson {
            schema_version: crate::SCHEMA_VERSION.to_string(),
            parts: PartsJson {
                stable: part(&self.stable),
                unstable: part(&self.unstable),
                d: rows_of(&self.d),
            },
            provenance: self.provenance,
        }
    }

    pub fn from_json(doc: &ReconstructedJson) -> Result<Self> {
        let d = matrix_from_rows(&doc.parts.d, "D")?;
        let (m, p) = d.shape();
        let part = |j: &PartJson, what: &str| -> Result<Realization> {
            let n = j.a.len();
            let a = matrix_from_rows(&j.a, what)?;
            let b = if n == 0 { DMatrix::zeros(0, p) } else { matrix_from_rows(&j.b, what)? };
            let c = if n == 0 { DMatrix::zeros(m, 0) } else { matrix_from_rows(&j.c, what)? };
            if a.shape() != (n, n) || b.shape() != (n, p) || c.shape() != (m, n) {
                return Err(Error::Dimension(format!("{what} part has inconsistent dimensions")));
            }
            Ok(Realization { a, b, c, ..Realization::empty(m, p) })
        };
        Ok(Self {
            stable: part(&doc.parts.stable, "stable")?,
            unstable: part(&doc.parts.unstable, "unstable")?,
            d,
            provenance: doc.provenance,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: ReconstructedJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&doc)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartsJson {
    pub stable: PartJson,
    pub unstable: PartJson,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructedJson {
    pub schema_version: String,
    pub parts: PartsJson,
    pub provenance: Provenance,
}

/// Realizes both halves of a Laurent block and recovers `D̂ = Ĥ_0 + Ĉ_u Â_u⁻¹ B̂_u`.
pub fn reconstruct(theta: &LaurentBlock, spec_s: &HankelSpec, spec_u: &HankelSpec) -> Result<ReconstructedModel> {
    let stable = ho_kalman_causal(theta.causal(), spec_s)?;
    let unstable = ho_kalman_noncausal(&theta.noncausal(), spec_u)?;
    let h0 = theta.coeff(0).expect("lag 0 is always present").clone();
    let d = if unstable.order() == 0 {
        h0
    } else {
        let lu = unstable.a.clone().lu();
        let x = lu
            .solve(&unstable.b)
            .ok_or_else(|| Error::Numeric("anti-stable realization is singular".into()))?;
        h0 + &unstable.c * x
    };
    if stable.order() > 0 && crate::lti::spectral_radius(&stable.a)? >= 1.0 {
        log::warn!("realized stable half has a pole on or outside the unit circle");
    }
    if unstable.order() > 0 && eigenvalues(&unstable.a)?.iter().any(|z| z.norm() <= 1.0) {
        log::warn!("realized anti-stable half has a pole on or inside the unit circle");
    }
    Ok(ReconstructedModel {
        provenance: Provenance { r: theta.r(), d: theta.d(), order_s: stable.order(), order_u: unstable.order() },
        stable,
        unstable,
        d,
    })
}
