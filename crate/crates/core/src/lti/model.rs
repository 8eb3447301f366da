use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, ensure_finite};

/// Default minimum distance of any pole modulus from 1.
pub const DEFAULT_UNIT_CIRCLE_TOL: f64 = 1e-8;

/// Discrete-time plant `x⁺ = A x + B u + B_w w`, `y = C x + D u + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    bw: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    unit_circle_tol: f64,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        bw: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        Self::with_tolerance(a, b, bw, c, d, DEFAULT_UNIT_CIRCLE_TOL)
    }

    pub fn with_tolerance(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        bw: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        unit_circle_tol: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let (p, l, m) = (b.ncols(), bw.ncols(), c.nrows());
        if p == 0 || l == 0 || m == 0 {
            return Err(Error::Dimension(
                "input, noise and output dimensions must be positive".into(),
            ));
        }
        let checks = [
            ("B", b.nrows(), n),
            ("Bw", bw.nrows(), n),
            ("C", c.ncols(), n),
            ("D rows", d.nrows(), m),
            ("D cols", d.ncols(), p),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::Dimension(format!("{what}: expected {want}, got {got}")));
            }
        }
        for (what, mat) in [("A", &a), ("B", &b), ("Bw", &bw), ("C", &c), ("D", &d)] {
            ensure_finite(mat, what)?;
        }
        for lambda in eigenvalues(&a)? {
            let modulus = lambda.norm();
            if (modulus - 1.0).abs() < unit_circle_tol {
                return Err(Error::UnitCircle {
                    modulus,
                    tol: unit_circle_tol,
                });
            }
        }
        Ok(Self {
            a,
            b,
            bw,
            c,
            d,
            unit_circle_tol,
        })
    }

    /// Model with `B_w = B` and `D = 0`.
    pub fn siso_like(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        Self::new(a, b.clone(), b, c, d)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn bw(&self) -> &DMatrix<f64> {
        &self.bw
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn unit_circle_tol(&self) -> f64 {
        self.unit_circle_tol
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn p(&self) -> usize {
        self.b.ncols()
    }
    pub fn l(&self) -> usize {
        self.bw.ncols()
    }
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    /// Replaces the process-noise input matrix.
    pub fn with_bw(&self, bw: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(
            self.a.clone(),
            self.b.clone(),
            bw,
            self.c.clone(),
            self.d.clone(),
            self.unit_circle_tol,
        )
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.a)
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            a: rows_of(&self.a),
            b: rows_of(&self.b),
            bw: Some(rows_of(&self.bw)),
            c: rows_of(&self.c),
            d: Some(rows_of(&self.d)),
        }
    }

    pub fn from_json(doc: &ModelJson) -> Result<Self> {
        let a = matrix_from_rows(&doc.a, "A")?;
        let b = matrix_from_rows(&doc.b, "B")?;
        let c = matrix_from_rows(&doc.c, "C")?;
        let bw = match &doc.bw {
            Some(rows) => matrix_from_rows(rows, "Bw")?,
            None => b.clone(),
        };
        let d = match &doc.d {
            Some(rows) => matrix_from_rows(rows, "D")?,
            None => DMatrix::zeros(c.nrows(), b.ncols()),
        };
        Self::new(a, b, bw, c, d)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: ModelJson = serde_json::from_str(&text)?;
        Self::from_json(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

/// JSON persistence schema: row-major nested arrays, dimensions inferred.
/// `Bw` defaults to `B` and `D` to zero when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Bw", default, skip_serializing_if = "Option::is_none")]
    pub bw: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Data(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
