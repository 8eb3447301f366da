use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use super::reconstruct::ReconstructedModel;
use crate::error::{Error, Result};
use crate::lti::{LaurentBlock, StateSpaceModel};

/// Anything that can be evaluated as a transfer matrix at a complex point.
pub trait TransferFunction {
    fn outputs(&self) -> usize;
    fn inputs(&self) -> usize;
    fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>>;
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `C (zI − A)⁻¹ B`; an empty `A` contributes zero.
pub fn eval_state_space(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    z: Complex64,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(c.nrows(), b.ncols()));
    }
    let mut resolvent = -complexify(a);
    for i in 0..n {
        resolvent[(i, i)] += z;
    }
    let scale = a.norm().max(1.0);
    let smin = SVD::new(resolvent.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12 * scale) {
        return Err(Error::Numeric(format!("z = {z} lies on a pole (σ_min(zI − A) = {smin:e})")));
    }
    let x = resolvent
        .lu()
        .solve(&complexify(b))
        .ok_or_else(|| Error::Numeric(format!("z = {z} lies on a pole")))?;
    Ok(complexify(c) * x)
}

impl TransferFunction for StateSpaceModel {
    fn outputs(&self) -> usize {
        self.m()
    }
    fn inputs(&self) -> usize {
        self.p()
    }
    fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        Ok(eval_state_space(self.a(), self.b(), self.c(), z)? + complexify(self.d()))
    }
}

impl TransferFunction for ReconstructedModel {
    fn outputs(&self) -> usize {
        ReconstructedModel::outputs(self)
    }
    fn inputs(&self) -> usize {
        ReconstructedModel::inputs(self)
    }
    fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let s = eval_state_space(&self.stable.a, &self.stable.b, &self.stable.c, z)?;
        let u = eval_state_space(&self.unstable.a, &self.unstable.b, &self.unstable.c, z)?;
        Ok(s + u + complexify(&self.d))
    }
}

/// The truncated two-sided series `Σ_{i=-d}^{r} H_i z^{-i}`.
impl TransferFunction for LaurentBlock {
    fn outputs(&self) -> usize {
        self.rows()
    }
    fn inputs(&self) -> usize {
        self.cols()
    }
    fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        if z.norm() == 0.0 {
            return Err(Error::Numeric("a Laurent series cannot be evaluated at z = 0".into()));
        }
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for (blk, h) in self.coeffs().iter().enumerate() {
            let lag = blk as i32 - self.d() as i32;
            out += complexify(h) * z.powi(-lag);
        }
        Ok(out)
    }
}

/// `n` frequencies evenly spaced on `[0, π]`.
pub fn frequency_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| PI * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `G(e^{jω})` on a frequency grid.
#[derive(Debug, Clone)]
pub struct FrequencyResponse {
    pub omega: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
}

pub fn magnitude_db(g: Complex64) -> f64 {
    20.0 * g.norm().log10()
}

pub fn phase_deg(g: Complex64) -> f64 {
    g.arg().to_degrees()
}

/// Wrapped phase difference in degrees, in `(−180, 180]`.
pub fn phase_gap_deg(a: Complex64, b: Complex64) -> f64 {
    (a / b).arg().to_degrees()
}

pub fn frequency_response<T: TransferFunction + ?Sized>(tf: &T, omega: &[f64]) -> Result<FrequencyResponse> {
    let values = omega
        .iter()
        .map(|&w| tf.eval(Complex64::from_polar(1.0, w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyResponse { omega: omega.to_vec(), values })
}

impl FrequencyResponse {
    /// CSV with columns `omega,out,in,mag_db,phase_deg`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega", "out", "in", "mag_db", "phase_deg"])?;
        for (omega, g) in self.omega.iter().zip(&self.values) {
            for i in 0..g.nrows() {
                for j in 0..g.ncols() {
                    w.write_record(&[
                        omega.to_string(),
                        i.to_string(),
                        j.to_string(),
                        magnitude_db(g[(i, j)]).to_string(),
                        phase_deg(g[(i, j)]).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
