use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::decompose::DecomposedRealization;
use crate::error::{Error, Result};

/// Two-sided coefficient block `[H_{-d}, …, H_0, …, H_r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentBlock {
    r: usize,
    d: usize,
    coeffs: Vec<DMatrix<f64>>,
}

impl LaurentBlock {
    /// Builds a block from coefficients ordered from lag `-d` to lag `r`.
    pub fn new(r: usize, d: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if coeffs.len() != r + d + 1 {
            return Err(Error::Dimension(format!(
                "expected {} coefficients for r={r}, d={d}, got {}",
                r + d + 1,
                coeffs.len()
            )));
        }
        let shape = coeffs[0].shape();
        if coeffs.iter().any(|c| c.shape() != shape) {
            return Err(Error::Dimension("coefficients differ in shape".into()));
        }
        if coeffs.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data("non-finite Laurent coefficient".into()));
        }
        Ok(Self { r, d, coeffs })
    }

    /// Unpacks a flattened `m × (cols·μ)` parameter `[H_{-d} … H_r]`.
    pub fn from_theta(theta: &DMatrix<f64>, cols: usize, r: usize, d: usize) -> Result<Self> {
        let mu = r + d + 1;
        if cols == 0 || theta.ncols() != cols * mu {
            return Err(Error::Dimension(format!(
                "theta has {} columns, expected {}·{mu}",
                theta.ncols(),
                cols
            )));
        }
        let coeffs = (0..mu)
            .map(|i| theta.columns(i * cols, cols).into_owned())
            .collect();
        Self::new(r, d, coeffs)
    }

    pub fn r(&self) -> usize {
        self.r
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn mu(&self) -> usize {
        self.r + self.d + 1
    }
    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }
    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    /// All coefficients ordered from lag `-d` to lag `r`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Coefficient at lag `i` (`-d ≤ i ≤ r`).
    pub fn coeff(&self, lag: isize) -> Option<&DMatrix<f64>> {
        let idx = lag + self.d as isize;
        if idx < 0 {
            return None;
        }
        self.coeffs.get(idx as usize)
    }

    /// `H_1, …, H_r`.
    pub fn causal(&self) -> &[DMatrix<f64>] {
        &self.coeffs[self.d + 1..]
    }

    /// `H_{-1}, …, H_{-d}` (nearest lag first).
    pub fn noncausal(&self) -> Vec<DMatrix<f64>> {
        self.coeffs[..self.d].iter().rev().cloned().collect()
    }

    /// Flattened `m × (cols·μ)` matrix `[H_{-d} … H_r]`.
    pub fn theta(&self) -> DMatrix<f64> {
        let (m, p) = (self.rows(), self.cols());
        let mut out = DMatrix::zeros(m, p * self.mu());
        for (i, c) in self.coeffs.iter().enumerate() {
            out.columns_mut(i * p, p).copy_from(c);
        }
        out
    }

    /// CSV with columns `lag_index,row,col,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_lag_csv(out, &self.theta(), self.cols(), self.r, self.d, ["lag_index", "row", "col", "value"])
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let (r, d, coeffs) = read_lag_csv(input)?;
        Self::new(r, d, coeffs)
    }
}

pub(crate) fn write_lag_csv<W: Write>(
    out: W,
    theta: &DMatrix<f64>,
    cols: usize,
    r: usize,
    d: usize,
    header: [&str; 4],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    let mu = r + d + 1;
    for blk in 0..mu {
        let lag = blk as isize - d as isize;
        for i in 0..theta.nrows() {
            for j in 0..cols {
                w.write_record(&[
                    lag.to_string(),
                    i.to_string(),
                    j.to_string(),
                    theta[(i, blk * cols + j)].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_lag_csv<R: Read>(input: R) -> Result<(usize, usize, Vec<DMatrix<f64>>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, got {}", rec.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse { line, msg };
        let lag: isize = rec[0].trim().parse().map_err(|e| parse_err(format!("lag: {e}")))?;
        let row: usize = rec[1].trim().parse().map_err(|e| parse_err(format!("row: {e}")))?;
        let col: usize = rec[2].trim().parse().map_err(|e| parse_err(format!("col: {e}")))?;
        let val: f64 = rec[3].trim().parse().map_err(|e| parse_err(format!("value: {e}")))?;
        if !val.is_finite() {
            return Err(parse_err("non-finite value".into()));
        }
        entries.push((lag, row, col, val));
    }
    if entries.is_empty() {
        return Err(Error::Data("empty coefficient file".into()));
    }
    let min_lag = entries.iter().map(|e| e.0).min().unwrap_or(0);
    let max_lag = entries.iter().map(|e| e.0).max().unwrap_or(0);
    if min_lag > 0 || max_lag < 0 {
        return Err(Error::Data("lag range must include 0".into()));
    }
    let m = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let p = entries.iter().map(|e| e.2).max().unwrap_or(0) + 1;
    let (r, d) = (max_lag as usize, (-min_lag) as usize);
    let mut coeffs = vec![DMatrix::zeros(m, p); r + d + 1];
    let mut seen = vec![false; (r + d + 1) * m * p];
    for (lag, i, j, v) in entries {
        let blk = (lag + d as isize) as usize;
        coeffs[blk][(i, j)] = v;
        seen[(blk * m + i) * p + j] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Data("coefficient file is missing entries".into()));
    }
    Ok((r, d, coeffs))
}

/// Laurent coefficients of `C(zI − A)⁻¹ B_in + D` over lags `-d..=r`.
///
/// Negative lags use repeated solves against a single LU factorization of
/// `A_u`; forward powers of `A_u` are never formed.
fn laurent_coeffs(
    dec: &DecomposedRealization,
    b_s: &DMatrix<f64>,
    b_u: &DMatrix<f64>,
    direct: &DMatrix<f64>,
    r: usize,
    d: usize,
) -> Result<LaurentBlock> {
    let m = dec.c_s.nrows();
    let cols = b_s.ncols();
    let mut coeffs = vec![DMatrix::zeros(m, cols); r + d + 1];

    let mut x = b_s.clone();
    for i in 1..=r {
        coeffs[d + i] = &dec.c_s * &x;
        x = &dec.a_s * x;
    }

    if dec.n_u() == 0 {
        coeffs[d] = direct.clone();
    } else {
        let lu = dec.a_u.clone().lu();
        let solve = |rhs: &DMatrix<f64>| {
            lu.solve(rhs)
                .ok_or_else(|| Error::Numeric("anti-stable block A_u is singular".into()))
        };
        // y_j = A_u^{-(j+1)} B_u
        let mut y = solve(b_u)?;
        coeffs[d] = direct - &dec.c_u * &y;
        for j in 1..=d {
            y = solve(&y)?;
            coeffs[d - j] = -(&dec.c_u * &y);
        }
    }
    LaurentBlock::new(r, d, coeffs)
}

/// Input-to-output coefficients `H_{-d} … H_r`.
pub fn laurent_input_coeffs(
    dec: &DecomposedRealization,
    d_matrix: &DMatrix<f64>,
    r: usize,
    d: usize,
) -> Result<LaurentBlock> {
    if d_matrix.nrows() != dec.c_s.nrows() || d_matrix.ncols() != dec.b_s.ncols() {
        return Err(Error::Dimension(format!(
            "D must be {}x{}",
            dec.c_s.nrows(),
            dec.b_s.ncols()
        )));
    }
    laurent_coeffs(dec, &dec.b_s, &dec.b_u, d_matrix, r, d)
}

/// Process-noise-to-output coefficients `F_{-d} … F_r` (no direct term).
pub fn laurent_noise_coeffs(dec: &DecomposedRealization, r: usize, d: usize) -> Result<LaurentBlock> {
    let zero = DMatrix::zeros(dec.c_s.nrows(), dec.bw_s.ncols());
    laurent_coeffs(dec, &dec.bw_s, &dec.bw_u, &zero, r, d)
}

/// Output of a truncated two-sided FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirResponse {
    /// Time index of the first output column.
    pub start: usize,
    /// `m × count` outputs for `k = start, start+1, …`.
    pub values: DMatrix<f64>,
}

/// `y_F(k) = Σ_{i=-d}^{r} H_i u(k − i)` for every `k` with full support,
/// i.e. `k = r, …, len − 1 − d`. Columns of `u` are time samples.
pub fn truncated_fir_response(block: &LaurentBlock, u: &DMatrix<f64>) -> Result<FirResponse> {
    if u.nrows() != block.cols() {
        return Err(Error::Dimension(format!(
            "input has {} channels, block expects {}",
            u.nrows(),
            block.cols()
        )));
    }
    let (r, d) = (block.r(), block.d());
    let len = u.ncols();
    if len < r + d + 1 {
        return Err(Error::Range(format!(
            "input of length {len} cannot support lags -{d}..{r}"
        )));
    }
    let count = len - r - d;
    let mut values = DMatrix::zeros(block.rows(), count);
    for j in 0..count {
        let k = r + j;
        let mut acc = values.column_mut(j);
        for (idx, h) in block.coeffs().iter().enumerate() {
            let lag = idx as isize - d as isize;
            let t = (k as isize - lag) as usize;
            acc += h * u.column(t);
        }
    }
    Ok(FirResponse { start: r, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{decompose, presets, StateSpaceModel};
    use approx::assert_relative_eq;

    fn scalar_unstable() -> DecomposedRealization {
        let m = StateSpaceModel::siso_like(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        decompose(&m, 1e-8).unwrap()
    }

    #[test]
    fn scalar_anti_stable_series() {
        // 1/(z − 2) = −Σ_{k≥0} z^k / 2^{k+1}
        let dec = scalar_unstable();
        let blk = laurent_input_coeffs(&dec, &DMatrix::zeros(1, 1), 4, 6).unwrap();
        for i in 1..=4 {
            assert_eq!(blk.coeff(i).unwrap()[(0, 0)], 0.0);
        }
        for j in 0..=6i32 {
            let want = -(0.5f64).powi(j + 1);
            assert_relative_eq!(blk.coeff(-(j as isize)).unwrap()[(0, 0)], want, epsilon = 1e-15);
        }
    }

    #[test]
    fn stable_only_block_has_zero_preview() {
        let model = presets::stable_siso();
        let dec = decompose(&model, 1e-8).unwrap();
        let d = DMatrix::from_element(1, 1, 0.7);
        let blk = laurent_input_coeffs(&dec, &d, 5, 3).unwrap();
        for j in 1..=3 {
            assert_eq!(blk.coeff(-j).unwrap()[(0, 0)], 0.0);
        }
        assert_eq!(blk.coeff(0).unwrap(), &d);
        let f = laurent_noise_coeffs(&dec, 5, 3).unwrap();
        assert_eq!(f.coeff(0).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn noise_coeffs_equal_input_coeffs_when_bw_is_b() {
        let model = presets::example1();
        let dec = decompose(&model, 1e-8).unwrap();
        let h = laurent_input_coeffs(&dec, model.d(), 6, 6).unwrap();
        let f = laurent_noise_coeffs(&dec, 6, 6).unwrap();
        for lag in -6..=6isize {
            if lag == 0 {
                let want = -(&dec.c_u * dec.a_u.clone().try_inverse().unwrap() * &dec.b_u);
                assert_relative_eq!(f.coeff(0).unwrap(), &want, epsilon = 1e-10);
            } else {
                assert_relative_eq!(f.coeff(lag).unwrap(), h.coeff(lag).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn impulse_reproduces_coefficients() {
        let dec = decompose(&presets::example4(), 1e-8).unwrap();
        let blk = laurent_input_coeffs(&dec, &DMatrix::zeros(1, 1), 4, 3).unwrap();
        let len = 20;
        let t0 = 10;
        let mut u = DMatrix::zeros(1, len);
        u[(0, t0)] = 1.0;
        let out = truncated_fir_response(&blk, &u).unwrap();
        for lag in -3..=4isize {
            let k = (t0 as isize + lag) as usize;
            let col = k - out.start;
            assert_relative_eq!(
                out.values[(0, col)],
                blk.coeff(lag).unwrap()[(0, 0)],
                epsilon = 1e-15
            );
        }
        // preview coefficients appear before the impulse instant
        assert!(out.values[(0, t0 - 1 - out.start)].abs() > 0.0);
    }

    #[test]
    fn short_input_is_range_error() {
        let blk = LaurentBlock::new(2, 2, vec![DMatrix::zeros(1, 1); 5]).unwrap();
        assert!(matches!(
            truncated_fir_response(&blk, &DMatrix::zeros(1, 4)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn theta_layout_and_csv_round_trip() {
        let coeffs: Vec<_> = (0..4)
            .map(|k| DMatrix::from_fn(2, 3, |i, j| (k * 100 + i * 10 + j) as f64 + 0.125))
            .collect();
        let blk = LaurentBlock::new(2, 1, coeffs).unwrap();
        let theta = blk.theta();
        assert_eq!(theta.shape(), (2, 12));
        assert_eq!(theta[(1, 3 + 2)], 112.125);
        let back = LaurentBlock::from_theta(&theta, 3, 2, 1).unwrap();
        assert_eq!(back, blk);
        let mut buf = Vec::new();
        blk.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("lag_index,row,col,value\n-1,0,0,"));
        assert_eq!(LaurentBlock::read_csv(&buf[..]).unwrap(), blk);
    }
}
