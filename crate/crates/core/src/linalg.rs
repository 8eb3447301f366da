//! Dense linear-algebra helpers shared by the modeling and estimation code.
//!
//! The real Schur form comes from nalgebra; block reordering and the
//! quasi-triangular Sylvester solver are implemented here because nalgebra
//! exposes neither.

use nalgebra::{DMatrix, DVector, Schur, QR, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

/// Operator 2-norm (largest singular value). Empty matrices have norm 0.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Smallest singular value. Empty matrices report 0.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub(crate) fn ensure_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

/// Eigenvalues of a square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let schur = RealSchur::new(m)?;
    Ok(schur.eigenvalues())
}

/// A real Schur decomposition `A = Q T Qᵀ` with `T` upper quasi-triangular.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl RealSchur {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        ensure_square(a, "matrix")?;
        let n = a.nrows();
        if n == 0 {
            return Ok(Self {
                q: DMatrix::zeros(0, 0),
                t: DMatrix::zeros(0, 0),
            });
        }
        let (q, t) = match Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER) {
            Some(s) => s.unpack(),
            None => {
                // Unshifted-looking cycles (e.g. nilpotent shift matrices) break
                // under a fixed orthogonal similarity.
                let v = DVector::from_fn(n, |i, _| 1.0 / (i as f64 + 1.618)).normalize();
                let h = DMatrix::identity(n, n) - (&v * v.transpose()) * 2.0;
                let (q, t) = Schur::try_new(&h * a * &h, SCHUR_EPS, SCHUR_MAX_ITER)
                    .ok_or_else(|| Error::Numeric("real Schur iteration did not converge".into()))?
                    .unpack();
                (h * q, t)
            }
        };
        let mut out = Self { q, t };
        out.clean_subdiagonal();
        out.split_real_pairs();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    fn clean_subdiagonal(&mut self) {
        let n = self.dim();
        for j in 0..n {
            for i in (j + 2)..n {
                self.t[(i, j)] = 0.0;
            }
        }
        for i in 0..n.saturating_sub(1) {
            let scale = self.t[(i, i)].abs() + self.t[(i + 1, i + 1)].abs();
            if self.t[(i + 1, i)].abs() <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
                self.t[(i + 1, i)] = 0.0;
            }
        }
    }

    /// Splits any 2x2 diagonal block whose eigenvalues are real into two 1x1
    /// blocks with a Givens rotation.
    fn split_real_pairs(&mut self) {
        let n = self.dim();
        let mut i = 0;
        while i + 1 < n {
            if self.t[(i + 1, i)] == 0.0 {
                i += 1;
                continue;
            }
            let (a, b, c, d) = (
                self.t[(i, i)],
                self.t[(i, i + 1)],
                self.t[(i + 1, i)],
                self.t[(i + 1, i + 1)],
            );
            let half = 0.5 * (a - d);
            let disc = half * half + b * c;
            if disc >= 0.0 {
                // eigenvector of the block for eigenvalue lambda
                let lambda = 0.5 * (a + d) + if half >= 0.0 { disc.sqrt() } else { -disc.sqrt() };
                let (x, y) = if (lambda - a).abs() + b.abs() > (lambda - d).abs() + c.abs() {
                    (b, lambda - a)
                } else {
                    (lambda - d, c)
                };
                let norm = x.hypot(y);
                if norm > 0.0 {
                    let (cs, sn) = (x / norm, y / norm);
                    let g = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
                    self.apply_local(i, &g);
                    self.t[(i + 1, i)] = 0.0;
                }
                i += 2;
            } else {
                i += 2;
            }
        }
    }

    /// Applies the orthogonal transform `z` (size s) acting on rows/columns
    /// `j..j+s` of `T`, accumulating it into `Q`.
    fn apply_local(&mut self, j: usize, z: &DMatrix<f64>) {
        let s = z.nrows();
        let rows = self.t.rows(j, s).into_owned();
        self.t.rows_mut(j, s).copy_from(&(z.transpose() * rows));
        let cols = self.t.columns(j, s).into_owned();
        self.t.columns_mut(j, s).copy_from(&(cols * z));
        let qc = self.q.columns(j, s).into_owned();
        self.q.columns_mut(j, s).copy_from(&(qc * z));
    }

    /// Diagonal blocks as `(start, size)` pairs.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && self.t[(i + 1, i)] != 0.0 {
                out.push((i, 2));
                i += 2;
            } else {
                out.push((i, 1));
                i += 1;
            }
        }
        out
    }

    fn block_eigenvalues(&self, start: usize, size: usize) -> Vec<Complex64> {
        if size == 1 {
            return vec![Complex64::new(self.t[(start, start)], 0.0)];
        }
        let (a, b, c, d) = (
            self.t[(start, start)],
            self.t[(start, start + 1)],
            self.t[(start + 1, start)],
            self.t[(start + 1, start + 1)],
        );
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            vec![Complex64::new(mean + s, 0.0), Complex64::new(mean - s, 0.0)]
        } else {
            let s = (-disc).sqrt();
            vec![Complex64::new(mean, s), Complex64::new(mean, -s)]
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks()
            .into_iter()
            .flat_map(|(s, k)| self.block_eigenvalues(s, k))
            .collect()
    }

    /// Reorders the form so that every block whose eigenvalues satisfy
    /// `select` comes first. Returns the number of leading selected rows.
    pub fn reorder<F: Fn(Complex64) -> bool>(&mut self, select: F) -> Result<usize> {
        loop {
            let blocks = self.blocks();
            let flags: Vec<bool> = blocks
                .iter()
                .map(|&(s, k)| select(self.block_eigenvalues(s, k)[0]))
                .collect();
            // first unselected block followed by a selected one
            let pos = (0..blocks.len().saturating_sub(1)).find(|&i| !flags[i] && flags[i + 1]);
            match pos {
                None => {
                    return Ok(blocks
                        .iter()
                        .zip(&flags)
                        .filter(|(_, &f)| f)
                        .map(|(b, _)| b.1)
                        .sum());
                }
                Some(i) => {
                    let (j, p) = blocks[i];
                    let q = blocks[i + 1].1;
                    self.swap_adjacent(j, p, q)?;
                }
            }
        }
    }

    /// Swaps the adjacent diagonal blocks of sizes `p` (at `j`) and `q` (at `j+p`).
    fn swap_adjacent(&mut self, j: usize, p: usize, q: usize) -> Result<()> {
        let s = p + q;
        let a11 = self.t.view((j, j), (p, p)).into_owned();
        let a12 = self.t.view((j, j + p), (p, q)).into_owned();
        let a22 = self.t.view((j + p, j + p), (q, q)).into_owned();
        // A11 X - X A22 = A12
        let x = solve_small_sylvester(&a11, &a22, &a12)?;
        let mut basis = DMatrix::<f64>::zeros(s, s);
        basis.view_mut((0, 0), (p, q)).copy_from(&(-&x));
        for k in 0..q {
            basis[(p + k, k)] = 1.0;
        }
        for k in 0..p {
            basis[(k, q + k)] = 1.0;
        }
        let z = QR::new(basis).q();
        let block_norm = self.t.view((j, j), (s, s)).norm().max(f64::MIN_POSITIVE);
        self.apply_local(j, &z);
        let lower = self.t.view((j + q, j), (p, q)).norm();
        if lower > 1e-10 * block_norm {
            return Err(Error::Numeric(format!(
                "Schur block swap at {j} left residual {lower:e}"
            )));
        }
        self.t.view_mut((j + q, j), (p, q)).fill(0.0);
        for c in j..(j + s) {
            for r in (c + 2)..(j + s) {
                self.t[(r, c)] = 0.0;
            }
        }
        Ok(())
    }
}

/// Solves `A X - X B = C` for blocks of size at most 2 through the Kronecker
/// form.
fn solve_small_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (p, q) = (a.nrows(), b.nrows());
    let n = p * q;
    let mut k = DMatrix::<f64>::zeros(n, n);
    // vec(A X) = (I_q ⊗ A) vec X ; vec(X B) = (Bᵀ ⊗ I_p) vec X
    for col in 0..q {
        for i in 0..p {
            for jj in 0..p {
                k[(col * p + i, col * p + jj)] += a[(i, jj)];
            }
        }
    }
    for col in 0..q {
        for col2 in 0..q {
            let coef = b[(col2, col)];
            if coef != 0.0 {
                for i in 0..p {
                    k[(col * p + i, col2 * p + i)] -= coef;
                }
            }
        }
    }
    let rhs = DVector::from_iterator(n, c.iter().cloned());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Sylvester block: spectra are not disjoint".into()))?;
    Ok(DMatrix::from_iterator(p, q, sol.iter().cloned()))
}

fn quasi_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

/// Solves `A X - X B = C` where `A` and `B` are upper quasi-triangular
/// (as left by the real Schur form) by block back-substitution.
pub fn solve_quasi_triangular_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    if c.nrows() != m || c.ncols() != n {
        return Err(Error::Dimension(format!(
            "Sylvester right-hand side must be {m}x{n}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let mut x = DMatrix::<f64>::zeros(m, n);
    if m == 0 || n == 0 {
        return Ok(x);
    }
    let row_blocks = quasi_blocks(a);
    let col_blocks = quasi_blocks(b);
    for &(cj, cs) in &col_blocks {
        for &(ri, rs) in row_blocks.iter().rev() {
            let mut rhs = c.view((ri, cj), (rs, cs)).into_owned();
            let tail = ri + rs;
            if tail < m {
                rhs -= a.view((ri, tail), (rs, m - tail)) * x.view((tail, cj), (m - tail, cs));
            }
            if cj > 0 {
                rhs += x.view((ri, 0), (rs, cj)) * b.view((0, cj), (cj, cs));
            }
            let akk = a.view((ri, ri), (rs, rs)).into_owned();
            let bll = b.view((cj, cj), (cs, cs)).into_owned();
            let blk = solve_small_sylvester(&akk, &bll, &rhs)?;
            x.view_mut((ri, cj), (rs, cs)).copy_from(&blk);
        }
    }
    Ok(x)
}

/// Matrix power by repeated multiplication (small exponents only).
pub fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}
