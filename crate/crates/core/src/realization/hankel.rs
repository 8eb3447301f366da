use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::linalg::{min_singular_value, spectral_norm};

/// Minimum ratio between consecutive Hankel singular values accepted by the
/// automatic order rule.
pub const GAP_RATIO: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Fixed(usize),
    /// Largest singular-value gap, provided it exceeds [`GAP_RATIO`].
    Auto,
}

impl std::str::FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Order::Auto);
        }
        s.parse()
            .map(Order::Fixed)
            .map_err(|_| Error::Config(format!("order must be a nonnegative integer or `auto`, got `{s}`")))
    }
}

/// Block dimensions of the Hankel matrix and the target order. Unset
/// dimensions default to `floor(K/2)` for `K` available coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelSpec {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub order: Order,
}

impl HankelSpec {
    pub fn auto() -> Self {
        Self { rows: None, cols: None, order: Order::Auto }
    }
    pub fn with_order(n: usize) -> Self {
        Self { rows: None, cols: None, order: Order::Fixed(n) }
    }
}

/// One half of a realization, `(A, B, C)`, with the Hankel singular values
/// it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub hankel_singular_values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl Realization {
    pub fn empty(m: usize, p: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, p),
            c: DMatrix::zeros(m, 0),
            hankel_singular_values: Vec::new(),
            rows: 0,
            cols: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C A^{i−1} B` for `i = 1..=count`.
    pub fn markov(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut g = self.b.clone();
        for _ in 0..count {
            out.push(&self.c * &g);
            g = &self.a * g;
        }
        out
    }
}

fn select_order(sv: &[f64]) -> Result<usize> {
    if sv.is_empty() || sv[0] == 0.0 {
        return Ok(0);
    }
    // values under the roundoff floor are indistinguishable from zero
    let floor = sv[0] * f64::EPSILON * sv.len() as f64;
    let clamped: Vec<f64> = sv.iter().map(|&s| s.max(floor)).collect();
    let mut best = (0.0, 0usize);
    for i in 0..sv.len() - 1 {
        let ratio = clamped[i] / clamped[i + 1];
        if ratio > best.0 {
            best = (ratio, i + 1);
        }
    }
    if best.0 < GAP_RATIO {
        return Err(Error::Rank(format!(
            "no singular-value gap of at least {GAP_RATIO:e} (largest ratio {:.3e}); specify the order. singular values: {}",
            best.0,
            format_sv(sv)
        )));
    }
    Ok(best.1)
}

fn format_sv(sv: &[f64]) -> String {
    sv.iter().take(12).map(|s| format!("{s:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Balanced Ho-Kalman realization of `M_i = C A^{i−1} B`, `i = 1..K`.
pub fn ho_kalman(coeffs: &[DMatrix<f64>], spec: &HankelSpec) -> Result<Realization> {
    let k = coeffs.len();
    let (m, p) = coeffs.first().map_or((0, 0), |c| c.shape());
    if coeffs.iter().any(|c| c.shape() != (m, p)) {
        return Err(Error::Dimension("coefficient blocks differ in shape".into()));
    }
    if coeffs.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("coefficients must be finite".into()));
    }
    if k == 0 || coeffs.iter().all(|c| c.iter().all(|&v| v == 0.0)) {
        return match spec.order {
            Order::Auto | Order::Fixed(0) => Ok(Realization::empty(m, p)),
            Order::Fixed(n) => Err(Error::Rank(format!("order {n} requested but every coefficient is zero"))),
        };
    }
    let rows = spec.rows.unwrap_or(k / 2);
    let cols = spec.cols.unwrap_or(k / 2);
    if rows == 0 || cols == 0 || rows + cols > k {
        return Err(Error::Range(format!(
            "Hankel blocks {rows}x{cols} need at least {} coefficients, have {k}",
            (rows + cols).max(2)
        )));
    }
    let mut h = DMatrix::zeros(rows * m, cols * p);
    let mut h_up = DMatrix::zeros(rows * m, cols * p);
    for i in 0..rows {
        for j in 0..cols {
            h.view_mut((i * m, j * p), (m, p)).copy_from(&coeffs[i + j]);
            h_up.view_mut((i * m, j * p), (m, p)).copy_from(&coeffs[i + j + 1]);
        }
    }
    let svd = SVD::new(h, true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    // nalgebra returns singular values unsorted; order them with their vectors.
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let n = match spec.order {
        Order::Fixed(n) => n,
        Order::Auto => select_order(&sv)?,
    };
    if n > (rows * m).min(cols * p) {
        return Err(Error::Rank(format!(
            "order {n} exceeds the Hankel rank bound {}",
            (rows * m).min(cols * p)
        )));
    }
    if n == 0 {
        return Ok(Realization { hankel_singular_values: sv, rows, cols, ..Realization::empty(m, p) });
    }
    if !(sv[n - 1] > 1e-13 * sv[0]) {
        return Err(Error::Rank(format!(
            "order {n} exceeds the numerical rank of the Hankel matrix; singular values: {}",
            format_sv(&sv)
        )));
    }
    let mut un = DMatrix::zeros(rows * m, n);
    let mut vn = DMatrix::zeros(cols * p, n);
    let mut s_half = DMatrix::zeros(n, n);
    let mut s_ihalf = DMatrix::zeros(n, n);
    for (t, &i) in idx.iter().take(n).enumerate() {
        un.set_column(t, &u.column(i));
        vn.set_column(t, &vt.row(i).transpose());
        s_half[(t, t)] = sv[t].sqrt();
        s_ihalf[(t, t)] = 1.0 / sv[t].sqrt();
    }
    let obs = &un * &s_half;
    let ctrb = &s_half * vn.transpose();
    let a = &s_ihalf * un.transpose() * h_up * &vn * &s_ihalf;
    Ok(Realization {
        a,
        b: ctrb.columns(0, p).into_owned(),
        c: obs.rows(0, m).into_owned(),
        hankel_singular_values: sv,
        rows,
        cols,
    })
}

/// Stable half from `H_1 … H_r`.
pub fn ho_kalman_causal(coeffs: &[DMatrix<f64>], spec: &HankelSpec) -> Result<Realization> {
    ho_kalman(coeffs, spec)
}

/// Anti-stable half from `H_{-1} … H_{-d}`.
///
/// With `M_j = −H_{-j} = C_u A_u^{-j-1} B_u` realized as `C_r A_r^{j−1} B_r`,
/// `A_r` plays `A_u⁻¹`, `B_r = A_u⁻¹ B_u` and `C_r = C_u A_u⁻¹`, hence
/// `Â_u = A_r⁻¹`, `B̂_u = Â_u B_r`, `Ĉ_u = C_r Â_u`.
pub fn ho_kalman_noncausal(coeffs: &[DMatrix<f64>], spec: &HankelSpec) -> Result<Realization> {
    let flipped: Vec<DMatrix<f64>> = coeffs.iter().map(|h| -h).collect();
    let rev = ho_kalman(&flipped, spec)?;
    if rev.order() == 0 {
        return Ok(rev);
    }
    let scale = spectral_norm(&rev.a).max(1.0);
    if !(min_singular_value(&rev.a) > 1e-12 * scale) {
        return Err(Error::Numeric(
            "reverse-time state matrix is singular; the anti-stable half cannot be realized".into(),
        ));
    }
    let a_u = rev.a.clone().try_inverse().ok_or_else(|| {
        Error::Numeric("reverse-time state matrix is singular; the anti-stable half cannot be realized".into())
    })?;
    let b_u = &a_u * &rev.b;
    let c_u = &rev.c * &a_u;
    Ok(Realization { a: a_u, b: b_u, c: c_u, ..rev })
}
