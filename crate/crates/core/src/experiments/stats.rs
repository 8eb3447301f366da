use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Bootstrap replicates used by [`fit_rate`].
pub const BOOTSTRAP_REPS: usize = 1000;

/// Linear-interpolation quantile of unsorted data, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Log-log slope with a percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

fn ols(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares slope of `log value` against `log N`. The interval
/// resamples points within each `N` (i.e. over trials), so a single point
/// per `N` gives a degenerate interval at the slope itself.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::Data(format!("a rate fit needs at least 4 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*v > 0.0 && v.is_finite()) || *n == 0) {
        return Err(Error::Data(format!("rate fit needs positive finite values, got {v} at N = {n}")));
    }
    let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
    for &(n, v) in points {
        match groups.iter_mut().find(|g| g.0 == n) {
            Some(g) => g.1.push(v.ln()),
            None => groups.push((n, vec![v.ln()])),
        }
    }
    if groups.len() < 2 {
        return Err(Error::Data("rate fit needs at least two distinct N".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect();
    let (slope, intercept) = ols(&logs);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_REPS);
    let mut sample = Vec::with_capacity(points.len());
    for _ in 0..BOOTSTRAP_REPS {
        sample.clear();
        for (n, vals) in &groups {
            let x = (*n as f64).ln();
            for _ in 0..vals.len() {
                sample.push((x, vals[rng.random_range(0..vals.len())]));
            }
        }
        slopes.push(ols(&sample).0);
    }
    Ok(RateFit {
        slope,
        intercept,
        ci_low: quantile(&slopes, 0.025),
        ci_high: quantile(&slopes, 0.975),
        points: points.len(),
    })
}

/// Average ranks (1-based), ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation, the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data("spearman needs two equally long samples of size ≥ 2".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("spearman needs finite values".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Data("spearman is undefined for a constant sample".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}
