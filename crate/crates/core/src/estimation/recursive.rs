use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::regressors::RegressorConfig;
use crate::control::Trajectory;
use crate::error::{Error, Result};

/// Denominators at or below this magnitude skip the IV update.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ls,
    Iv,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(Mode::Ls),
            "iv" => Ok(Mode::Iv),
            other => Err(Error::Config(format!("unknown estimator `{other}` (expected ls or iv)"))),
        }
    }
}

/// `P₀ = η⁻¹ I` scale for IV: `10⁻⁴ σ_c²`.
pub fn default_eta_iv(sigma_c: f64) -> f64 {
    1e-4 * sigma_c * sigma_c
}

/// `P₀ = η⁻¹ I` scale for LS: `10⁻⁸ (1 + ‖φ‖²)` on a representative regressor.
pub fn default_eta_ls(phi: &DVector<f64>) -> f64 {
    1e-8 * (1.0 + phi.norm_squared())
}

/// Recursive LS/IV estimator state. With `λ_f = 1`, `P⁻¹` equals
/// `η I + Σ φφᵀ` (LS) or `η I + Σ φzᵀ` (IV).
#[derive(Debug, Clone)]
pub struct RecursiveState {
    pub theta: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub lambda_f: f64,
    pub eta: f64,
    pub samples_seen: usize,
    pub skipped: usize,
}

/// Outcome of one IV step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Updated,
    Skipped { denominator: f64 },
}

fn ensure_finite_vec(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Data(format!("{what} contains non-finite entries")))
    }
}

impl RecursiveState {
    pub fn new(m: usize, q: usize, lambda_f: f64, eta: f64) -> Result<Self> {
        if !(lambda_f > 0.0 && lambda_f <= 1.0) {
            return Err(Error::Domain(format!("forgetting factor must lie in (0, 1], got {lambda_f}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Domain(format!("η must be positive and finite, got {eta}")));
        }
        Ok(Self {
            theta: DMatrix::zeros(m, q),
            p: DMatrix::identity(q, q) / eta,
            lambda_f,
            eta,
            samples_seen: 0,
            skipped: 0,
        })
    }

    /// `g = Pφ/(λ_f + φᵀPφ)`, `θ ← θ + (y − θφ)gᵀ`, `P ← (P − gφᵀP)/λ_f`.
    pub fn rls_step(&mut self, phi: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        ensure_finite_vec(phi, "regressor")?;
        ensure_finite_vec(y, "output")?;
        let p_phi = &self.p * phi;
        let den = self.lambda_f + phi.dot(&p_phi);
        let g = &p_phi / den;
        let innov = y - &self.theta * phi;
        self.theta.ger(1.0, &innov, &g, 1.0);
        // φᵀP = (Pᵀφ)ᵀ; P stays symmetric in exact arithmetic.
        let phi_t_p = self.p.tr_mul(phi);
        self.p.ger(-1.0, &g, &phi_t_p, 1.0);
        if self.lambda_f != 1.0 {
            self.p /= self.lambda_f;
        }
        self.samples_seen += 1;
        Ok(())
    }

    /// `den = λ_f + zᵀPφ`, `g = Pφ/den`, `hᵀ = zᵀP/den`,
    /// `θ ← θ + (y − θφ)hᵀ`, `P ← (P − g zᵀP)/λ_f`.
    pub fn riv_step(&mut self, phi: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Result<Step> {
        ensure_finite_vec(phi, "regressor")?;
        ensure_finite_vec(z, "instrument")?;
        ensure_finite_vec(y, "output")?;
        let p_phi = &self.p * phi;
        let den = self.lambda_f + z.dot(&p_phi);
        self.samples_seen += 1;
        if den.abs() <= DENOMINATOR_GUARD {
            self.skipped += 1;
            log::warn!(
                "recursive IV update skipped at sample {}: denominator {den:e}",
                self.samples_seen
            );
            return Ok(Step::Skipped { denominator: den });
        }
        let zt_p = self.p.tr_mul(z);
        let innov = y - &self.theta * phi;
        self.theta.ger(1.0 / den, &innov, &zt_p, 1.0);
        self.p.ger(-1.0 / den, &p_phi, &zt_p, 1.0);
        if self.lambda_f != 1.0 {
            self.p /= self.lambda_f;
        }
        Ok(Step::Updated)
    }
}

/// A skipped IV update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipEvent {
    pub k: usize,
    pub denominator: f64,
}

/// Update for output index `k`, fired when sample `arrival` came in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Firing {
    pub k: usize,
    pub arrival: usize,
}

/// Online estimator fed one sample at a time. The update for output index
/// `k` needs `u(k+d)`, so it fires exactly when sample `k + d` arrives.
#[derive(Debug, Clone)]
pub struct StreamingEstimator {
    pub state: RecursiveState,
    pub mode: Mode,
    r: usize,
    d: usize,
    window: VecDeque<(DVector<f64>, DVector<f64>, Option<DVector<f64>>)>,
    arrivals: usize,
    pub firings: Vec<Firing>,
    pub skips: Vec<SkipEvent>,
}

impl StreamingEstimator {
    pub fn new(state: RecursiveState, mode: Mode, r: usize, d: usize) -> Self {
        Self {
            state,
            mode,
            r,
            d,
            window: VecDeque::with_capacity(r + d + 2),
            arrivals: 0,
            firings: Vec::new(),
            skips: Vec::new(),
        }
    }

    /// Feeds sample `t = arrivals`; returns the output index updated, if any.
    pub fn push(&mut self, u: DVector<f64>, y: DVector<f64>, c: Option<DVector<f64>>) -> Result<Option<usize>> {
        if self.mode == Mode::Iv && c.is_none() {
            return Err(Error::Data("IV mode needs the excitation c at every sample".into()));
        }
        let t = self.arrivals;
        self.arrivals += 1;
        let mu = self.r + self.d + 1;
        self.window.push_back((u, y, c));
        if self.window.len() > mu {
            self.window.pop_front();
        }
        if self.window.len() < mu {
            return Ok(None);
        }
        let k = t - self.d;
        let p = self.window[0].0.len();
        let mut phi = DVector::zeros(p * mu);
        // newest sample u(k+d) goes first
        for (i, (u, _, _)) in self.window.iter().rev().enumerate() {
            phi.rows_mut(i * p, p).copy_from(u);
        }
        let y = self.window[self.r].1.clone();
        match self.mode {
            Mode::Ls => self.state.rls_step(&phi, &y)?,
            Mode::Iv => {
                let mut z = DVector::zeros(p * mu);
                for (i, (_, _, c)) in self.window.iter().rev().enumerate() {
                    z.rows_mut(i * p, p).copy_from(c.as_ref().expect("checked above"));
                }
                if let Step::Skipped { denominator } = self.state.riv_step(&phi, &z, &y)? {
                    self.skips.push(SkipEvent { k, denominator });
                }
            }
        }
        self.firings.push(Firing { k, arrival: t });
        Ok(Some(k))
    }
}

/// Snapshot after `updates` regression updates.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub updates: usize,
    pub theta: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct RecursiveRun {
    pub theta: DMatrix<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub firings: Vec<Firing>,
    pub skips: Vec<SkipEvent>,
    pub eta: f64,
}

/// Streams the first `ℓ + 1` samples of a trajectory through the recursion.
/// `eta = None` picks the default scale (IV uses the empirical `σ_c²`).
/// Snapshots are taken after each update count listed in `checkpoints`.
pub fn run_recursive(
    traj: &Trajectory,
    cfg: &RegressorConfig,
    mode: Mode,
    lambda_f: f64,
    eta: Option<f64>,
    checkpoints: &[usize],
) -> Result<RecursiveRun> {
    let len = cfg.ell() + 1;
    if traj.len() < len {
        return Err(Error::Range(format!("trajectory of length {} is shorter than ℓ + 1 = {len}", traj.len())));
    }
    if mode == Mode::Iv && traj.c.is_none() {
        return Err(Error::Data("excitation channel c is required for IV estimation".into()));
    }
    let eta = match eta {
        Some(e) => e,
        None => match (&traj.c, mode) {
            (Some(c), Mode::Iv) => {
                let win = c.columns(0, len);
                default_eta_iv((win.norm_squared() / win.len() as f64).sqrt())
            }
            _ => default_eta_ls(&super::regressors::stack_regressor(&traj.u, cfg.r, cfg.r, cfg.d)),
        },
    };
    let state = RecursiveState::new(cfg.m, cfg.p * cfg.mu(), lambda_f, eta)?;
    let mut est = StreamingEstimator::new(state, mode, cfg.r, cfg.d);
    let mut marks: Vec<usize> = checkpoints.to_vec();
    marks.sort_unstable();
    let mut next = marks.iter().peekable();
    let mut snaps = Vec::new();
    let mut updates = 0;
    for t in 0..len {
        let c = traj.c.as_ref().map(|c| c.column(t).into_owned());
        if est.push(traj.u.column(t).into_owned(), traj.y.column(t).into_owned(), c)?.is_some() {
            updates += 1;
            while next.peek().is_some_and(|&&m| m == updates) {
                snaps.push(Checkpoint { updates, theta: est.state.theta.clone() });
                next.next();
            }
        }
    }
    Ok(RecursiveRun {
        theta: est.state.theta,
        checkpoints: snaps,
        firings: est.firings,
        skips: est.skips,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_scalar_sample() {
        let mut s = RecursiveState::new(1, 1, 1.0, 1e-12).unwrap();
        s.rls_step(&DVector::from_element(1, 2.0), &DVector::from_element(1, 6.0)).unwrap();
        assert_relative_eq!(s.theta[(0, 0)], 3.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_innovation_keeps_estimate() {
        let mut s = RecursiveState::new(1, 2, 1.0, 1.0).unwrap();
        s.theta = DMatrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let phi = DVector::from_vec(vec![2.0, 1.0]);
        let y = &s.theta * &phi;
        s.rls_step(&phi, &y).unwrap();
        assert_eq!(s.theta, DMatrix::from_row_slice(1, 2, &[0.5, -1.0]));
    }

    #[test]
    fn guard_skips_and_counts() {
        // λ_f + zᵀPφ = 1 − 1 = 0 with P = I.
        let mut s = RecursiveState::new(1, 2, 1.0, 1.0).unwrap();
        let phi = DVector::from_vec(vec![1.0, 0.0]);
        let z = DVector::from_vec(vec![-1.0, 0.0]);
        let out = s.riv_step(&phi, &z, &DVector::from_element(1, 1.0)).unwrap();
        assert!(matches!(out, Step::Skipped { .. }));
        assert_eq!(s.skipped, 1);
        assert_eq!(s.theta, DMatrix::zeros(1, 2));
        assert_eq!(s.p, DMatrix::identity(2, 2));
        // z ⟂ Pφ leaves the denominator at λ_f and the update proceeds
        let z = DVector::from_vec(vec![0.0, 1.0]);
        let out = s.riv_step(&phi, &z, &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(out, Step::Updated);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut s = RecursiveState::new(1, 1, 1.0, 1.0).unwrap();
        let bad = DVector::from_element(1, f64::NAN);
        assert!(matches!(s.rls_step(&bad, &DVector::from_element(1, 1.0)), Err(Error::Data(_))));
    }

    #[test]
    fn d_delay_contract() {
        let (r, d) = (2, 3);
        let state = RecursiveState::new(1, 6, 1.0, 1.0).unwrap();
        let mut est = StreamingEstimator::new(state, Mode::Ls, r, d);
        for t in 0..20 {
            let fired = est
                .push(DVector::from_element(1, t as f64), DVector::from_element(1, 0.0), None)
                .unwrap();
            if t < r + d {
                assert_eq!(fired, None);
            } else {
                assert_eq!(fired, Some(t - d));
            }
        }
        assert!(est.firings.iter().all(|f| f.arrival == f.k + d));
    }
}
