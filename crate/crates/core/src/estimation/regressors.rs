use nalgebra::{DMatrix, DVector};

use crate::control::Trajectory;
use crate::error::{Error, Result};

/// Horizons and sizes of a non-causal FIR regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressorConfig {
    pub r: usize,
    pub d: usize,
    pub p: usize,
    pub m: usize,
    /// Number of regression columns `N`.
    pub n: usize,
}

impl RegressorConfig {
    pub fn new(r: usize, d: usize, p: usize, m: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Range("N must be at least 1".into()));
        }
        if p == 0 || m == 0 {
            return Err(Error::Dimension("input and output dimensions must be positive".into()));
        }
        Ok(Self { r, d, p, m, n })
    }

    /// Uses every usable output index of the trajectory.
    pub fn fit(r: usize, d: usize, traj: &Trajectory) -> Result<Self> {
        let len = traj.len();
        if len < r + d + 1 {
            return Err(Error::Range(format!(
                "trajectory of length {len} is too short for r = {r}, d = {d}"
            )));
        }
        Self::new(r, d, traj.p(), traj.m(), len - r - d)
    }

    pub fn mu(&self) -> usize {
        self.r + self.d + 1
    }

    /// Last sample index `ℓ = N + r + d − 1`; the trajectory needs `ℓ + 1` samples.
    pub fn ell(&self) -> usize {
        self.n + self.r + self.d - 1
    }

    /// Output indices `k = r, …, ℓ − d`.
    pub fn output_indices(&self) -> std::ops::RangeInclusive<usize> {
        self.r..=self.ell() - self.d
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        Self::new(self.r, self.d, self.p, self.m, n)
    }
}

/// Stacks `[s(k+d); s(k+d−1); …; s(k−r)]` from a signal whose columns are samples.
pub fn stack_regressor(signal: &DMatrix<f64>, k: usize, r: usize, d: usize) -> DVector<f64> {
    let p = signal.nrows();
    let mu = r + d + 1;
    let mut out = DVector::zeros(p * mu);
    for i in 0..mu {
        out.rows_mut(i * p, p).copy_from(&signal.column(k + d - i));
    }
    out
}

fn stacked(signal: &DMatrix<f64>, cfg: &RegressorConfig) -> DMatrix<f64> {
    let p = signal.nrows();
    let mu = cfg.mu();
    let mut out = DMatrix::zeros(p * mu, cfg.n);
    for j in 0..cfg.n {
        let k = cfg.r + j;
        for i in 0..mu {
            out.view_mut((i * p, j), (p, 1)).copy_from(&signal.column(k + cfg.d - i));
        }
    }
    out
}

/// Data matrices of one regression. Column `j` belongs to output index `k = r + j`.
#[derive(Debug, Clone)]
pub struct DataMatrices {
    pub cfg: RegressorConfig,
    pub psi_y: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub phi_c: Option<DMatrix<f64>>,
    pub phi_f: Option<DMatrix<f64>>,
}

impl DataMatrices {
    /// Attaches a recorded feedback signal `f` as `Φ_f`.
    pub fn with_feedback(mut self, f: &DMatrix<f64>) -> Result<Self> {
        if f.nrows() != self.cfg.p || f.ncols() < self.cfg.ell() + 1 {
            return Err(Error::Dimension(format!(
                "feedback record is {}x{}, expected {} rows and at least {} samples",
                f.nrows(),
                f.ncols(),
                self.cfg.p,
                self.cfg.ell() + 1
            )));
        }
        self.phi_f = Some(stacked(f, &self.cfg));
        Ok(self)
    }

    pub fn instrument(&self) -> Result<&DMatrix<f64>> {
        self.phi_c
            .as_ref()
            .ok_or_else(|| Error::Data("excitation channel c is required for IV estimation".into()))
    }
}

/// Builds `Ψ_y`, `Φ`, `Φ_c` and, on request, `Φ_f` from a trajectory.
pub fn build_matrices(traj: &Trajectory, cfg: &RegressorConfig, include_ground_truth: bool) -> Result<DataMatrices> {
    if traj.p() != cfg.p || traj.m() != cfg.m {
        return Err(Error::Dimension(format!(
            "trajectory has p = {}, m = {}; configuration expects p = {}, m = {}",
            traj.p(),
            traj.m(),
            cfg.p,
            cfg.m
        )));
    }
    if traj.len() < cfg.ell() + 1 {
        return Err(Error::Range(format!(
            "trajectory of length {} is shorter than ℓ + 1 = {}",
            traj.len(),
            cfg.ell() + 1
        )));
    }
    let psi_y = traj.y.columns(cfg.r, cfg.n).into_owned();
    let phi = stacked(&traj.u, cfg);
    let phi_c = traj.c.as_ref().map(|c| stacked(c, cfg));
    let phi_f = if include_ground_truth {
        let truth = traj
            .truth
            .as_ref()
            .ok_or_else(|| Error::Data("ground-truth channels were requested but not recorded".into()))?;
        Some(stacked(&truth.f, cfg))
    } else {
        None
    };
    Ok(DataMatrices { cfg: *cfg, psi_y, phi, phi_c, phi_f })
}

/// Second-moment accumulators `ΦΦᵀ`, `ΦΦ_cᵀ`, `Ψ_yΦᵀ`, `Ψ_yΦ_cᵀ` built one
/// column at a time, so memory stays `O((pμ)²)` regardless of `N`.
#[derive(Debug, Clone)]
pub struct CrossMoments {
    pub cfg: RegressorConfig,
    pub gram: DMatrix<f64>,
    pub cross: Option<DMatrix<f64>>,
    pub y_phi: DMatrix<f64>,
    pub y_phi_c: Option<DMatrix<f64>>,
}

impl CrossMoments {
    pub fn from_trajectory(traj: &Trajectory, cfg: &RegressorConfig) -> Result<Self> {
        if traj.len() < cfg.ell() + 1 || traj.p() != cfg.p || traj.m() != cfg.m {
            return Err(Error::Range("trajectory does not cover the regression window".into()));
        }
        let q = cfg.p * cfg.mu();
        let mut gram = DMatrix::zeros(q, q);
        let mut y_phi = DMatrix::zeros(cfg.m, q);
        let mut cross = traj.c.as_ref().map(|_| DMatrix::zeros(q, q));
        let mut y_phi_c = traj.c.as_ref().map(|_| DMatrix::zeros(cfg.m, q));
        for k in cfg.output_indices() {
            let phi = stack_regressor(&traj.u, k, cfg.r, cfg.d);
            let y = traj.y.column(k);
            gram.ger(1.0, &phi, &phi, 1.0);
            y_phi.ger(1.0, &y, &phi, 1.0);
            if let (Some(c), Some(cr), Some(yc)) = (&traj.c, cross.as_mut(), y_phi_c.as_mut()) {
                let z = stack_regressor(c, k, cfg.r, cfg.d);
                cr.ger(1.0, &phi, &z, 1.0);
                yc.ger(1.0, &y, &z, 1.0);
            }
        }
        Ok(Self { cfg: *cfg, gram, cross, y_phi, y_phi_c })
    }
}
