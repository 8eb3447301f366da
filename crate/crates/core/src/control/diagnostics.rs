use nalgebra::DMatrix;
use serde::Serialize;

use super::controller::Controller;
use super::simulate::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::lti::{spectral_radius, transient_amplification, DecomposedRealization, StateSpaceModel};

const TERM_TOL: f64 = 1e-12;
const MAX_TERMS: usize = 10_000_000;

/// Loop from `c` to `f`: `ξ(k+1) = A_cl ξ + B_cl c`, `f = C_f ξ`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c_f: DMatrix<f64>,
}

impl ClosedLoop {
    pub fn new(model: &StateSpaceModel, ctrl: &Controller) -> Result<Self> {
        ctrl.validate(model)?;
        let (n, p) = (model.n(), model.p());
        Ok(match ctrl {
            Controller::Zero => ClosedLoop {
                a: model.a().clone(),
                b: model.b().clone(),
                c_f: DMatrix::zeros(p, n),
            },
            Controller::StateFeedback { k } => ClosedLoop {
                a: model.a() - model.b() * k,
                b: model.b().clone(),
                c_f: -k,
            },
            Controller::OutputFeedback { a: ac, b: bc, c: cc } => {
                let nc = ac.nrows();
                let mut a = DMatrix::zeros(n + nc, n + nc);
                a.view_mut((0, 0), (n, n)).copy_from(model.a());
                a.view_mut((0, n), (n, nc)).copy_from(&(model.b() * cc));
                a.view_mut((n, 0), (nc, n)).copy_from(&(bc * model.c()));
                a.view_mut((n, n), (nc, nc)).copy_from(&(ac + bc * model.d() * cc));
                let mut b = DMatrix::zeros(n + nc, p);
                b.view_mut((0, 0), (n, p)).copy_from(model.b());
                b.view_mut((n, 0), (nc, p)).copy_from(&(bc * model.d()));
                let mut c_f = DMatrix::zeros(p, n + nc);
                c_f.view_mut((0, n), (p, nc)).copy_from(cc);
                ClosedLoop { a, b, c_f }
            }
        })
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    /// `𝒯_s = C_f A_cl^{s−1} B_cl` for `s = 1..=count`.
    pub fn markov(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut g = self.b.clone();
        for _ in 0..count {
            out.push(&self.c_f * &g);
            g = &self.a * g;
        }
        out
    }
}

/// `𝒯_∞ = Σ_{s≥1} ‖𝒯_s‖` truncated at `terms`, with `tail_bound` bounding
/// the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopGain {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Total closed-loop gain from the excitation to the feedback signal.
pub fn t_infinity(model: &StateSpaceModel, ctrl: &Controller) -> Result<LoopGain> {
    if matches!(ctrl, Controller::Zero) {
        ctrl.validate(model)?;
        return Ok(LoopGain { value: 0.0, tail_bound: 0.0, terms: 0 });
    }
    let cl = ClosedLoop::new(model, ctrl)?;
    let rho = cl.spectral_radius()?;
    if rho >= 1.0 {
        return Err(Error::Domain(format!("closed loop is not stable (ρ_cl = {rho:.6})")));
    }
    let n_cl = cl.a.nrows();
    let mut value = 0.0;
    let mut g = cl.b.clone();
    let mut s = 0;
    loop {
        s += 1;
        let term = spectral_norm(&(&cl.c_f * &g));
        value += term;
        g = &cl.a * g;
        if (term < TERM_TOL && s >= n_cl) || s >= MAX_TERMS {
            break;
        }
    }
    // ‖A^τ‖ ≤ Φ ρ^{τ/2}; summing τ ≥ s gives the geometric remainder.
    let tail_bound = if rho == 0.0 || cl.a.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        let phi = transient_amplification(&cl.a).or_else(|e| match e {
            // nilpotent loops have an exactly vanishing tail
            Error::Domain(_) if rho < 1e-8 => Ok(0.0),
            e => Err(e),
        })?;
        spectral_norm(&cl.c_f) * spectral_norm(&cl.b) * phi * rho.powf(s as f64 / 2.0) / (1.0 - rho.sqrt())
    };
    Ok(LoopGain { value, tail_bound, terms: s })
}

/// Empirical `sup_k ‖E[x_s(k) x_s(k)ᵀ]‖` and its anti-stable analog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedLoopMoments {
    pub gamma_s: f64,
    pub gamma_u: f64,
    pub argmax_s: usize,
    pub argmax_u: usize,
    pub trials: usize,
}

/// Averages second moments of the decoupled states over trials, then takes
/// the supremum over time. Trajectories are truncated to the shortest one.
pub fn closed_loop_moments(trajs: &[Trajectory], dec: &DecomposedRealization) -> Result<ClosedLoopMoments> {
    if trajs.is_empty() {
        return Err(Error::Data("no trajectories supplied".into()));
    }
    let mut parts = Vec::with_capacity(trajs.len());
    for t in trajs {
        let truth = t
            .truth
            .as_ref()
            .ok_or_else(|| Error::Data("trajectory lacks ground-truth states".into()))?;
        if truth.x.nrows() != dec.n() {
            return Err(Error::Dimension("state dimension differs from the decomposition".into()));
        }
        parts.push(dec.split_states(&truth.x));
    }
    let len = parts.iter().map(|(s, _)| s.ncols()).min().unwrap_or(0);
    let trials = parts.len() as f64;
    let sup = |pick: &dyn Fn(&(DMatrix<f64>, DMatrix<f64>)) -> &DMatrix<f64>, dim: usize| {
        let mut best = (0.0, 0usize);
        if dim == 0 {
            return best;
        }
        for k in 0..len {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for part in &parts {
                let col = pick(part).column(k);
                m += &col * col.transpose();
            }
            let val = spectral_norm(&(m / trials));
            if val > best.0 {
                best = (val, k);
            }
        }
        best
    };
    let (gamma_s, argmax_s) = sup(&|p| &p.0, dec.n_s());
    let (gamma_u, argmax_u) = sup(&|p| &p.1, dec.n_u());
    Ok(ClosedLoopMoments { gamma_s, gamma_u, argmax_s, argmax_u, trials: parts.len() })
}

/// Conditioning summary of a controller on a plant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerDiagnostics {
    pub rho_cl: f64,
    pub t_infinity: f64,
    pub t_infinity_tail_bound: f64,
    pub gamma_cl_s: Option<f64>,
    pub gamma_cl_u: Option<f64>,
}

/// Spectral radius and loop gain, plus state moments when trajectories are given.
pub fn controller_diagnostics(
    model: &StateSpaceModel,
    dec: &DecomposedRealization,
    ctrl: &Controller,
    trajs: &[Trajectory],
) -> Result<ControllerDiagnostics> {
    let rho_cl = ClosedLoop::new(model, ctrl)?.spectral_radius()?;
    let gain = t_infinity(model, ctrl)?;
    let moments = if trajs.is_empty() { None } else { Some(closed_loop_moments(trajs, dec)?) };
    Ok(ControllerDiagnostics {
        rho_cl,
        t_infinity: gain.value,
        t_infinity_tail_bound: gain.tail_bound,
        gamma_cl_s: moments.map(|m| m.gamma_s),
        gamma_cl_u: moments.map(|m| m.gamma_u),
    })
}
