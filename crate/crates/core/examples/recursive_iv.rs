//! Runs the recursive IV update over a trajectory and compares it with the
//! batch estimate computed from the same samples.
//!
//! `cargo run --release --example recursive_iv`

use nalgebra::DMatrix;
use ncfir::control::{design_lqr, simulate_closed_loop, NoiseSpec};
use ncfir::estimation::{batch_iv, build_matrices, run_recursive, Mode, RegressorConfig};
use ncfir::linalg::spectral_norm;
use ncfir::lti::presets;

fn main() -> ncfir::Result<()> {
    let model = presets::example4();
    let ctrl = design_lqr(&model, &DMatrix::identity(3, 3), &DMatrix::identity(1, 1))?;
    let (r, d) = (10, 20);
    let traj = simulate_closed_loop(&model, &ctrl, &NoiseSpec::new(1.0, 0.0, 0.1, 3)?, 2000 + r + d)?;
    let cfg = RegressorConfig::fit(r, d, &traj)?;

    let batch = batch_iv(&build_matrices(&traj, &cfg, false)?)?;
    let run = run_recursive(&traj, &cfg, Mode::Iv, 1.0, Some(1e-4), &[250, 500, 1000])?;
    for cp in &run.checkpoints {
        println!("after {:>5} updates: |theta_k - theta_batch| = {:.3e}", cp.updates, spectral_norm(&(&cp.theta - &batch)));
    }
    let rel = spectral_norm(&(&run.theta - &batch)) / spectral_norm(&batch);
    println!("final relative gap {rel:.2e} over {} updates ({} skipped)", run.firings.len(), run.skips.len());
    Ok(())
}
