//! Stabilizes an open-loop unstable plant, simulates one excited
//! trajectory and reports how much the loop amplifies the excitation.
//!
//! `cargo run --example closed_loop_simulation`

use nalgebra::DMatrix;
use ncfir::control::{design_lqr, simulate_closed_loop, t_infinity, ClosedLoop, NoiseSpec};
use ncfir::lti::presets;

fn main() -> ncfir::Result<()> {
    let model = presets::example4();
    let ctrl = design_lqr(&model, &DMatrix::identity(model.n(), model.n()), &DMatrix::identity(1, 1))?;
    let rho_cl = ClosedLoop::new(&model, &ctrl)?.spectral_radius()?;
    let gain = t_infinity(&model, &ctrl)?;
    println!("closed-loop spectral radius {rho_cl:.4}");
    println!("T_inf = {:.3} ({} terms, tail <= {:.1e})", gain.value, gain.terms, gain.tail_bound);

    let traj = simulate_closed_loop(&model, &ctrl, &NoiseSpec::new(1.0, 0.0, 0.05, 7)?, 2000)?;
    let rms = |m: &DMatrix<f64>| (m.norm_squared() / m.len() as f64).sqrt();
    println!("{} samples: rms(u) = {:.3}, rms(y) = {:.3}", traj.len(), rms(&traj.u), rms(&traj.y));
    traj.write_csv(std::io::sink(), true)?;
    Ok(())
}
