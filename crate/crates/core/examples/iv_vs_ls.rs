//! Closed-loop feedback correlates the input with the disturbance, so least
//! squares is biased while the excitation-instrumented estimate is not.
//! The plant is stable and the disturbance enters through the input.
//!
//! `cargo run --release --example iv_vs_ls`

use nalgebra::DMatrix;
use num_complex::Complex64;
use ncfir::control::{design_pole_placement, simulate_closed_loop, NoiseSpec};
use ncfir::estimation::{batch_iv, batch_ls, build_matrices, RegressorConfig};
use ncfir::linalg::spectral_norm;
use ncfir::lti::{presets, true_theta};

fn main() -> ncfir::Result<()> {
    let base = presets::stable_siso();
    let model = base.with_bw(base.b().clone())?;
    let poles = [0.7, 0.6, -0.5].map(|p| Complex64::new(p, 0.0));
    let ctrl = design_pole_placement(&model, &poles)?;
    let (r, d) = (15, 5);
    let theta: DMatrix<f64> = true_theta(&model, r, d)?.theta();

    println!("{:>6} {:>10} {:>10}", "N", "IV", "LS");
    for n in [1000, 4000, 16000] {
        let noise = NoiseSpec::new(1.0, 1.0, 0.1, 11)?;
        let traj = simulate_closed_loop(&model, &ctrl, &noise, n + r + d)?;
        let dm = build_matrices(&traj, &RegressorConfig::fit(r, d, &traj)?, false)?;
        let e_iv = spectral_norm(&(batch_iv(&dm)? - &theta));
        let e_ls = spectral_norm(&(batch_ls(&dm)? - &theta));
        println!("{n:>6} {e_iv:>10.4} {e_ls:>10.4}");
    }
    Ok(())
}
