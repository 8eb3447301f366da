//! Splits a plant with poles on both sides of the unit circle and prints
//! its two-sided impulse response.
//!
//! `cargo run --example laurent_coefficients`

use ncfir::lti::{decompose, presets, true_theta};

fn main() -> ncfir::Result<()> {
    let model = presets::example1();
    let dec = decompose(&model, model.unit_circle_tol())?;
    println!("stable states {}, anti-stable states {}", dec.n_s(), dec.n_u());
    println!("rho_s = {:.3}, rho(A_u^-1) = {:.3}", dec.rho_s, dec.rho_u_inv);

    let theta = true_theta(&model, 12, 12)?;
    for lag in -12..=12isize {
        let h = theta.coeff(lag).expect("lag inside the block")[(0, 0)];
        println!("H[{lag:>3}] = {h:+.6e}");
    }
    Ok(())
}
