//! Fills the bound inputs from a plant and evaluates the high-probability
//! error bound over a range of sample sizes.
//!
//! `cargo run --example error_bound`

use ncfir::bounds::{bound_vs_n, corollary_horizons, BoundInputs};
use ncfir::lti::{decompose, presets};

fn main() -> ncfir::Result<()> {
    let model = presets::example4();
    let dec = decompose(&model, model.unit_circle_tol())?;
    let (r, d) = corollary_horizons(dec.rho_s, dec.rho_u_inv, 10_000, 1e-3)?;
    println!("horizons for N = 10000: r = {r}, d = {d}");

    let mut inp = BoundInputs::from_system(&dec, r, d)?;
    inp.gamma_cl = 6.0;
    inp.gamma_cl_s = 3.0;
    inp.gamma_cl_u = 3.0;
    inp.sigma_c = 1.0;
    inp.sigma_v = 0.1;
    inp.delta = 0.05;
    inp.lambda_iv = 0.1;
    for rep in bound_vs_n(&inp, &[1_000, 10_000, 100_000, 1_000_000])? {
        println!(
            "N = {:>8}: bound {:.4e}, sample-size condition {}",
            rep.inputs.n, rep.bound_value, if rep.sample_size_satisfied { "met" } else { "not met" }
        );
    }
    Ok(())
}
