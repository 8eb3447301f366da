//! Recovers a state-space model from exact Laurent coefficients, realizing
//! the causal and anti-causal halves separately.
//!
//! `cargo run --example realization`

use ncfir::lti::{presets, true_theta};
use ncfir::realization::{frequency_grid, frequency_response, magnitude_db, reconstruct, HankelSpec};

fn main() -> ncfir::Result<()> {
    let model = presets::example1();
    let theta = true_theta(&model, 25, 25)?;
    let rec = reconstruct(&theta, &HankelSpec::auto(), &HankelSpec::auto())?;
    println!("orders: stable {}, anti-stable {}", rec.stable.order(), rec.unstable.order());
    let mut poles = rec.poles()?;
    poles.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    for p in poles {
        println!("pole {:+.4} {:+.4}j  |p| = {:.4}", p.re, p.im, p.norm());
    }
    let grid = frequency_grid(5);
    let (g, gh) = (frequency_response(&model, &grid)?, frequency_response(&rec, &grid)?);
    for ((w, a), b) in grid.iter().zip(&g.values).zip(&gh.values) {
        println!("omega {w:.3}: true {:+.3} dB, realized {:+.3} dB", magnitude_db(a[(0, 0)]), magnitude_db(b[(0, 0)]));
    }
    Ok(())
}
