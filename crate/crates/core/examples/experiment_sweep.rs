//! Runs a small Monte-Carlo controller sweep in memory and fits the decay
//! rate of the estimation error for each controller.
//!
//! `cargo run --release --example experiment_sweep`

use ncfir::experiments::{fit_rate, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
experiment = "controller_sweep"
plant = "example4"
snr = [20.0]
n_grid = [200, 400, 800, 1600]
r = 10
d = 10
trials = 5
estimators = ["iv"]

[sweep]
count = 3
ratios = [0.9, 0.8]
"#;

fn main() -> ncfir::Result<()> {
    let cfg = ExperimentConfig::parse(CONFIG, false, &[])?;
    let table = run_experiment(&cfg)?;
    for cell in table.cells() {
        for est in table.estimators() {
            let pts: Vec<(usize, f64)> = cfg
                .n_grid
                .iter()
                .flat_map(|&n| table.errors_at(&cell, est, n).into_iter().map(move |e| (n, e)))
                .collect();
            let t_inf = table.rows.iter().find(|r| r.cell == cell).map_or(f64::NAN, |r| r.t_infinity);
            match fit_rate(&pts) {
                Ok(fit) => println!("{cell:<16} T_inf {t_inf:>7.2}  slope {:+.3} [{:+.3}, {:+.3}]", fit.slope, fit.ci_low, fit.ci_high),
                Err(e) => println!("{cell:<16} T_inf {t_inf:>7.2}  no fit: {e}"),
            }
        }
    }
    Ok(())
}
