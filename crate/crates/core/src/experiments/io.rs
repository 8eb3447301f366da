use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Estimator;
use super::run::ResultTable;
use super::stats::{fit_rate, median, RateFit};
use crate::control::Trajectory;
use crate::error::{Error, Result};

/// What an imported trajectory will be used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportMode {
    /// IV workflows need the excitation columns.
    Iv,
    /// LS-only workflows accept files without them.
    Ls,
}

/// Reads an observed trajectory CSV (`k,u_*,y_*[,c_*]`). Ground-truth
/// columns, if present, are ignored.
pub fn import_trajectory(path: impl AsRef<Path>, mode: ImportMode) -> Result<Trajectory> {
    let traj = Trajectory::read_csv(File::open(path)?)?;
    if mode == ImportMode::Iv && traj.c.is_none() {
        return Err(Error::Parse {
            line: 1,
            msg: "IV mode requires the excitation columns c_1..c_p (the instrument) in the header".into(),
        });
    }
    Ok(traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub cell: String,
    pub controller: String,
    pub snr: f64,
    pub t_infinity: f64,
    /// Median `λ_IV` estimate at the largest `N`.
    pub lambda_iv_median: f64,
    pub failed_rows: usize,
    /// Slopes of the median curves, by estimator name.
    pub rates: Vec<(String, Option<RateFit>)>,
}

/// Per-cell summaries of a table.
pub fn summarize(table: &ResultTable) -> Vec<CellSummary> {
    table
        .cells()
        .into_iter()
        .map(|cell| {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.cell == cell).collect();
            let n_max = rows.iter().map(|r| r.n).max().unwrap_or(0);
            let lambdas: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n_max && r.estimator == rows[0].estimator && r.lambda_iv.is_finite())
                .map(|r| r.lambda_iv)
                .collect();
            let rates = table
                .estimators()
                .into_iter()
                .map(|est| {
                    let pts: Vec<(usize, f64)> =
                        table.curve(&cell, est).iter().map(|p| (p.n, p.median_error)).collect();
                    (est.name().to_string(), fit_rate(&pts).ok())
                })
                .collect();
            CellSummary {
                controller: rows[0].controller.clone(),
                snr: rows[0].snr,
                t_infinity: rows[0].t_infinity,
                lambda_iv_median: median(&lambdas),
                failed_rows: rows.iter().filter(|r| !r.ok()).count(),
                rates,
                cell,
            }
        })
        .collect()
}

/// File name of one plot series.
pub fn plotdata_name(cell: &str, est: Estimator) -> String {
    let safe: String = cell.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect();
    format!("{safe}_{}.csv", est.name())
}

/// Writes `results.csv`, `diagnostics.json` and `plotdata/<cell>_<estimator>.csv`
/// (columns `N,median_error,q25,q75`). Everything is derived from the table.
pub fn export_results(table: &ResultTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let plot_dir = dir.join("plotdata");
    std::fs::create_dir_all(&plot_dir)?;
    let mut written = Vec::new();

    let results = dir.join("results.csv");
    table.write_csv(BufWriter::new(File::create(&results)?))?;
    written.push(results);

    #[derive(Serialize)]
    struct Doc {
        schema_version: &'static str,
        library_version: &'static str,
        cells: Vec<CellSummary>,
    }
    let diag = dir.join("diagnostics.json");
    let doc = Doc {
        schema_version: crate::SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION"),
        cells: summarize(table),
    };
    std::fs::write(&diag, serde_json::to_string_pretty(&doc)?)?;
    written.push(diag);

    for cell in table.cells() {
        for est in table.estimators() {
            let path = plot_dir.join(plotdata_name(&cell, est));
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
            w.write_record(["N", "median_error", "q25", "q75"])?;
            for p in table.curve(&cell, est) {
                w.write_record(&[p.n.to_string(), p.median_error.to_string(), p.q25.to_string(), p.q75.to_string()])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{simulate_closed_loop, Controller, NoiseSpec};
    use crate::lti::presets;

    #[test]
    fn export_import_round_trip() {
        let model = presets::example4();
        let ctrl = crate::experiments::ControllerSpec::default().build(&model).unwrap();
        let traj = simulate_closed_loop(&model, &ctrl, &NoiseSpec::new(1.0, 0.2, 0.1, 4).unwrap(), 64).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        traj.write_csv(File::create(&path).unwrap(), true).unwrap();
        let back = import_trajectory(&path, ImportMode::Iv).unwrap();
        assert_eq!(back, traj.observed());
    }

    #[test]
    fn iv_import_needs_excitation() {
        let model = presets::stable_siso();
        let mut traj = simulate_closed_loop(&model, &Controller::Zero, &NoiseSpec::new(1.0, 0.0, 0.1, 1).unwrap(), 20)
            .unwrap()
            .observed();
        traj.c = None;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noc.csv");
        traj.write_csv(File::create(&path).unwrap(), false).unwrap();
        let err = import_trajectory(&path, ImportMode::Iv).unwrap_err();
        assert!(err.to_string().contains("IV mode requires the excitation"));
        assert!(import_trajectory(&path, ImportMode::Ls).is_ok());
    }
}
