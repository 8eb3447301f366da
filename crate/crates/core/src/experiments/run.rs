use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, ExperimentConfig, ExperimentKind};
use super::stats::{median, quantile};
use crate::control::{simulate_closed_loop, t_infinity, Controller, NoiseSpec, Trajectory};
use crate::error::{Error, Result};
use crate::estimation::{batch_iv, batch_ls, build_matrices, instrument_diagnostics, RegressorConfig};
use crate::linalg::spectral_norm;
use crate::lti::{true_theta, StateSpaceModel};

/// One estimate at one sample size. `error` and `lambda_iv` are NaN when
/// the trial or the estimate failed; `status` then says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: String,
    pub controller: String,
    pub snr: f64,
    pub trial: usize,
    pub seed: u64,
    pub estimator: Estimator,
    #[serde(rename = "N")]
    pub n: usize,
    pub error: f64,
    pub lambda_iv: f64,
    pub t_infinity: f64,
    pub sigma_v: f64,
    pub elapsed_s: f64,
    pub status: String,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Summary of one `(cell, estimator, N)` group over its successful trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub median_error: f64,
    pub q25: f64,
    pub q75: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Cell names in first-appearance order.
    pub fn cells(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.cell) {
                out.push(r.cell.clone());
            }
        }
        out
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        let mut out: Vec<Estimator> = self.rows.iter().map(|r| r.estimator).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Successful errors of one group.
    pub fn errors_at(&self, cell: &str, est: Estimator, n: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.cell == cell && r.estimator == est && r.n == n && r.ok())
            .map(|r| r.error)
            .collect()
    }

    /// Median and quartiles per `N`, skipping sizes where every trial failed.
    pub fn curve(&self, cell: &str, est: Estimator) -> Vec<CurvePoint> {
        let mut ns: Vec<usize> = self.rows.iter().filter(|r| r.cell == cell && r.estimator == est).map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .filter_map(|n| {
                let e = self.errors_at(cell, est, n);
                (!e.is_empty()).then(|| CurvePoint {
                    n,
                    median_error: median(&e),
                    q25: quantile(&e, 0.25),
                    q75: quantile(&e, 0.75),
                    trials: e.len(),
                })
            })
            .collect()
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_results(&self, other: &ResultTable) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                let same = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
                a.cell == b.cell
                    && a.controller == b.controller
                    && same(a.snr, b.snr)
                    && a.trial == b.trial
                    && a.seed == b.seed
                    && a.estimator == b.estimator
                    && a.n == b.n
                    && same(a.error, b.error)
                    && same(a.lambda_iv, b.lambda_iv)
                    && same(a.t_infinity, b.t_infinity)
                    && same(a.sigma_v, b.sigma_v)
                    && a.status == b.status
            })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial. Controllers in a sweep share seeds so that their
/// curves are compared on common random numbers.
pub fn trial_seed(base_seed: u64, snr_index: usize, trial: usize) -> u64 {
    splitmix(base_seed ^ splitmix(((snr_index as u64) << 32) | trial as u64))
}

fn output_variance(y: &DMatrix<f64>) -> f64 {
    let n = y.ncols() as f64;
    let mut total = 0.0;
    for row in y.row_iter() {
        let mean = row.sum() / n;
        total += row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    }
    total / y.nrows() as f64
}

/// Measurement-noise level giving `var(y_clean)/σ_v² = snr`, from a noiseless
/// pilot run that shares the excitation and process-noise draws.
pub fn snr_sigma_v(model: &StateSpaceModel, ctrl: &Controller, noise: &NoiseSpec, len: usize, snr: f64) -> Result<f64> {
    if snr.is_infinite() {
        return Ok(0.0);
    }
    let pilot = simulate_closed_loop(model, ctrl, &NoiseSpec { sigma_v: 0.0, ..*noise }, len)?;
    Ok((output_variance(&pilot.y) / snr).sqrt())
}

/// Inputs shared by every trial of one cell.
struct Cell<'a> {
    name: String,
    controller_name: String,
    model: &'a StateSpaceModel,
    ctrl: &'a Controller,
    theta: &'a DMatrix<f64>,
    t_inf: f64,
    snr: f64,
    snr_index: usize,
}

fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(cfg.base_seed, cell.snr_index, trial);
    let len = cfg.n_grid.last().copied().unwrap_or(0) + cfg.r + cfg.d;
    let row = |est: Estimator, n: usize, sigma_v: f64| ResultRow {
        cell: cell.name.clone(),
        controller: cell.controller_name.clone(),
        snr: cell.snr,
        trial,
        seed,
        estimator: est,
        n,
        error: f64::NAN,
        lambda_iv: f64::NAN,
        t_infinity: cell.t_inf,
        sigma_v,
        elapsed_s: 0.0,
        status: "ok".into(),
    };
    let failed = |e: &Error, sigma_v: f64| -> Vec<ResultRow> {
        let mut out = Vec::new();
        for &n in &cfg.n_grid {
            for &est in &cfg.estimators {
                out.push(ResultRow { status: e.to_string(), ..row(est, n, sigma_v) });
            }
        }
        out
    };
    let noise = NoiseSpec::new(cfg.sigma_c, cfg.sigma_w, 0.0, seed)?;
    let simulated = snr_sigma_v(cell.model, cell.ctrl, &noise, len, cell.snr).and_then(|sigma_v| {
        let traj = simulate_closed_loop(cell.model, cell.ctrl, &NoiseSpec { sigma_v, ..noise }, len)?;
        Ok((sigma_v, traj))
    });
    let (sigma_v, traj) = match simulated {
        Ok(v) => v,
        Err(e @ Error::Instability { .. }) => {
            log::warn!("{} trial {trial}: {e}", cell.name);
            return Ok(failed(&e, f64::NAN));
        }
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let prefix = traj.prefix(n + cfg.r + cfg.d)?;
        rows.extend(estimate_prefix(cfg, cell.theta, &prefix, n, |est| row(est, n, sigma_v))?);
    }
    Ok(rows)
}

fn estimate_prefix(
    cfg: &ExperimentConfig,
    theta: &DMatrix<f64>,
    prefix: &Trajectory,
    n: usize,
    row: impl Fn(Estimator) -> ResultRow,
) -> Result<Vec<ResultRow>> {
    let rcfg = RegressorConfig::fit(cfg.r, cfg.d, prefix)?;
    debug_assert_eq!(rcfg.n, n);
    let dm = build_matrices(prefix, &rcfg, false)?;
    let lambda_iv = instrument_diagnostics(&dm, cfg.sigma_c).map(|d| d.lambda_iv).unwrap_or(f64::NAN);
    let mut out = Vec::new();
    for &est in &cfg.estimators {
        let start = Instant::now();
        let fit = match est {
            Estimator::Iv => batch_iv(&dm),
            Estimator::Ls => batch_ls(&dm),
        };
        let elapsed_s = start.elapsed().as_secs_f64();
        let mut r = ResultRow { lambda_iv, elapsed_s, ..row(est) };
        match fit {
            Ok(th) => r.error = spectral_norm(&(th - theta)),
            Err(e) => r.status = e.to_string(),
        }
        out.push(r);
    }
    Ok(out)
}

fn loop_gain(model: &StateSpaceModel, ctrl: &Controller, name: &str) -> f64 {
    match t_infinity(model, ctrl) {
        Ok(g) => g.value,
        Err(e) => {
            log::warn!("controller {name}: {e}");
            f64::NAN
        }
    }
}

fn cell_name(controller: &str, snr: f64) -> String {
    format!("{controller}_snr{snr}")
}

fn run_cells(cfg: &ExperimentConfig, model: &StateSpaceModel, controllers: &[(String, Controller)]) -> Result<ResultTable> {
    cfg.validate()?;
    let theta = true_theta(model, cfg.r, cfg.d)?.theta();
    let gains: Vec<f64> = controllers.iter().map(|(name, c)| loop_gain(model, c, name)).collect();
    let mut cells = Vec::new();
    for ((name, ctrl), &t_inf) in controllers.iter().zip(&gains) {
        for (snr_index, &snr) in cfg.snr.iter().enumerate() {
            cells.push(Cell {
                name: cell_name(name, snr),
                controller_name: name.clone(),
                model,
                ctrl,
                theta: &theta,
                t_inf,
                snr,
                snr_index,
            });
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let parts = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(cfg, &cells[c], t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResultTable { rows: parts.into_iter().flatten().collect() })
}

/// Error of every estimator against the true `θ_{r,d}` for each SNR, `N`
/// and trial. Each trial simulates one trajectory of the largest length and
/// evaluates its prefixes.
pub fn run_error_vs_n(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let model = cfg.plant_model()?;
    let ctrl = cfg.controller.build(&model)?;
    run_cells(cfg, &model, &[(cfg.controller.label(), ctrl)])
}

/// The same measurement for the LQR and pole-placement family of the sweep.
pub fn run_controller_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let model = cfg.plant_model()?;
    let controllers = cfg.sweep.controllers(&model)?;
    run_cells(cfg, &model, &controllers)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg.experiment {
        ExperimentKind::ErrorVsN => run_error_vs_n(cfg),
        ExperimentKind::ControllerSweep => run_controller_sweep(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: &str) -> ExperimentConfig {
        let text = format!(
            "experiment = \"{kind}\"\nplant = \"example4\"\nsnr = [20.0]\nn_grid = [100, 200, 400]\nr = 6\nd = 8\ntrials = 3\nsigma_w = 0.1\n"
        );
        ExperimentConfig::parse(&text, false, &[]).unwrap()
    }

    #[test]
    fn reproducible_and_isolated() {
        let cfg = small("error_vs_n");
        let a = run_error_vs_n(&cfg).unwrap();
        let b = run_error_vs_n(&cfg).unwrap();
        assert!(a.same_results(&b));
        assert_eq!(a.rows.len(), 3 * 3 * 2);
        let fewer = run_error_vs_n(&ExperimentConfig { trials: 2, ..cfg }).unwrap();
        let kept: Vec<ResultRow> = a.rows.iter().filter(|r| r.trial < 2).cloned().collect();
        assert!(ResultTable { rows: kept }.same_results(&fewer));
        assert!(a.rows.iter().all(|r| r.ok() && r.error > 0.0));
    }

    #[test]
    fn noiseless_fir_plant_is_exact() {
        // An FIR plant (nilpotent A) with r ≥ n has an exact finite Laurent block.
        let mut a = DMatrix::zeros(3, 3);
        a[(1, 0)] = 1.0;
        a[(2, 1)] = 1.0;
        let model = StateSpaceModel::siso_like(
            a,
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(1, 3, &[0.5, -0.3, 0.2]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fir.json");
        model.save(&path).unwrap();
        let text = format!(
            "plant = {:?}\ncontroller = {{ type = \"zero\" }}\nsnr = [inf]\nn_grid = [50, 100, 200, 400]\nr = 4\nd = 2\ntrials = 2\n",
            path.to_str().unwrap()
        );
        let cfg = ExperimentConfig::parse(&text, false, &[]).unwrap();
        let table = run_error_vs_n(&cfg).unwrap();
        assert!(table.rows.iter().all(|r| r.ok() && r.error < 1e-10), "{:?}", table.rows);
    }

    #[test]
    fn instability_is_recorded_per_trial() {
        let mut cfg = small("error_vs_n");
        cfg.controller = super::super::config::ControllerSpec::Zero;
        let table = run_error_vs_n(&cfg).unwrap();
        assert_eq!(table.rows.len(), 18);
        assert!(table.rows.iter().all(|r| r.status.contains("instability") && r.error.is_nan()));
        assert!(table.curve(&table.cells()[0], Estimator::Iv).is_empty());
    }

    #[test]
    fn sweep_shape() {
        let mut cfg = small("controller_sweep");
        cfg.trials = 1;
        cfg.estimators = vec![Estimator::Iv];
        let table = run_controller_sweep(&cfg).unwrap();
        assert_eq!(table.cells().len(), 8);
        assert_eq!(table.rows.len(), 8 * 3);
    }

    #[test]
    fn csv_round_trip() {
        let table = run_error_vs_n(&small("error_vs_n")).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = ResultTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }
}
