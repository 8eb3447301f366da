//! Monte-Carlo experiments, rate fitting and result persistence.

mod config;
mod io;
mod run;
mod stats;

pub use config::{resolve_plant, ControllerSpec, Estimator, ExperimentConfig, ExperimentKind, SweepSpec};
pub(crate) use config::{apply_override, parse_tree};
pub use io::{export_results, import_trajectory, plotdata_name, summarize, CellSummary, ImportMode};
pub use run::{
    run_controller_sweep, run_error_vs_n, run_experiment, snr_sigma_v, trial_seed, CurvePoint, ResultRow,
    ResultTable,
};
pub use stats::{fit_rate, median, quantile, spearman, RateFit, BOOTSTRAP_REPS};
