//! Non-causal FIR regression: data matrices, batch LS/IV, recursive LS/IV
//! and instrument-strength diagnostics.

mod batch;
mod recursive;
mod regressors;

pub use batch::{
    batch_iv, batch_ls, block_norm, instrument_diagnostics, lower_block_residual, write_estimate_csv,
    InstrumentDiagnostics, CONDITIONING_FLOOR,
};
pub use recursive::{
    default_eta_iv, default_eta_ls, run_recursive, Checkpoint, Firing, Mode, RecursiveRun, RecursiveState,
    SkipEvent, Step, StreamingEstimator, DENOMINATOR_GUARD,
};
pub use regressors::{build_matrices, stack_regressor, CrossMoments, DataMatrices, RegressorConfig};
