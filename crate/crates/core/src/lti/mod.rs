//! Plant models, stable/anti-stable decoupling and two-sided Laurent
//! (non-causal FIR) coefficients.

mod decompose;
mod laurent;
mod model;
pub mod presets;
mod spectral;
mod tails;

pub use decompose::{decompose, DecomposedRealization};
pub use laurent::{
    laurent_input_coeffs, laurent_noise_coeffs, truncated_fir_response, FirResponse, LaurentBlock,
};
pub(crate) use laurent::write_lag_csv;
pub use model::{ModelJson, StateSpaceModel, DEFAULT_UNIT_CIRCLE_TOL};
pub(crate) use model::{matrix_from_rows, rows_of};
pub use spectral::{
    spectral_radius, transient_amplification, transient_amplification_scan, AmplificationScan,
    MAX_TAU, MONOTONE_STOP,
};
pub use tails::{tail_gains, truncation_tails, TailSignals, TruncationTailReport};

/// True parameter block `θ_{r,d} = [H_{-d} … H_r]` of a plant.
pub fn true_theta(model: &StateSpaceModel, r: usize, d: usize) -> crate::Result<LaurentBlock> {
    let dec = decompose(model, model.unit_circle_tol())?;
    laurent_input_coeffs(&dec, model.d(), r, d)
}
