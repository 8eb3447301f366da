//! Ho-Kalman realization of both halves of a Laurent block, model
//! reconstruction and frequency responses.

mod freq;
mod hankel;
mod reconstruct;

pub use freq::{
    eval_state_space, frequency_grid, frequency_response, magnitude_db, phase_deg, phase_gap_deg,
    FrequencyResponse, TransferFunction,
};
pub use hankel::{ho_kalman, ho_kalman_causal, ho_kalman_noncausal, HankelSpec, Order, Realization, GAP_RATIO};
pub use reconstruct::{reconstruct, PartJson, PartsJson, Provenance, ReconstructedJson, ReconstructedModel};
