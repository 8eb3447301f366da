//! Controller design, closed-loop simulation with injected excitation and
//! loop-conditioning diagnostics.

mod controller;
mod design;
mod diagnostics;
mod rng;
mod simulate;

pub use controller::{Controller, ControllerJson, FeedbackLaw};
pub use design::{design_lqr, design_pole_placement};
pub use diagnostics::{
    closed_loop_moments, controller_diagnostics, t_infinity, ClosedLoop, ClosedLoopMoments,
    ControllerDiagnostics, LoopGain,
};
pub use rng::{Channel, GaussianStream};
pub use simulate::{
    draw_signals, simulate_closed_loop, simulate_with_law, simulate_with_signals, GroundTruth,
    NoiseSpec, Trajectory, INSTABILITY_GUARD,
};
