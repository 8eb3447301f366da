//! Closed-loop identification of stable and unstable LTI systems with
//! two-sided (non-causal) FIR models.
//!
//! A plant `G(z) = C(zI − A)⁻¹B + D` without poles on the unit circle has a
//! Laurent expansion `Σ H_i z^{-i}` that converges on an annulus containing
//! `|z| = 1`. Positive lags come from the stable part, negative lags from the
//! anti-stable part run in reverse time, so every coefficient decays. This
//! crate estimates the truncated block `[H_{-d} … H_r]` from one closed-loop
//! trajectory, using the injected excitation as an instrumental variable.
//!
//! Modules:
//!
//! - [`lti`]: models, stable/anti-stable decoupling, Laurent coefficients.
//! - [`control`]: controller design, closed-loop simulation, loop diagnostics.
//! - [`estimation`]: data matrices, batch LS/IV, recursive LS/IV.
//! - [`realization`]: Ho-Kalman on both halves, frequency responses.
//! - [`bounds`]: finite-sample bound terms and horizon selection.
//! - [`experiments`]: reproducible sweeps, rate fits, CSV/JSON I/O.
//! - [`cli`]: the `ncfir` command-line front end.

pub mod bounds;
pub mod cli;
pub mod control;
mod error;
pub mod estimation;
pub mod experiments;
pub mod linalg;
pub mod lti;
pub mod realization;

pub use error::{Error, Result};

/// Version tag written into every exported JSON document.
pub const SCHEMA_VERSION: &str = "1";
