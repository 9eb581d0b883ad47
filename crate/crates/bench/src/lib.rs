//! Shared fixtures for the benchmarks.

use pxlab_core::{ExperimentParams, PhotonContext};

/// The slit/lens geometry used throughout the benchmarks.
pub fn reference_params() -> ExperimentParams {
    let ctx = PhotonContext::new(800e-9).expect("valid wavelength");
    ExperimentParams::new(47e-6, 37e-6, 0.10, ctx).expect("valid geometry")
}
