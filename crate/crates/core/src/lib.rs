pub mod classical;
pub mod design;
pub mod error;
pub mod fringe;
pub mod physics;
pub mod probabilities;
pub mod propagator;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use physics::{make_context, make_params, ExperimentParams, PhotonContext};
pub use states::{Grid, GridConfig, WaveFunction};
