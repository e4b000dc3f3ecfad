//! Forward models of the heterodyne measurement.

mod experiment;
mod langevin;
mod model;
mod synth;
mod welch;

pub use experiment::{experiment_model, experiment_spectrum, sideband_weight, SynthesisGrid};
pub use langevin::{
    linear_heterodyne_spectrum, model_hash, sideband_model_for, sideband_rms_deviation, simulate_langevin, simulate_langevin_states, ExactPropagator,
    LangevinRun, TimeTrace,
};
pub use model::{heterodyne_model, lorentzian, uniform_grid, ModeParams, PsdTrace, SpectrumModelParams};
pub use synth::{synthesize_spectrum, synthesize_with};
pub use welch::{heterodyne_psd, welch_psd, Window};
