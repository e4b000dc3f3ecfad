//! Cavity cooling of a levitated nanoparticle by coherent scattering.
//!
//! Forward models (cooling rates, heterodyne spectra, linear Langevin
//! dynamics), the sideband-asymmetry analysis chain, heating budgets and
//! free-fall decoherence forecasts. Numerical code is generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix `f64`.

pub mod budget;
pub mod cavity;
pub mod config;
pub mod cooling;
pub mod decohere;
pub mod error;
pub mod io;
pub mod lsq;
pub mod physpar;
pub mod report;
pub mod scalar;
pub mod specgen;
pub mod thermo;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Config = physpar::ExperimentConfig<f64>;
pub type ConfigF32 = physpar::ExperimentConfig<f32>;
pub type Spectrum = specgen::PsdTrace<f64>;
pub type Constants = physpar::PhysicalConstants<f64>;
