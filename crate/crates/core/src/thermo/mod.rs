//! Sideband thermometry: joint fits, asymmetry inversion, band-power and
//! worst-case methods, shot-noise verification and secondary-axis estimates.

mod axes;
mod fit;
mod occupation;
mod shot;

pub use axes::{harmonic_area_ratio, y_occupation_estimate, z_temperature_from_harmonics, YOccupationEstimate};
pub use fit::{auto_guess, fit_sidebands, SidebandFit, SidebandGuess, SidebandPeak};
pub use occupation::{
    asymmetry_ratio, band_area, band_power_occupation, crosscheck_occupation, occupation_from_asymmetry,
    occupation_from_ratio, psd_hash, worst_case_occupation, EnvelopeCalibration, OccupationMethod, OccupationResult,
};
pub use shot::{shot_noise_check, BandPowerPoint, ShotNoiseVerdict};
