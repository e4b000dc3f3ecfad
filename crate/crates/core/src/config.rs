//! JSON configuration in user-facing units.
//!
//! Frequencies are ordinary Hz, pressure is mbar, molecular mass is u; the
//! conversion to SI and angular units happens in [`ConfigFile::to_experiment`].

use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physpar::{
    BlackbodySpec, CavitySpec, DetectionSpec, DriveSpec, EnvironmentSpec, ExperimentConfig,
    MeasuredRates, ParticleSpec, PhysicalConstants, RinTable, TrapSpec,
};
use crate::scalar::angular;
use crate::Real;

/// Pa per mbar.
pub const PA_PER_MBAR: f64 = 100.0;

const BUNDLED_DEFAULTS: &str = include_str!("../data/paper_defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub diameter_m: f64,
    pub density_kg_m3: f64,
    pub permittivity: f64,
    /// [real, imaginary]
    pub eps_bb: [f64; 2],
    pub internal_temperature_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub power_w: f64,
    pub wavelength_m: f64,
    pub waist_x_m: f64,
    pub waist_y_m: f64,
    /// [x, y, z]
    pub mech_freq_hz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub linewidth_hz: f64,
    pub linewidth_sigma_hz: f64,
    pub fsr_hz: f64,
    pub finesse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub pressure_mbar: f64,
    pub temperature_k: f64,
    pub gas_molecule_mass_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub detuning_hz: f64,
    pub detuning_sigma_hz: f64,
    pub drive_amplitude_hz: f64,
    pub particle_position_m: f64,
    pub coupling_hz: f64,
    pub lo_power_w: f64,
    pub het_freq_hz: f64,
    pub phase_noise_hz2_per_hz: f64,
    /// Pairs of [frequency Hz, RIN dB/Hz].
    pub rin_db_per_hz: Vec<[f64; 2]>,
    pub c_pp: f64,
    pub c_qq: f64,
    pub n_int: f64,
    pub phase_heating_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub efficiency: f64,
    pub sideband_linewidth_hz: f64,
    pub y_weight_ratio: f64,
    pub y_occupation: f64,
    pub y_linewidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSection {
    pub heating_total_hz: f64,
    pub heating_total_sigma_hz: f64,
    pub heating_gas_hz: f64,
    pub occupation: f64,
    pub occupation_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackbodySection {
    pub lambda_scattering: f64,
    pub lambda_emission: f64,
    pub lambda_absorption: f64,
}

/// On-disk configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub particle: ParticleSection,
    pub trap: TrapSection,
    pub cavity: CavitySection,
    pub environment: EnvironmentSection,
    pub drive: DriveSection,
    pub detection: DetectionSection,
    pub measured: MeasuredSection,
    pub blackbody: BlackbodySection,
}

impl ConfigFile {
    pub fn paper_defaults() -> Self {
        serde_json::from_str(BUNDLED_DEFAULTS).expect("bundled defaults parse")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| {
            // serde reports `unknown field`/`missing field` with the name; keep
            // its message and tag it as a config error.
            Error::config(field_from_serde(&e), "-", e.to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Converts to internal units and validates every cross-field invariant.
    pub fn to_experiment<T: Real>(&self) -> Result<ExperimentConfig<T>> {
        let constants = PhysicalConstants::<T>::codata();
        let p = &self.particle;
        let t = &self.trap;
        let c = &self.cavity;
        let e = &self.environment;
        let d = &self.drive;
        let det = &self.detection;
        let m = &self.measured;
        let bb = &self.blackbody;
        let w = |hz: f64| angular(T::of(hz));
        let cfg = ExperimentConfig {
            constants,
            particle: ParticleSpec {
                diameter: T::of(p.diameter_m),
                density: T::of(p.density_kg_m3),
                permittivity: T::of(p.permittivity),
                eps_bb: Complex::new(T::of(p.eps_bb[0]), T::of(p.eps_bb[1])),
                internal_temperature: T::of(p.internal_temperature_k),
            },
            trap: TrapSpec {
                power: T::of(t.power_w),
                wavelength: T::of(t.wavelength_m),
                waist_x: T::of(t.waist_x_m),
                waist_y: T::of(t.waist_y_m),
                omega_mech: t.mech_freq_hz.map(w),
            },
            cavity: CavitySpec {
                kappa: w(c.linewidth_hz),
                kappa_sigma: w(c.linewidth_sigma_hz),
                fsr: w(c.fsr_hz),
                finesse: T::of(c.finesse),
            },
            environment: EnvironmentSpec {
                pressure: T::of(e.pressure_mbar * PA_PER_MBAR),
                temperature: T::of(e.temperature_k),
                gas_molecule_mass: T::of(e.gas_molecule_mass_u) * constants.u,
            },
            drive: DriveSpec {
                detuning: w(d.detuning_hz),
                detuning_sigma: w(d.detuning_sigma_hz),
                drive_amplitude: w(d.drive_amplitude_hz),
                particle_position: T::of(d.particle_position_m),
                coupling_x: w(d.coupling_hz),
                lo_power: T::of(d.lo_power_w),
                het_freq: w(d.het_freq_hz),
                phase_noise_psd: T::of(d.phase_noise_hz2_per_hz),
                rin: RinTable {
                    freq_hz: d.rin_db_per_hz.iter().map(|r| T::of(r[0])).collect(),
                    rin: d.rin_db_per_hz.iter().map(|r| T::of(db_to_linear(r[1]))).collect(),
                },
                c_pp: T::of(d.c_pp),
                c_qq: T::of(d.c_qq),
                n_int: T::of(d.n_int),
                phase_heating: w(d.phase_heating_hz),
            },
            detection: DetectionSpec {
                efficiency: T::of(det.efficiency),
                sideband_linewidth: w(det.sideband_linewidth_hz),
                y_weight_ratio: T::of(det.y_weight_ratio),
                y_occupation: T::of(det.y_occupation),
                y_linewidth: w(det.y_linewidth_hz),
            },
            measured: MeasuredRates {
                heating_total: w(m.heating_total_hz),
                heating_total_sigma: w(m.heating_total_sigma_hz),
                heating_gas: w(m.heating_gas_hz),
                occupation: T::of(m.occupation),
                occupation_sigma: T::of(m.occupation_sigma),
            },
            blackbody: BlackbodySpec {
                lambda_scattering: T::of(bb.lambda_scattering),
                lambda_emission: T::of(bb.lambda_emission),
                lambda_absorption: T::of(bb.lambda_absorption),
            },
        };
        if !(det.efficiency > 0.0 && det.efficiency <= 1.0) {
            return Err(Error::config("detection.efficiency", "1", "must lie in (0, 1]"));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn field_from_serde(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for key in ["unknown field `", "missing field `"] {
        if let Some(start) = msg.find(key) {
            let rest = &msg[start + key.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    format!("line {} column {}", e.line(), e.column())
}

/// Loads the bundled defaults, or the file at `path` when given.
pub fn load_experiment<T: Real>(path: Option<&Path>) -> Result<(ConfigFile, ExperimentConfig<T>)> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::paper_defaults(),
    };
    let cfg = file.to_experiment()?;
    Ok((file, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ordinary;

    #[test]
    fn defaults_load_and_validate() {
        let f = ConfigFile::paper_defaults();
        let cfg: ExperimentConfig<f64> = f.to_experiment().unwrap();
        assert!((ordinary(cfg.cavity.kappa) - 193e3).abs() < 1e-6);
        assert!((cfg.environment.pressure - 1e-4).abs() < 1e-18);
        assert!((cfg.mass() / 2.83e-18 - 1.0).abs() < 0.005);
        let cfg32: ExperimentConfig<f32> = f.to_experiment().unwrap();
        assert!((cfg32.mass() / 2.83e-18 - 1.0).abs() < 0.005);
    }

    #[test]
    fn round_trips_through_json() {
        let f = ConfigFile::paper_defaults();
        let back = ConfigFile::from_json_str(&f.to_json_pretty()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn rejects_negative_diameter_naming_field() {
        let mut f = ConfigFile::paper_defaults();
        f.particle.diameter_m = -1e-9;
        let err = f.to_experiment::<f64>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("particle.diameter_m") && msg.contains("[m]"), "{msg}");
    }

    #[test]
    fn rejects_het_freq_below_mechanics() {
        let mut f = ConfigFile::paper_defaults();
        f.drive.het_freq_hz = 200e3;
        let msg = f.to_experiment::<f64>().unwrap_err().to_string();
        assert!(msg.contains("drive.het_freq_hz") && msg.contains("[Hz]"), "{msg}");
    }

    #[test]
    fn rejects_inconsistent_finesse() {
        let mut f = ConfigFile::paper_defaults();
        f.cavity.finesse = 1000.0;
        let msg = f.to_experiment::<f64>().unwrap_err().to_string();
        assert!(msg.contains("cavity.finesse"), "{msg}");
    }

    #[test]
    fn unknown_key_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED_DEFAULTS).unwrap();
        v["trap"]["power_mw"] = serde_json::json!(400.0);
        let err = ConfigFile::from_json_str(&v.to_string()).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "power_mw"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unordered_mechanics_only_warn() {
        let mut f = ConfigFile::paper_defaults();
        f.trap.mech_freq_hz = [80e3, 275e3, 305e3];
        assert!(f.to_experiment::<f64>().is_ok());
    }

    #[test]
    fn cavity_length_from_fsr() {
        let cfg: ExperimentConfig<f64> = ConfigFile::paper_defaults().to_experiment().unwrap();
        let l = cfg.cavity.length(cfg.constants.c);
        assert!((l - 299_792_458.0 / (2.0 * 14.0192e9)).abs() < 1e-9);
        assert!((cfg.trap.wavenumber() * cfg.trap.wavelength - std::f64::consts::TAU).abs() < 1e-12);
    }
}
