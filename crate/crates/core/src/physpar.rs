//! Physical constants, experiment parameters and single-value derived
//! quantities.
//!
//! Every frequency stored here is angular (rad/s); the `/2π` conversion happens
//! only at the file and report boundary (see [`crate::config`]).

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants<T> {
    /// Reduced Planck constant, J·s.
    pub hbar: T,
    /// Planck constant, J·s.
    pub h: T,
    /// Boltzmann constant, J/K.
    pub k_b: T,
    /// Speed of light, m/s.
    pub c: T,
    /// Atomic mass unit, kg.
    pub u: T,
    /// Vacuum permittivity, F/m.
    pub eps0: T,
}

impl<T: Real> PhysicalConstants<T> {
    /// CODATA 2018 values.
    pub fn codata() -> Self {
        let hbar = T::of(1.054_571_817e-34);
        Self {
            hbar,
            h: hbar * T::two_pi_s(),
            k_b: T::of(1.380_649e-23),
            c: T::of(299_792_458.0),
            u: T::of(1.660_539_066_60e-27),
            eps0: T::of(8.854_187_8128e-12),
        }
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleSpec<T> {
    /// m
    pub diameter: T,
    /// kg/m³
    pub density: T,
    /// Real relative permittivity used for trapping and Rayleigh scattering.
    pub permittivity: T,
    /// Complex average permittivity for blackbody estimates (provenance only).
    pub eps_bb: Complex<T>,
    /// K
    pub internal_temperature: T,
}

impl<T: Real> ParticleSpec<T> {
    pub fn radius(&self) -> T {
        self.diameter / T::of(2.0)
    }

    pub fn volume(&self) -> T {
        T::of(4.0 / 3.0) * T::PI() * self.radius().powi(3)
    }

    pub fn mass(&self) -> T {
        self.density * self.volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec<T> {
    /// Tweezer power in the focus, W.
    pub power: T,
    /// m
    pub wavelength: T,
    pub waist_x: T,
    pub waist_y: T,
    /// (Ω_x, Ω_y, Ω_z) in rad/s.
    pub omega_mech: [T; 3],
}

/// Motional axis of the trapped particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl<T: Real> TrapSpec<T> {
    pub fn wavenumber(&self) -> T {
        T::two_pi_s() / self.wavelength
    }

    pub fn rayleigh_length(&self) -> T {
        self.waist_x * self.waist_y * T::PI() / self.wavelength
    }

    /// Optical angular frequency of the tweezer light.
    pub fn optical_frequency(&self, c: T) -> T {
        T::two_pi_s() * c / self.wavelength
    }

    pub fn omega(&self, axis: Axis) -> T {
        self.omega_mech[axis.index()]
    }

    /// Peak intensity of the elliptical focus, W/m².
    pub fn peak_intensity(&self) -> T {
        T::of(2.0) * self.power / (T::PI() * self.waist_x * self.waist_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec<T> {
    /// Linewidth κ (full width), rad/s.
    pub kappa: T,
    /// One-sigma uncertainty on κ, rad/s.
    pub kappa_sigma: T,
    /// Free spectral range, rad/s.
    pub fsr: T,
    pub finesse: T,
}

impl<T: Real> CavitySpec<T> {
    /// L = c·π/Δω_FSR.
    pub fn length(&self, c: T) -> T {
        c * T::PI() / self.fsr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec<T> {
    /// Pa
    pub pressure: T,
    /// K
    pub temperature: T,
    /// kg
    pub gas_molecule_mass: T,
}

/// Relative intensity noise tabulated against ordinary frequency.
///
/// Values are linear (1/Hz); lookup interpolates linearly in dB between
/// points and clamps outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RinTable<T> {
    /// Hz, strictly increasing.
    pub freq_hz: Vec<T>,
    /// 1/Hz
    pub rin: Vec<T>,
}

impl<T: Real> RinTable<T> {
    pub fn flat(rin: T) -> Self {
        Self {
            freq_hz: vec![T::zero()],
            rin: vec![rin],
        }
    }

    pub fn at(&self, freq_hz: T) -> T {
        let n = self.freq_hz.len();
        if n == 0 {
            return T::zero();
        }
        if freq_hz <= self.freq_hz[0] {
            return self.rin[0];
        }
        if freq_hz >= self.freq_hz[n - 1] {
            return self.rin[n - 1];
        }
        let i = self.freq_hz.iter().position(|&f| f > freq_hz).unwrap_or(n - 1);
        let (f0, f1) = (self.freq_hz[i - 1], self.freq_hz[i]);
        let t = (freq_hz - f0) / (f1 - f0);
        if self.rin[i - 1] <= T::zero() || self.rin[i] <= T::zero() {
            return self.rin[i - 1] + t * (self.rin[i] - self.rin[i - 1]);
        }
        let l0 = self.rin[i - 1].ln();
        let l1 = self.rin[i].ln();
        (l0 + t * (l1 - l0)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec<T> {
    /// Δ = ω_cav − ω_tw, rad/s.
    pub detuning: T,
    /// Accuracy of the detuning calibration, rad/s.
    pub detuning_sigma: T,
    /// Cavity drive E_d, rad/s.
    pub drive_amplitude: T,
    /// x₀ along the cavity axis, m (0 = antinode).
    pub particle_position: T,
    /// Optomechanical coupling g_x, rad/s.
    pub coupling_x: T,
    /// W
    pub lo_power: T,
    /// rad/s
    pub het_freq: T,
    /// Laser frequency-noise PSD S_φ̇φ̇ at Ω_x, Hz²/Hz.
    pub phase_noise_psd: T,
    pub rin: RinTable<T>,
    pub c_pp: T,
    pub c_qq: T,
    /// Phonons added through intensity-noise backaction (reported constant).
    pub n_int: T,
    /// Upper bound on the phase-noise heating rate, rad/s (reported constant).
    pub phase_heating: T,
}

/// Heterodyne detection and y-mode spectator parameters used by the spectrum
/// synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpec<T> {
    /// Overall heterodyne detection efficiency η.
    pub efficiency: T,
    /// Sideband linewidth γ_x of the x mode, rad/s.
    pub sideband_linewidth: T,
    /// Weight of the y-mode sidebands relative to the x mode.
    pub y_weight_ratio: T,
    pub y_occupation: T,
    /// rad/s
    pub y_linewidth: T,
}

/// Independently measured rates that feed the budget cross-check and the
/// free-fall forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRates<T> {
    /// Total heating Γ_x, rad/s.
    pub heating_total: T,
    pub heating_total_sigma: T,
    /// Gas-collision heating Γ_gas, rad/s.
    pub heating_gas: T,
    pub occupation: T,
    pub occupation_sigma: T,
}

/// Blackbody localization parameters, Hz/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackbodySpec<T> {
    pub lambda_scattering: T,
    pub lambda_emission: T,
    pub lambda_absorption: T,
}

impl<T: Real> BlackbodySpec<T> {
    pub fn total(&self) -> T {
        self.lambda_scattering + self.lambda_emission + self.lambda_absorption
    }
}

/// Complete physical parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig<T> {
    pub constants: PhysicalConstants<T>,
    pub particle: ParticleSpec<T>,
    pub trap: TrapSpec<T>,
    pub cavity: CavitySpec<T>,
    pub environment: EnvironmentSpec<T>,
    pub drive: DriveSpec<T>,
    pub detection: DetectionSpec<T>,
    pub measured: MeasuredRates<T>,
    pub blackbody: BlackbodySpec<T>,
}

impl<T: Real> ExperimentConfig<T> {
    pub fn mass(&self) -> T {
        self.particle.mass()
    }

    pub fn omega_x(&self) -> T {
        self.trap.omega_mech[0]
    }

    pub fn x_zpf(&self) -> T {
        let k = &self.constants;
        (k.hbar / (T::of(2.0) * self.mass() * self.omega_x())).sqrt()
    }

    /// Cross-field checks; failures name the offending field and unit.
    pub fn validate(&self) -> Result<()> {
        let pos = |field: &str, unit: &'static str, v: T| -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, unit, format!("must be positive, got {v}")))
            }
        };
        let nonneg = |field: &str, unit: &'static str, v: T| -> Result<()> {
            if v >= T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, unit, format!("must be non-negative, got {v}")))
            }
        };
        pos("particle.diameter_m", "m", self.particle.diameter)?;
        pos("particle.density_kg_m3", "kg/m^3", self.particle.density)?;
        pos("particle.permittivity", "1", self.particle.permittivity)?;
        pos("particle.internal_temperature_k", "K", self.particle.internal_temperature)?;

        pos("trap.power_w", "W", self.trap.power)?;
        pos("trap.wavelength_m", "m", self.trap.wavelength)?;
        pos("trap.waist_x_m", "m", self.trap.waist_x)?;
        pos("trap.waist_y_m", "m", self.trap.waist_y)?;
        for (i, &w) in self.trap.omega_mech.iter().enumerate() {
            pos(&format!("trap.mech_freq_hz[{i}]"), "Hz", w)?;
        }
        let [wx, wy, wz] = self.trap.omega_mech;
        if !(wx > wy && wy > wz) {
            log::warn!("mechanical frequencies not ordered Ω_x > Ω_y > Ω_z");
        }

        pos("cavity.linewidth_hz", "Hz", self.cavity.kappa)?;
        nonneg("cavity.linewidth_sigma_hz", "Hz", self.cavity.kappa_sigma)?;
        pos("cavity.fsr_hz", "Hz", self.cavity.fsr)?;
        pos("cavity.finesse", "1", self.cavity.finesse)?;
        let implied = self.cavity.fsr / self.cavity.kappa;
        let tol = (T::of(3.0) * self.cavity.kappa_sigma / self.cavity.kappa).max(T::of(0.01));
        if ((implied - self.cavity.finesse) / self.cavity.finesse).abs() > tol {
            return Err(Error::config(
                "cavity.finesse",
                "1",
                format!(
                    "finesse {} inconsistent with fsr/linewidth = {}",
                    self.cavity.finesse, implied
                ),
            ));
        }

        pos("environment.pressure_mbar", "mbar", self.environment.pressure)?;
        pos("environment.temperature_k", "K", self.environment.temperature)?;
        pos("environment.gas_molecule_mass_u", "u", self.environment.gas_molecule_mass)?;

        let d = &self.drive;
        if !d.detuning.is_finite() {
            return Err(Error::config("drive.detuning_hz", "Hz", "must be finite"));
        }
        nonneg("drive.detuning_sigma_hz", "Hz", d.detuning_sigma)?;
        nonneg("drive.drive_amplitude_hz", "Hz", d.drive_amplitude)?;
        if !d.particle_position.is_finite() {
            return Err(Error::config("drive.particle_position_m", "m", "must be finite"));
        }
        nonneg("drive.coupling_hz", "Hz", d.coupling_x)?;
        nonneg("drive.lo_power_w", "W", d.lo_power)?;
        let max_mech = wx.max(wy).max(wz);
        if !(d.het_freq > max_mech) {
            return Err(Error::config(
                "drive.het_freq_hz",
                "Hz",
                "heterodyne frequency must exceed every mechanical frequency",
            ));
        }
        nonneg("drive.phase_noise_hz2_per_hz", "Hz^2/Hz", d.phase_noise_psd)?;
        if d.rin.freq_hz.len() != d.rin.rin.len() || d.rin.freq_hz.is_empty() {
            return Err(Error::config("drive.rin_db_per_hz", "dB/Hz", "table must be non-empty"));
        }
        if d.rin.freq_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "drive.rin_db_per_hz",
                "Hz",
                "frequencies must be strictly increasing",
            ));
        }
        nonneg("drive.c_pp", "1", d.c_pp)?;
        nonneg("drive.c_qq", "1", d.c_qq)?;
        nonneg("drive.n_int", "phonons", d.n_int)?;
        nonneg("drive.phase_heating_hz", "Hz", d.phase_heating)?;

        let det = &self.detection;
        pos("detection.efficiency", "1", det.efficiency)?;
        pos("detection.sideband_linewidth_hz", "Hz", det.sideband_linewidth)?;
        nonneg("detection.y_weight_ratio", "1", det.y_weight_ratio)?;
        nonneg("detection.y_occupation", "phonons", det.y_occupation)?;
        pos("detection.y_linewidth_hz", "Hz", det.y_linewidth)?;

        let m = &self.measured;
        pos("measured.heating_total_hz", "Hz", m.heating_total)?;
        nonneg("measured.heating_total_sigma_hz", "Hz", m.heating_total_sigma)?;
        pos("measured.heating_gas_hz", "Hz", m.heating_gas)?;
        nonneg("measured.occupation", "phonons", m.occupation)?;
        nonneg("measured.occupation_sigma", "phonons", m.occupation_sigma)?;

        let bb = &self.blackbody;
        nonneg("blackbody.lambda_scattering", "Hz/m^2", bb.lambda_scattering)?;
        nonneg("blackbody.lambda_emission", "Hz/m^2", bb.lambda_emission)?;
        nonneg("blackbody.lambda_absorption", "Hz/m^2", bb.lambda_absorption)?;
        Ok(())
    }
}

/// Sphere mass ρ·(π/6)·d³.
pub fn mass_from_diameter<T: Real>(diameter: T, density: T) -> Result<T> {
    require_positive("mass_from_diameter", "diameter", diameter)?;
    require_positive("mass_from_diameter", "density", density)?;
    Ok(density * T::PI() / T::of(6.0) * diameter.powi(3))
}

/// Ground-state wavepacket size √(ℏ/2mΩ).
pub fn zero_point_fluctuation<T: Real>(k: &PhysicalConstants<T>, mass: T, omega: T) -> Result<T> {
    require_positive("zero_point_fluctuation", "mass", mass)?;
    require_positive("zero_point_fluctuation", "omega", omega)?;
    Ok((k.hbar / (T::of(2.0) * mass * omega)).sqrt())
}

/// Thermal de Broglie wavelength h/√(2π·m·k_B·T) of the background gas.
pub fn thermal_de_broglie<T: Real>(k: &PhysicalConstants<T>, m_gas: T, temperature: T) -> Result<T> {
    require_positive("thermal_de_broglie", "m_gas", m_gas)?;
    require_positive("thermal_de_broglie", "temperature", temperature)?;
    // Split roots: m·k_B·T underflows f32.
    Ok(k.h / (T::two_pi_s() * m_gas).sqrt() / (k.k_b * temperature).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeTemperature<T> {
    /// K
    pub temperature: T,
    pub ground_probability: T,
}

/// Mode temperature from the Bose occupation, and the ground-state
/// probability 1/(1+n).
pub fn occupation_temperature<T: Real>(
    k: &PhysicalConstants<T>,
    n: T,
    omega: T,
) -> Result<ModeTemperature<T>> {
    require_non_negative("occupation_temperature", "n", n)?;
    require_positive("occupation_temperature", "omega", omega)?;
    if n == T::zero() {
        return Ok(ModeTemperature {
            temperature: T::zero(),
            ground_probability: T::one(),
        });
    }
    let temperature = k.hbar * omega / (k.k_b * (T::one() / n).ln_1p());
    Ok(ModeTemperature {
        temperature,
        ground_probability: T::one() / (T::one() + n),
    })
}

/// Inverse of [`occupation_temperature`]: n = 1/(exp(ℏΩ/k_B T) − 1).
pub fn occupation_from_temperature<T: Real>(k: &PhysicalConstants<T>, temperature: T, omega: T) -> Result<T> {
    require_non_negative("occupation_from_temperature", "temperature", temperature)?;
    require_positive("occupation_from_temperature", "omega", omega)?;
    if temperature == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::one() / (k.hbar * omega / (k.k_b * temperature)).exp_m1())
}

/// Classical thermal occupation k_B·T/(ℏΩ).
pub fn thermal_occupation<T: Real>(k: &PhysicalConstants<T>, temperature: T, omega: T) -> T {
    k.k_b * temperature / (k.hbar * omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::angular;

    fn k() -> PhysicalConstants<f64> {
        PhysicalConstants::codata()
    }

    #[test]
    fn planck_constants_consistent() {
        let k = k();
        assert!((k.h - 2.0 * std::f64::consts::PI * k.hbar).abs() <= 1e-15 * k.h);
    }

    #[test]
    fn mass_from_nominal_diameter_value() {
        let m: f64 = mass_from_diameter(143e-9, 1850.0).unwrap();
        assert!((m / 2.83e-18 - 1.0).abs() < 0.005, "m = {m}");
        let m2 = mass_from_diameter(286e-9, 1850.0).unwrap();
        assert!((m2 / m - 8.0).abs() < 1e-12);
    }

    #[test]
    fn mass_rejects_degenerate_diameter() {
        assert!(matches!(mass_from_diameter(0.0, 1850.0), Err(Error::Domain { .. })));
        assert!(mass_from_diameter(1e-7, -1.0).is_err());
    }

    #[test]
    fn zero_point_sizes() {
        let k = k();
        let x = zero_point_fluctuation(&k, 2.83e-18, angular(305e3)).unwrap();
        assert!((x / 3.1e-12 - 1.0).abs() < 0.02, "x_zpf = {x}");
        let xz = zero_point_fluctuation(&k, 2.83e-18, angular(80e3)).unwrap();
        // direct evaluation: sqrt(1.0546e-34 / (2 * 2.83e-18 * 5.0265e5)) = 6.088 pm
        assert!((xz - 6.088e-12).abs() < 0.01e-12, "x_zpf(z) = {xz}");
        let x4 = zero_point_fluctuation(&k, 4.0 * 2.83e-18, angular(305e3)).unwrap();
        assert!((x / x4 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn de_broglie_of_nitrogen() {
        let k = k();
        let m_gas = 28.0 * k.u;
        let l = thermal_de_broglie(&k, m_gas, 300.0).unwrap();
        assert!((l / 19e-12 - 1.0).abs() < 0.03, "lambda_th = {l}");
        let l4 = thermal_de_broglie(&k, m_gas, 1200.0).unwrap();
        assert!((l / l4 - 2.0).abs() < 1e-12);
        let x = zero_point_fluctuation(&k, 2.83e-18, angular(305e3)).unwrap();
        assert!((l / x - 6.2).abs() < 0.2, "ratio = {}", l / x);
    }

    #[test]
    fn temperature_of_cooled_and_hot_modes() {
        let k = k();
        let t = occupation_temperature(&k, 0.43, angular(305e3)).unwrap();
        assert!((t.temperature - 12.2e-6).abs() < 0.1e-6, "T = {}", t.temperature);
        assert!((t.ground_probability - 0.70).abs() < 0.01);
        let g = occupation_temperature(&k, 0.0, 1.0).unwrap();
        assert_eq!((g.temperature, g.ground_probability), (0.0, 1.0));
        let tz = occupation_temperature(&k, 2e7, angular(80e3)).unwrap();
        assert!((tz.temperature / 80.0 - 1.0).abs() < 0.05, "T_z = {}", tz.temperature);
        assert!(occupation_temperature(&k, -0.1, 1.0).is_err());
    }

    #[test]
    fn f32_path_agrees() {
        let k32 = PhysicalConstants::<f32>::codata();
        let x = zero_point_fluctuation(&k32, 2.83e-18f32, angular(305e3f32)).unwrap();
        assert!((x / 3.1e-12 - 1.0).abs() < 0.02);
        let t = occupation_temperature(&k32, 0.43f32, angular(305e3f32)).unwrap();
        assert!((t.temperature - 12.2e-6).abs() < 0.1e-6);
    }

    #[test]
    fn rin_interpolates_in_db() {
        let t: RinTable<f64> = RinTable {
            freq_hz: vec![1e5, 2e5],
            rin: vec![1e-12, 1e-14],
        };
        assert!((t.at(1.5e5) / 1e-13 - 1.0).abs() < 1e-12);
        assert_eq!(t.at(1.0), 1e-12);
        assert_eq!(t.at(1e7), 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn occupation_temperature_round_trip(log_n in -3.0f64..9.0, f in 1e4f64..1e7) {
                let k = PhysicalConstants::<f64>::codata();
                let n = 10f64.powf(log_n);
                let omega = angular(f);
                let t = occupation_temperature(&k, n, omega).unwrap().temperature;
                let back = occupation_from_temperature(&k, t, omega).unwrap();
                prop_assert!(((back - n) / n).abs() < 1e-10, "n={n} back={back}");
            }

            #[test]
            fn equipartition_limit(log_n in 1.0f64..9.0) {
                let k = PhysicalConstants::<f64>::codata();
                let n = 10f64.powf(log_n);
                let omega = angular(305e3);
                let t = occupation_temperature(&k, n, omega).unwrap().temperature;
                let classical = n * k.hbar * omega / k.k_b;
                prop_assert!(((t - classical) / classical).abs() <= 1.0 / (2.0 * n) * (1.0 + 1e-6));
            }

            #[test]
            fn mass_is_cubic(d in 1e-8f64..1e-5, rho in 100.0f64..2e4) {
                let m1 = mass_from_diameter(d, rho).unwrap();
                let m2 = mass_from_diameter(2.0 * d, rho).unwrap();
                prop_assert!((m2 / m1 - 8.0).abs() < 1e-12);
            }
        }
    }
}
