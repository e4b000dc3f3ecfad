//! Itemized heating and noise budget.

use serde::{Deserialize, Serialize};

use crate::cavity::intracavity_photons;
use crate::error::{require_non_negative, require_positive, Result};
use crate::physpar::{thermal_occupation, Axis, ExperimentConfig, ParticleSpec, PhysicalConstants, TrapSpec};
use crate::scalar::ordinary;
use crate::Real;

/// Free-molecular drag prefactor in γ = 15.8·r²·p/(m·v̄).
pub const EPSTEIN_COEFFICIENT: f64 = 15.8;

/// Dipole-pattern direction factor for motion transverse to the polarization.
pub const RECOIL_TRANSVERSE: f64 = 2.0 / 5.0;

/// Dipole-pattern direction factor for motion along the polarization.
pub const RECOIL_PARALLEL: f64 = 1.0 / 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasHeating<T> {
    /// Momentum damping γ_gas, s⁻¹.
    pub damping: T,
    /// Phonon heating rate Γ_gas = γ_gas·k_B·T/(ℏΩ), s⁻¹.
    pub heating: T,
}

/// Free-molecular gas damping and the corresponding heating rate.
pub fn gas_heating<T: Real>(
    k: &PhysicalConstants<T>,
    pressure: T,
    temperature: T,
    m_gas: T,
    radius: T,
    mass: T,
    omega: T,
) -> Result<GasHeating<T>> {
    for (name, v) in [
        ("pressure", pressure),
        ("temperature", temperature),
        ("m_gas", m_gas),
        ("radius", radius),
        ("mass", mass),
        ("omega", omega),
    ] {
        require_positive("gas_heating", name, v)?;
    }
    let v_mean = (T::of(8.0) * k.k_b * temperature / (T::PI() * m_gas)).sqrt();
    let damping = T::of(EPSTEIN_COEFFICIENT) * radius * radius * pressure / (mass * v_mean);
    Ok(GasHeating {
        damping,
        heating: damping * thermal_occupation(k, temperature, omega),
    })
}

/// Rayleigh scattering cross-section k⁴|α|²/(6π ε0²) of a dielectric sphere
/// with α = 3V ε0 (ε−1)/(ε+2).
pub fn rayleigh_cross_section<T: Real>(k: &PhysicalConstants<T>, particle: &ParticleSpec<T>, wavenumber: T) -> T {
    let eps = particle.permittivity;
    let alpha = T::of(3.0) * particle.volume() * k.eps0 * (eps - T::one()) / (eps + T::of(2.0));
    wavenumber.powi(4) * alpha * alpha / (T::of(6.0) * T::PI() * k.eps0 * k.eps0)
}

/// Photon-recoil heating rate along `axis` with an explicit direction factor.
pub fn recoil_heating_with_factor<T: Real>(
    k: &PhysicalConstants<T>,
    trap: &TrapSpec<T>,
    particle: &ParticleSpec<T>,
    axis: Axis,
    direction_factor: T,
) -> Result<T> {
    require_positive("recoil_heating", "power", trap.power)?;
    require_positive("recoil_heating", "wavelength", trap.wavelength)?;
    require_positive("recoil_heating", "waist_x", trap.waist_x)?;
    require_positive("recoil_heating", "waist_y", trap.waist_y)?;
    require_positive("recoil_heating", "diameter", particle.diameter)?;
    require_positive("recoil_heating", "density", particle.density)?;
    require_non_negative("recoil_heating", "direction factor", direction_factor)?;
    let omega_axis = trap.omega(axis);
    require_positive("recoil_heating", "axis frequency", omega_axis)?;
    let kw = trap.wavenumber();
    let p_sc = trap.peak_intensity() * rayleigh_cross_section(k, particle, kw);
    let photon_rate = p_sc / (k.hbar * trap.optical_frequency(k.c));
    let recoil = (k.hbar * kw).sq();
    Ok(photon_rate * recoil * direction_factor / (T::of(2.0) * particle.mass() * k.hbar * omega_axis))
}

/// Photon-recoil heating rate with the transverse direction factor 2/5.
pub fn recoil_heating<T: Real>(
    k: &PhysicalConstants<T>,
    trap: &TrapSpec<T>,
    particle: &ParticleSpec<T>,
    axis: Axis,
) -> Result<T> {
    recoil_heating_with_factor(k, trap, particle, axis, T::of(RECOIL_TRANSVERSE))
}

/// Phonons added by laser phase noise, (n_phot/κ)·S_φ̇φ̇(Ω).
pub fn phase_noise_phonons<T: Real>(n_phot: T, kappa: T, s_phidot: T) -> Result<T> {
    require_non_negative("phase_noise_phonons", "n_phot", n_phot)?;
    require_positive("phase_noise_phonons", "kappa", kappa)?;
    require_non_negative("phase_noise_phonons", "S_phidot", s_phidot)?;
    Ok(n_phot / kappa * s_phidot)
}

/// Parametric anti-damping −π²·ν²·S_RIN(2ν) with ν in ordinary Hz; s⁻¹.
pub fn intensity_noise_damping<T: Real>(nu_mech: T, s_rin_at_2nu: T) -> Result<T> {
    require_non_negative("intensity_noise_damping", "nu_mech", nu_mech)?;
    require_non_negative("intensity_noise_damping", "S_RIN", s_rin_at_2nu)?;
    Ok(-T::PI() * T::PI() * nu_mech * nu_mech * s_rin_at_2nu)
}

/// C = 4g²/(κΓ).
pub fn cooperativity<T: Real>(g: T, kappa: T, gamma: T) -> Result<T> {
    require_non_negative("cooperativity", "g", g)?;
    require_positive("cooperativity", "kappa", kappa)?;
    require_positive("cooperativity", "gamma", gamma)?;
    Ok(T::of(4.0) * g * g / (kappa * gamma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingBudget<T> {
    pub gamma_gas: T,
    pub gamma_rec: T,
    /// Zero when the phase-noise bound is excluded.
    pub gamma_phase: T,
    /// Signed intensity-noise damping per axis (x, y, z), s⁻¹.
    pub gamma_int: [T; 3],
    pub n_phase: T,
    pub n_int: T,
    pub c_pp: T,
    pub c_qq: T,
    pub gamma_total: T,
    pub cooperativity: T,
    /// s
    pub t_trap: T,
    /// Ω_x/Γ_total, radian measure.
    pub n_osc: T,
}

impl<T: Real> HeatingBudget<T> {
    /// Aggregates given component rates; optional items default to zero.
    pub fn from_rates(gas: T, rec: T, phase: T, g: T, kappa: T, omega_x: T) -> Result<Self> {
        require_non_negative("HeatingBudget", "gamma_gas", gas)?;
        require_non_negative("HeatingBudget", "gamma_rec", rec)?;
        require_non_negative("HeatingBudget", "gamma_phase", phase)?;
        let total = gas + rec + phase;
        require_positive("HeatingBudget", "gamma_total", total)?;
        Ok(Self {
            gamma_gas: gas,
            gamma_rec: rec,
            gamma_phase: phase,
            gamma_int: [T::zero(); 3],
            n_phase: T::zero(),
            n_int: T::zero(),
            c_pp: T::zero(),
            c_qq: T::zero(),
            gamma_total: total,
            cooperativity: cooperativity(g, kappa, total)?,
            t_trap: T::one() / total,
            n_osc: omega_x / total,
        })
    }
}

/// Full budget for the configured experiment.
pub fn total_budget<T: Real>(cfg: &ExperimentConfig<T>, include_phase: bool) -> Result<HeatingBudget<T>> {
    let k = &cfg.constants;
    let omega_x = cfg.omega_x();
    let gas = gas_heating(
        k,
        cfg.environment.pressure,
        cfg.environment.temperature,
        cfg.environment.gas_molecule_mass,
        cfg.particle.radius(),
        cfg.mass(),
        omega_x,
    )?;
    let rec = recoil_heating(k, &cfg.trap, &cfg.particle, Axis::X)?;
    let phase = if include_phase { cfg.drive.phase_heating } else { T::zero() };
    let mut b = HeatingBudget::from_rates(
        gas.heating,
        rec,
        phase,
        cfg.drive.coupling_x,
        cfg.cavity.kappa,
        omega_x,
    )?;
    let n_phot = intracavity_photons(
        cfg.drive.drive_amplitude,
        cfg.cavity.kappa,
        cfg.drive.detuning,
        cfg.drive.particle_position,
        cfg.trap.wavenumber(),
    )?;
    b.n_phase = phase_noise_phonons(n_phot, cfg.cavity.kappa, cfg.drive.phase_noise_psd)?;
    for (i, &w) in cfg.trap.omega_mech.iter().enumerate() {
        let nu = ordinary(w);
        b.gamma_int[i] = intensity_noise_damping(nu, cfg.drive.rin.at(T::of(2.0) * nu))?;
    }
    b.n_int = cfg.drive.n_int;
    b.c_pp = cfg.drive.c_pp;
    b.c_qq = cfg.drive.c_qq;
    Ok(b)
}
