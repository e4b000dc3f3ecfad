//! Free-fall coherence forecast from the measured heating rates.

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::physpar::{thermal_de_broglie, ExperimentConfig, PhysicalConstants};
use crate::Real;

/// Environment temperature below which blackbody emission stops limiting
/// the coherence length; quoted, not derived.
pub const CRYOGENIC_THRESHOLD_K: f64 = 130.0;

const PA_PER_MBAR: f64 = 100.0;

/// Localization parameter Λ = Γ/x_zpf² (Γ in rad/s), Hz/m².
pub fn localization_parameter<T: Real>(gamma: T, x_zpf: T) -> Result<T> {
    require_positive("localization_parameter", "gamma", gamma)?;
    require_positive("localization_parameter", "x_zpf", x_zpf)?;
    Ok(gamma / x_zpf.sq())
}

/// Short-distance limits of the localization dynamics:
/// t_max = (3m(2n̄+1)/(2Λℏω))^(1/3) and ξ_max = √2·(2ℏω/(3mΛ²(2n̄+1)))^(1/6).
pub fn short_distance_expansion<T: Real>(
    k: &PhysicalConstants<T>,
    lambda: T,
    mass: T,
    omega: T,
    n_bar: T,
) -> Result<(T, T)> {
    require_positive("short_distance_expansion", "lambda", lambda)?;
    require_positive("short_distance_expansion", "mass", mass)?;
    require_positive("short_distance_expansion", "omega", omega)?;
    require_non_negative("short_distance_expansion", "n_bar", n_bar)?;
    let three = T::of(3.0);
    let q = three * mass * (T::of(2.0) * n_bar + T::one());
    let e = k.hbar * omega;
    // Λ enters through its cube root: Λ² overflows f32.
    let l3 = lambda.cbrt();
    let t_max = (q / (T::of(2.0) * e)).cbrt() / l3;
    let xi_max = T::of(2.0).sqrt() * (T::of(2.0) * e / q).powf(T::one() / T::of(6.0)) / l3;
    Ok((t_max, xi_max))
}

/// Long-distance saturated decoherence rate Γ_sat = λ_th²·Λ_gas, Hz.
pub fn saturation_rate<T: Real>(lambda_gas: T, lambda_th: T) -> Result<T> {
    require_positive("saturation_rate", "lambda_gas", lambda_gas)?;
    require_positive("saturation_rate", "lambda_th", lambda_th)?;
    Ok(lambda_th.sq() * lambda_gas)
}

/// Free wavepacket width σ(t) = x_zpf·(1 + Ω·t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketExpansion<T> {
    pub x_zpf: T,
    /// rad/s
    pub omega: T,
}

impl<T: Real> WavepacketExpansion<T> {
    pub fn sigma_at(&self, t: T) -> T {
        self.x_zpf * (T::one() + self.omega * t)
    }

    /// Time to reach `sigma`; zero at or below x_zpf.
    pub fn time_to(&self, sigma: T) -> T {
        ((sigma / self.x_zpf - T::one()) / self.omega).max(T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackbodyLambda<T> {
    pub scattering: T,
    pub emission: T,
    pub absorption: T,
    pub total: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeFallReport<T> {
    /// Gas-only localization parameter, Hz/m².
    pub lambda_gas: T,
    /// From the total heating rate, Hz/m².
    pub lambda_total: T,
    pub lambda_bb: BlackbodyLambda<T>,
    pub n_bar: T,
    /// s
    pub t_max: T,
    /// m
    pub xi_max: T,
    /// Hz
    pub gamma_sat: T,
    /// m
    pub lambda_th: T,
    /// m
    pub target_sigma: T,
    /// s
    pub tau_target: T,
    /// Hz; absent when the target needs no expansion.
    pub required_rate: Option<T>,
    pub current_pressure_pa: T,
    pub current_pressure_mbar: T,
    pub required_pressure_pa: T,
    pub required_pressure_mbar: T,
    pub t_max_bb: T,
    pub xi_max_bb: T,
    /// Blackbody Λ exceeds the gas Λ scaled to the required pressure.
    pub blackbody_dominates: bool,
    pub sigma_of_t: WavepacketExpansion<T>,
    pub cryogenic_threshold_k: T,
}

/// Required pressure and coherence limits for free expansion to
/// `target_sigma` (m). Uses the measured heating rates and n̄ from the config.
pub fn free_fall_plan<T: Real>(cfg: &ExperimentConfig<T>, target_sigma: T) -> Result<FreeFallReport<T>> {
    let k = &cfg.constants;
    let x_zpf = cfg.x_zpf();
    let omega = cfg.omega_x();
    if !(target_sigma >= x_zpf) || !target_sigma.is_finite() {
        return Err(Error::domain(
            "free_fall_plan",
            format!(
                "target σ = {:e} m is below x_zpf = {:e} m",
                target_sigma.as_f64(),
                x_zpf.as_f64()
            ),
        ));
    }
    let n_bar = cfg.measured.occupation;
    let lambda_gas = localization_parameter(cfg.measured.heating_gas, x_zpf)?;
    let lambda_total = localization_parameter(cfg.measured.heating_total, x_zpf)?;
    let (t_max, xi_max) = short_distance_expansion(k, lambda_total, cfg.mass(), omega, n_bar)?;
    let lambda_th = thermal_de_broglie(k, cfg.environment.gas_molecule_mass, cfg.environment.temperature)?;
    let gamma_sat = saturation_rate(lambda_gas, lambda_th)?;

    let sigma_of_t = WavepacketExpansion { x_zpf, omega };
    let tau_target = sigma_of_t.time_to(target_sigma);
    let p = cfg.environment.pressure;
    let (required_rate, required_pressure) = if tau_target > T::zero() {
        let rate = T::one() / tau_target;
        (Some(rate), (p * rate / gamma_sat).min(p))
    } else {
        (None, p)
    };

    let bb = &cfg.blackbody;
    let lambda_bb = BlackbodyLambda {
        scattering: bb.lambda_scattering,
        emission: bb.lambda_emission,
        absorption: bb.lambda_absorption,
        total: bb.total(),
    };
    let (t_max_bb, xi_max_bb) = short_distance_expansion(k, lambda_bb.total, cfg.mass(), omega, n_bar)?;
    let blackbody_dominates = lambda_bb.total > lambda_gas * required_pressure / p;
    let mbar = T::of(PA_PER_MBAR);
    Ok(FreeFallReport {
        lambda_gas,
        lambda_total,
        lambda_bb,
        n_bar,
        t_max,
        xi_max,
        gamma_sat,
        lambda_th,
        target_sigma,
        tau_target,
        required_rate,
        current_pressure_pa: p,
        current_pressure_mbar: p / mbar,
        required_pressure_pa: required_pressure,
        required_pressure_mbar: required_pressure / mbar,
        t_max_bb,
        xi_max_bb,
        blackbody_dominates,
        sigma_of_t,
        cryogenic_threshold_k: T::of(CRYOGENIC_THRESHOLD_K),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;
    use crate::scalar::angular;

    fn cfg<T: Real>() -> ExperimentConfig<T> {
        ConfigFile::paper_defaults().to_experiment().unwrap()
    }

    #[test]
    fn localization_values() {
        let l: f64 = localization_parameter(angular(20.6e3), 3.1e-12).unwrap();
        assert!((l / 1.35e28 - 1.0).abs() < 0.01, "Λ = {l:e}");
        let lg: f64 = localization_parameter(angular(15e3), 3.1e-12).unwrap();
        assert!((lg / 9.8e27 - 1.0).abs() < 0.01, "Λ_gas = {lg:e}");
        let l2: f64 = localization_parameter(angular(41.2e3), 3.1e-12).unwrap();
        assert!((l2 / l - 2.0).abs() < 1e-12);
        assert!(localization_parameter(0.0, 1e-12).is_err());
    }

    #[test]
    fn short_distance_reference_values() {
        let c = cfg::<f64>();
        let l = localization_parameter(c.measured.heating_total, c.x_zpf()).unwrap();
        let (t, xi) = short_distance_expansion(&c.constants, l, c.mass(), c.omega_x(), 0.43).unwrap();
        assert!((t / 1.42e-6 - 1.0).abs() < 0.03, "t_max = {t:e}");
        assert!((xi / 10.2e-12 - 1.0).abs() < 0.03, "ξ_max = {xi:e}");
        let (t8, _) = short_distance_expansion(&c.constants, 8.0 * l, c.mass(), c.omega_x(), 0.43).unwrap();
        assert!((t / t8 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_identity() {
        let c = cfg::<f64>();
        let (l, m, w, n) = (3.7e25, c.mass(), c.omega_x(), 0.9);
        let (t, _) = short_distance_expansion(&c.constants, l, m, w, n).unwrap();
        let lhs = t.powi(3) * 2.0 * l * c.constants.hbar * w;
        assert!((lhs / (3.0 * m * (2.0 * n + 1.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_and_required_rate() {
        let c = cfg::<f64>();
        let r = free_fall_plan(&c, 71.5e-9).unwrap();
        assert!((r.gamma_sat / 3.6e6 - 1.0).abs() < 0.15, "Γ_sat = {:e}", r.gamma_sat);
        assert!((r.tau_target / 12e-3 - 1.0).abs() < 0.1, "τ = {}", r.tau_target);
        let rate = r.required_rate.unwrap();
        assert!((rate / 84.0 - 1.0).abs() < 0.05, "rate = {rate}");
        let ratio = r.required_pressure_mbar / 2e-11;
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "p = {:e} mbar", r.required_pressure_mbar);
        assert!(!r.blackbody_dominates);
        assert!((r.required_pressure_pa / r.required_pressure_mbar - 100.0).abs() < 1e-9);
    }

    #[test]
    fn saturation_linear_in_pressure() {
        let l: f64 = 9.8e27;
        let a = saturation_rate(l, 19e-12).unwrap();
        let b = saturation_rate(2.0 * l, 19e-12).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn blackbody_limits() {
        let c = cfg::<f64>();
        let r = free_fall_plan(&c, 71.5e-9).unwrap();
        assert_eq!(r.lambda_bb.total, r.lambda_bb.scattering + r.lambda_bb.emission + r.lambda_bb.absorption);
        assert!((r.t_max_bb / 0.55e-3 - 1.0).abs() < 0.1, "t_max_bb = {:e}", r.t_max_bb);
        let f = r.xi_max_bb / 2e-9;
        assert!((1.0 / 2.5..=2.5).contains(&f), "ξ_max_bb = {:e}", r.xi_max_bb);
    }

    #[test]
    fn degenerate_and_invalid_targets() {
        let c = cfg::<f64>();
        let r = free_fall_plan(&c, c.x_zpf()).unwrap();
        assert_eq!(r.tau_target, 0.0);
        assert!(r.required_rate.is_none());
        assert_eq!(r.required_pressure_pa, c.environment.pressure);
        assert!(matches!(free_fall_plan(&c, 0.5 * c.x_zpf()), Err(Error::Domain { .. })));
    }

    #[test]
    fn f32_reference_values() {
        let c = cfg::<f32>();
        let r = free_fall_plan(&c, 71.5e-9f32).unwrap();
        assert!((r.t_max / 1.42e-6 - 1.0).abs() < 0.03, "t_max = {:e}", r.t_max);
        assert!((r.xi_max / 10.2e-12 - 1.0).abs() < 0.03, "ξ_max = {:e}", r.xi_max);
        assert!((r.gamma_sat / 3.6e6 - 1.0).abs() < 0.15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expansion_within_factor_two(log_l in 20.0f64..29.0, n in 0.0f64..1.0) {
                let c = cfg::<f64>();
                let (t, xi) = short_distance_expansion(&c.constants, 10f64.powf(log_l), c.mass(), c.omega_x(), n).unwrap();
                let s = WavepacketExpansion { x_zpf: c.x_zpf(), omega: c.omega_x() }.sigma_at(t);
                prop_assert!((0.5..=2.0).contains(&(s / xi)), "σ/ξ = {}", s / xi);
            }

            #[test]
            fn larger_target_never_needs_higher_pressure(a in 1e-11f64..1e-6, b in 1e-11f64..1e-6) {
                let c = cfg::<f64>();
                let (lo, hi) = (a.min(b).max(c.x_zpf()), a.max(b).max(c.x_zpf()));
                let p_lo = free_fall_plan(&c, lo).unwrap().required_pressure_pa;
                let p_hi = free_fall_plan(&c, hi).unwrap().required_pressure_pa;
                prop_assert!(p_hi <= p_lo);
            }
        }
    }
}
