use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity::cavity_response;
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::physpar::ExperimentConfig;
use crate::specgen::PsdTrace;
use crate::thermo::SidebandFit;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupationMethod {
    JointFit,
    MaskedFit,
    BandPower,
    WorstCase,
    RateRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationResult<T> {
    pub n: T,
    /// Total standard error.
    pub sigma_n: T,
    /// Part of `sigma_n` from the spectrum alone.
    pub sigma_stat: T,
    /// Part of `sigma_n` from κ and Δ.
    pub sigma_calibration: T,
    pub method: OccupationMethod,
    pub low_confidence: bool,
    pub inputs_hash: String,
}

/// Cavity linewidth and detuning with their standard errors, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCalibration<T> {
    pub kappa: T,
    pub kappa_sigma: T,
    pub delta: T,
    pub delta_sigma: T,
}

impl<T: Real> EnvelopeCalibration<T> {
    pub fn from_config(cfg: &ExperimentConfig<T>) -> Self {
        Self {
            kappa: cfg.cavity.kappa,
            kappa_sigma: cfg.cavity.kappa_sigma,
            delta: cfg.drive.detuning,
            delta_sigma: cfg.drive.detuning_sigma,
        }
    }

    /// Envelope ratio R = T(Δ,Ω)/T(Δ,−Ω).
    pub fn envelope_ratio(&self, omega: T) -> Result<T> {
        Ok(cavity_response(self.kappa, self.delta, omega)? / cavity_response(self.kappa, self.delta, -omega)?)
    }

    fn ln_ratio_gradient(&self, omega: T) -> Result<(T, T, T)> {
        let h = T::of(1e-6);
        let ln_r = |k: T, d: T, w: T| -> Result<T> {
            let c = Self { kappa: k, delta: d, ..*self };
            Ok(c.envelope_ratio(w)?.ln())
        };
        let step = |x: T| x.abs().max(self.kappa) * h;
        let (sk, sd, sw) = (step(self.kappa), step(self.delta), step(omega));
        let dk = (ln_r(self.kappa + sk, self.delta, omega)? - ln_r(self.kappa - sk, self.delta, omega)?) / (sk * T::of(2.0));
        let dd = (ln_r(self.kappa, self.delta + sd, omega)? - ln_r(self.kappa, self.delta - sd, omega)?) / (sd * T::of(2.0));
        let dw = (ln_r(self.kappa, self.delta, omega + sw)? - ln_r(self.kappa, self.delta, omega - sw)?) / (sw * T::of(2.0));
        Ok((dk, dd, dw))
    }
}

/// n from the corrected ratio ρ = n/(n+1).
pub fn occupation_from_ratio<T: Real>(ratio: T, envelope_ratio: T) -> Result<T> {
    require_non_negative("occupation_from_ratio", "ratio", ratio)?;
    require_positive("occupation_from_ratio", "envelope_ratio", envelope_ratio)?;
    let rho = ratio / envelope_ratio;
    if !(rho < T::one()) {
        return Err(Error::UnphysicalAsymmetry {
            corrected_ratio: rho.as_f64(),
        });
    }
    Ok(rho / (T::one() - rho))
}

/// Forward rule a_AS/a_S = [n/(n+1)]·T(Δ,Ω)/T(Δ,−Ω).
pub fn asymmetry_ratio<T: Real>(n: T, envelope_ratio: T) -> T {
    n / (n + T::one()) * envelope_ratio
}

/// First 16 hex digits of the SHA-256 over the trace bins.
pub fn psd_hash<T: Real>(psd: &PsdTrace<T>) -> String {
    let mut h = Sha256::new();
    for (f, s) in psd.freq.iter().zip(&psd.psd) {
        h.update(f.as_f64().to_le_bytes());
        h.update(s.as_f64().to_le_bytes());
    }
    h.update((psd.n_avg as u64).to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

// σ_n from var(ln ρ) split into spectrum and calibration parts.
fn split_sigma<T: Real>(n: T, var_stat: T, var_cal: T) -> (T, T, T) {
    // dn/d ln ρ = ρ/(1−ρ)² = n(n+1).
    let s = n * (n + T::one());
    let stat = s * var_stat.max(T::zero()).sqrt();
    let cal = s * var_cal.max(T::zero()).sqrt();
    (stat.hypot(cal), stat, cal)
}

/// Inverts the fitted amplitude ratio for n with first-order propagation of
/// the fit covariance (a_S, a_AS, Ω_x) and of κ, Δ.
pub fn occupation_from_asymmetry<T: Real>(
    fit: &SidebandFit<T>,
    cal: &EnvelopeCalibration<T>,
    method: OccupationMethod,
    inputs_hash: impl Into<String>,
) -> Result<OccupationResult<T>> {
    let (a_s, a_as, omega) = (fit.x.a_s, fit.x.a_as, fit.x.omega);
    require_positive("occupation_from_asymmetry", "a_S", a_s)?;
    require_non_negative("occupation_from_asymmetry", "a_AS", a_as)?;
    let big_r = cal.envelope_ratio(omega)?;
    let n = occupation_from_ratio(a_as / a_s, big_r)?;
    let (dk, dd, dw) = cal.ln_ratio_gradient(omega)?;
    let v = &fit.covariance;
    let var_stat = if a_as > T::zero() {
        // ln ρ = ln a_AS − ln a_S − ln R(Ω).
        let g = [-T::one() / a_s, T::one() / a_as, -dw];
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc += g[i] * g[j] * v[(i, j)];
            }
        }
        acc
    } else {
        T::zero()
    };
    let var_cal = (dk * cal.kappa_sigma).sq() + (dd * cal.delta_sigma).sq();
    let (sigma_n, sigma_stat, sigma_calibration) = if a_as > T::zero() {
        split_sigma(n, var_stat, var_cal)
    } else {
        // At n = 0 only the linear term survives: dn = dρ.
        let s = v[(1, 1)].max(T::zero()).sqrt() / (a_s * big_r);
        (s, s, T::zero())
    };
    Ok(OccupationResult {
        n,
        sigma_n,
        sigma_stat,
        sigma_calibration,
        method,
        low_confidence: fit.low_confidence,
        inputs_hash: inputs_hash.into(),
    })
}

/// Integrated excess Σ(S − 1)·δω over |ω| ∈ band on one side, with its
/// standard error from S/√n_avg per bin.
pub fn band_area<T: Real>(psd: &PsdTrace<T>, band: (T, T), positive: bool, mask: &[(T, T)]) -> (T, T, usize) {
    let dw = psd.resolution_bw;
    let root_n = psd.n_avg_eff().sqrt();
    let (mut area, mut var, mut count) = (T::zero(), T::zero(), 0usize);
    for i in psd.band_indices(band.0, band.1, positive) {
        let a = psd.freq[i].abs();
        if mask.iter().any(|&(lo, hi)| a >= lo && a <= hi) {
            continue;
        }
        area += (psd.psd[i] - T::one()) * dw;
        var += (psd.psd[i] / root_n * dw).sq();
        count += 1;
    }
    (area, var.sqrt(), count)
}

/// Occupation from integrated sideband areas over |ω| bands, corrected by
/// the cavity envelope at `omega_x`.
///
/// A non-positive anti-Stokes area gives n = 0 with the low-confidence flag;
/// a non-positive Stokes area cannot be inverted and is a fit error.
#[allow(clippy::too_many_arguments)]
pub fn band_power_occupation<T: Real>(
    psd: &PsdTrace<T>,
    stokes_band: (T, T),
    antistokes_band: (T, T),
    mask: &[(T, T)],
    cal: &EnvelopeCalibration<T>,
    omega_x: T,
    method: OccupationMethod,
) -> Result<OccupationResult<T>> {
    psd.validate()?;
    let (a_s, s_s, n_s) = band_area(psd, stokes_band, false, mask);
    let (a_as, s_as, n_as) = band_area(psd, antistokes_band, true, mask);
    if n_s == 0 || n_as == 0 {
        return Err(Error::domain("band_power_occupation", "a band contains no bins"));
    }
    if !(a_s > T::zero()) {
        return Err(Error::Fit {
            target: "band power".into(),
            reason: format!("Stokes area {:e} is not positive", a_s.as_f64()),
        });
    }
    let two = T::of(2.0);
    let low_confidence = a_s < two * s_s || a_as < two * s_as;
    let big_r = cal.envelope_ratio(omega_x)?;
    let a_as_c = a_as.max(T::zero());
    let n = occupation_from_ratio(a_as_c / a_s, big_r)?;
    let (dk, dd, _) = cal.ln_ratio_gradient(omega_x)?;
    let var_cal = (dk * cal.kappa_sigma).sq() + (dd * cal.delta_sigma).sq();
    let (sigma_n, sigma_stat, sigma_calibration) = if a_as_c > T::zero() {
        let var_stat = (s_s / a_s).sq() + (s_as / a_as_c).sq();
        split_sigma(n, var_stat, var_cal)
    } else {
        let s = s_as / (a_s * big_r);
        (s, s, T::zero())
    };
    Ok(OccupationResult {
        n,
        sigma_n,
        sigma_stat,
        sigma_calibration,
        method,
        low_confidence,
        inputs_hash: psd_hash(psd),
    })
}

/// Worst case: full-area integration over |ω| ∈ band on both sides,
/// absorbing every mode inside it.
pub fn worst_case_occupation<T: Real>(
    psd: &PsdTrace<T>,
    band: (T, T),
    cal: &EnvelopeCalibration<T>,
    omega_x: T,
) -> Result<OccupationResult<T>> {
    band_power_occupation(psd, band, band, &[], cal, omega_x, OccupationMethod::WorstCase)
}

/// Rate-balance cross-check n = (Γ_gas + Γ_rec)/γ_x; each input carries its
/// standard error.
pub fn crosscheck_occupation<T: Real>(
    gamma_gas: (T, T),
    gamma_rec: (T, T),
    gamma_x: (T, T),
) -> Result<OccupationResult<T>> {
    require_non_negative("crosscheck_occupation", "gamma_gas", gamma_gas.0)?;
    require_non_negative("crosscheck_occupation", "gamma_rec", gamma_rec.0)?;
    require_positive("crosscheck_occupation", "gamma_x", gamma_x.0)?;
    let heat = gamma_gas.0 + gamma_rec.0;
    let n = heat / gamma_x.0;
    let var = (gamma_gas.1.sq() + gamma_rec.1.sq()) / gamma_x.0.sq() + (n * gamma_x.1 / gamma_x.0).sq();
    let sigma = var.sqrt();
    Ok(OccupationResult {
        n,
        sigma_n: sigma,
        sigma_stat: sigma,
        sigma_calibration: T::zero(),
        method: OccupationMethod::RateRatio,
        low_confidence: false,
        inputs_hash: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::angular;
    use crate::thermo::SidebandPeak;
    use nalgebra::DMatrix;

    fn default_cal() -> EnvelopeCalibration<f64> {
        EnvelopeCalibration {
            kappa: angular(193e3),
            kappa_sigma: angular(4e3),
            delta: angular(315e3),
            delta_sigma: angular(10e3),
        }
    }

    fn fit_with(a_s: f64, a_as: f64) -> SidebandFit<f64> {
        SidebandFit {
            x: SidebandPeak { omega: angular(305e3), gamma: angular(48e3), a_s, a_as },
            y: None,
            covariance: DMatrix::from_diagonal_element(4, 4, 1e-6),
            reduced_chi2: 1.0,
            n_points: 100,
            low_confidence: false,
            mask: vec![],
        }
    }

    #[test]
    fn measured_ratio_inverts_to_occupation() {
        let cal = default_cal();
        let r = asymmetry_ratio(0.43, cal.envelope_ratio(angular(305e3)).unwrap());
        assert!((r - 12.6).abs() < 0.1);
        let res = occupation_from_asymmetry(&fit_with(1.0, r), &cal, OccupationMethod::JointFit, "").unwrap();
        assert!((res.n - 0.43).abs() < 1e-12);
        // Calibration alone: κ ± 4 kHz and Δ ± 10 kHz.
        assert!(res.sigma_calibration > 0.01 && res.sigma_calibration < 0.04, "{}", res.sigma_calibration);
    }

    #[test]
    fn ground_state_and_detailed_balance() {
        let cal = default_cal();
        let res = occupation_from_asymmetry(&fit_with(1.0, 0.0), &cal, OccupationMethod::JointFit, "").unwrap();
        assert_eq!(res.n, 0.0);
        assert!(res.sigma_n > 0.0);
        // Equal raw powers: n = 1/(R − 1) ≈ (κ/4Ω)².
        let big_r = cal.envelope_ratio(angular(305e3)).unwrap();
        assert!((big_r - 41.8).abs() < 0.1, "R = {big_r}");
        let n = occupation_from_ratio(1.0, big_r).unwrap();
        assert!((n - 1.0 / (big_r - 1.0)).abs() < 1e-15);
        assert!((n - 0.0245).abs() < 0.0005);
    }

    #[test]
    fn unphysical_ratio_is_rejected() {
        let cal = default_cal();
        let big_r = cal.envelope_ratio(angular(305e3)).unwrap();
        assert!(matches!(occupation_from_ratio(big_r * 1.01, big_r), Err(Error::UnphysicalAsymmetry { .. })));
    }

    #[test]
    fn rate_ratio_crosscheck() {
        let r: OccupationResult<f64> = crosscheck_occupation(
            (angular(16.1e3), angular(1.2e3)),
            (angular(6e3), angular(1e3)),
            (angular(48e3), angular(3e3)),
        )
        .unwrap();
        assert!((r.n - 0.46).abs() < 0.005, "n = {}", r.n);
        assert!((r.n - 0.43).abs() <= 2.0 * (r.sigma_n + 0.03));
        assert_eq!(crosscheck_occupation((0.0, 0.0), (0.0, 0.0), (1.0, 0.0)).unwrap().n, 0.0);
        assert!(crosscheck_occupation((1.0, 0.0), (1.0, 0.0), (0.0, 0.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inversion_round_trip(n in 0.0f64..1e3, d_k in 50.0f64..900.0, w_k in 100.0f64..900.0) {
                let cal = EnvelopeCalibration { delta: angular(d_k * 1e3), ..default_cal() };
                let big_r = cal.envelope_ratio(angular(w_k * 1e3)).unwrap();
                let back = occupation_from_ratio(asymmetry_ratio(n, big_r), big_r).unwrap();
                prop_assert!((back - n).abs() <= 1e-10 * n);
            }
        }
    }
}
