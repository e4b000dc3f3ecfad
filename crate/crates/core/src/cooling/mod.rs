//! Steady-state cavity cooling: sideband rates, backaction floor, linear
//! model covariance and the detuning sweep.

mod lyapunov;
mod model;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::Real;

pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use model::{steady_state_covariance, LinearModel, ModelParams, SteadyState};
pub use sweep::{detuning_sweep, SweepPoint, ULTIMATE_PRESSURE_PA};

/// Anti-Stokes and Stokes scattering rates A∓ = g²κ/((κ/2)² + (Δ ∓ Ω)²).
pub fn scattering_rates<T: Real>(g: T, kappa: T, delta: T, omega: T) -> Result<(T, T)> {
    require_non_negative("scattering_rates", "g", g)?;
    require_positive("scattering_rates", "kappa", kappa)?;
    require_positive("scattering_rates", "omega", omega)?;
    let hk2 = (kappa / T::of(2.0)).sq();
    let num = g * g * kappa;
    Ok((num / (hk2 + (delta - omega).sq()), num / (hk2 + (delta + omega).sq())))
}

/// Resolved-sideband backaction floor (κ/4Ω)².
pub fn backaction_limit<T: Real>(kappa: T, omega: T) -> Result<T> {
    require_positive("backaction_limit", "kappa", kappa)?;
    require_positive("backaction_limit", "omega", omega)?;
    Ok((kappa / (T::of(4.0) * omega)).sq())
}

/// Optical spring shift δΩ = −g²[(Δ+Ω)/((κ/2)²+(Δ+Ω)²) + (Δ−Ω)/((κ/2)²+(Δ−Ω)²)].
pub fn optical_spring<T: Real>(g: T, kappa: T, delta: T, omega: T) -> Result<T> {
    require_non_negative("optical_spring", "g", g)?;
    require_positive("optical_spring", "kappa", kappa)?;
    let hk2 = (kappa / T::of(2.0)).sq();
    let (p, m) = (delta + omega, delta - omega);
    Ok(-g * g * (p / (hk2 + p * p) + m / (hk2 + m * m)))
}

/// Rate-equation occupation (Γ_heat + A₊)/(A₋ − A₊).
pub fn predict_occupation<T: Real>(gamma_heat: T, g: T, kappa: T, delta: T, omega: T) -> Result<T> {
    require_non_negative("predict_occupation", "gamma_heat", gamma_heat)?;
    let (am, ap) = scattering_rates(g, kappa, delta, omega)?;
    let damping = am - ap;
    if !(damping > T::zero()) {
        return Err(Error::Instability {
            context: format!("optical damping A₋ − A₊ = {} ≤ 0", damping.as_f64()),
            eigenvalues: Vec::new(),
        });
    }
    Ok((gamma_heat + ap) / damping)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingPoint<T> {
    /// rad/s
    pub delta: T,
    /// A₋ − A₊, s⁻¹.
    pub gamma_opt: T,
    pub a_minus: T,
    pub a_plus: T,
    pub n_min: T,
    pub n_pred: T,
}

impl<T: Real> CoolingPoint<T> {
    pub fn evaluate(gamma_heat: T, g: T, kappa: T, delta: T, omega: T) -> Result<Self> {
        let (a_minus, a_plus) = scattering_rates(g, kappa, delta, omega)?;
        Ok(Self {
            delta,
            gamma_opt: a_minus - a_plus,
            a_minus,
            a_plus,
            n_min: backaction_limit(kappa, omega)?,
            n_pred: predict_occupation(gamma_heat, g, kappa, delta, omega)?,
        })
    }
}

/// Sideband linewidth Γ/n implied by a heating rate and an occupation.
pub fn linewidth_from_balance<T: Real>(gamma_heat: T, n: T) -> Result<T> {
    require_non_negative("linewidth_from_balance", "gamma_heat", gamma_heat)?;
    require_positive("linewidth_from_balance", "n", n)?;
    Ok(gamma_heat / n)
}
