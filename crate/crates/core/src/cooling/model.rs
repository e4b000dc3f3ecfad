use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::budget::{gas_heating, recoil_heating};
use crate::cooling::lyapunov::{lyapunov_residual, solve_lyapunov};
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::physpar::{thermal_occupation, Axis, ExperimentConfig};
use crate::Real;

/// Inputs of the linearized optomechanical model.
///
/// Quadratures are dimensionless with [q, p] = i, so x = √2·x_zpf·q and the
/// cavity field is a = (X + iY)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// rad/s
    pub omega: T,
    /// Mechanical (gas) damping γ_m, s⁻¹.
    pub gamma_m: T,
    /// Bath occupation of the damping reservoir.
    pub n_th: T,
    /// Extra force-noise heating (recoil, phase noise), phonons/s.
    pub gamma_extra: T,
    /// rad/s
    pub kappa: T,
    /// rad/s
    pub delta: T,
    /// rad/s
    pub g: T,
    /// m; 1 gives ⟨x²⟩ in units of x_zpf².
    pub x_zpf: T,
}

impl<T: Real> ModelParams<T> {
    /// Gas damping at `pressure` (Pa) plus x-axis recoil, at detuning `delta`.
    pub fn from_config(cfg: &ExperimentConfig<T>, pressure: T, delta: T) -> Result<Self> {
        let k = &cfg.constants;
        let omega = cfg.omega_x();
        let gas = gas_heating(
            k,
            pressure,
            cfg.environment.temperature,
            cfg.environment.gas_molecule_mass,
            cfg.particle.radius(),
            cfg.mass(),
            omega,
        )?;
        Ok(Self {
            omega,
            gamma_m: gas.damping,
            n_th: thermal_occupation(k, cfg.environment.temperature, omega),
            gamma_extra: recoil_heating(k, &cfg.trap, &cfg.particle, Axis::X)?,
            kappa: cfg.cavity.kappa,
            delta,
            g: cfg.drive.coupling_x,
            x_zpf: cfg.x_zpf(),
        })
    }

    /// Total phonon heating rate γ_m·n_th + Γ_extra.
    pub fn heating_rate(&self) -> T {
        self.gamma_m * self.n_th + self.gamma_extra
    }

    fn validate(&self) -> Result<()> {
        require_positive("LinearModel", "omega", self.omega)?;
        require_non_negative("LinearModel", "gamma_m", self.gamma_m)?;
        require_non_negative("LinearModel", "n_th", self.n_th)?;
        require_non_negative("LinearModel", "gamma_extra", self.gamma_extra)?;
        require_positive("LinearModel", "kappa", self.kappa)?;
        require_non_negative("LinearModel", "g", self.g)?;
        require_positive("LinearModel", "x_zpf", self.x_zpf)?;
        if !self.delta.is_finite() {
            return Err(Error::domain("LinearModel", "delta must be finite"));
        }
        Ok(())
    }
}

/// Drift and diffusion of the state (q, p, X, Y).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T: Real> {
    pub params: ModelParams<T>,
    pub drift: DMatrix<T>,
    pub diffusion: DMatrix<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        let ModelParams {
            omega,
            gamma_m,
            n_th,
            gamma_extra,
            kappa,
            delta,
            g,
            ..
        } = params;
        let z = T::zero();
        let two = T::of(2.0);
        let hk = kappa / two;
        #[rustfmt::skip]
        let drift = DMatrix::from_row_slice(4, 4, &[
            z,          omega,    z,      z,
            -omega,     -gamma_m, -two * g, z,
            z,          z,        -hk,    delta,
            -two * g,   z,        -delta, -hk,
        ]);
        let d_pp = gamma_m * (two * n_th + T::one()) + two * gamma_extra;
        let diffusion = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![z, d_pp, hk, hk]));
        Ok(Self {
            params,
            drift,
            diffusion,
        })
    }

    /// Eigenvalues of the drift matrix as (re, im) pairs.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let scale = self.params.omega;
        (&self.drift / scale)
            .complex_eigenvalues()
            .iter()
            .map(|c| ((c.re * scale).as_f64(), (c.im * scale).as_f64()))
            .collect()
    }

    pub fn is_hurwitz(&self) -> bool {
        self.eigenvalues().iter().all(|&(re, _)| re < 0.0)
    }

    pub fn require_hurwitz(&self) -> Result<()> {
        let ev = self.eigenvalues();
        if ev.iter().all(|&(re, _)| re < 0.0) {
            Ok(())
        } else {
            Err(Error::Instability {
                context: format!(
                    "drift matrix not Hurwitz at Δ = {:.6e} rad/s, g = {:.6e} rad/s",
                    self.params.delta.as_f64(),
                    self.params.g.as_f64()
                ),
                eigenvalues: ev,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T: Real> {
    /// Covariance of (q, p, X, Y).
    pub covariance: DMatrix<T>,
    /// Phonon occupation (V_qq + V_pp − 1)/2.
    pub n_x: T,
    /// ⟨x²⟩ = 2·x_zpf²·V_qq, m².
    pub var_x: T,
    /// ‖A·V + V·Aᵀ + D‖_F / ‖D‖_F.
    pub relative_residual: T,
}

/// Steady-state covariance of a stable linear model.
pub fn steady_state_covariance<T: Real>(model: &LinearModel<T>) -> Result<SteadyState<T>> {
    model.require_hurwitz()?;
    // Time rescaled by Ω keeps the Kronecker system well conditioned.
    let s = model.params.omega;
    let a = &model.drift / s;
    let d = &model.diffusion / s;
    let v = solve_lyapunov(&a, &d)?;
    let rel = lyapunov_residual(&model.drift, &v, &model.diffusion) / model.diffusion.norm().max(T::tiny());
    let n_x = (v[(0, 0)] + v[(1, 1)] - T::one()) / T::of(2.0);
    let var_x = T::of(2.0) * model.params.x_zpf.sq() * v[(0, 0)];
    Ok(SteadyState {
        covariance: v,
        n_x,
        var_x,
        relative_residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;
    use crate::cooling::{predict_occupation, scattering_rates};
    use crate::scalar::angular;

    fn cfg() -> ExperimentConfig<f64> {
        ConfigFile::paper_defaults().to_experiment().unwrap()
    }

    #[test]
    fn decoupled_oscillator_is_thermal() {
        let p: ModelParams<f64> = ModelParams {
            omega: angular(305e3),
            gamma_m: 10.0,
            n_th: 2.05e7,
            gamma_extra: 0.0,
            kappa: angular(193e3),
            delta: angular(315e3),
            g: 0.0,
            x_zpf: 3.1e-12,
        };
        let s = steady_state_covariance(&LinearModel::new(p).unwrap()).unwrap();
        assert!((s.n_x / p.n_th - 1.0).abs() < 1e-9, "n = {}", s.n_x);
    }

    #[test]
    fn default_parameters_bracket_measurement() {
        let c = cfg();
        let n_at = |mbar: f64| {
            let p = ModelParams::from_config(&c, mbar * 100.0, angular(315e3)).unwrap();
            steady_state_covariance(&LinearModel::new(p).unwrap()).unwrap().n_x
        };
        let (lo, mid, hi) = (n_at(0.7e-6), n_at(1e-6), n_at(1.3e-6));
        assert!(lo < 0.43 && 0.43 < hi, "band [{lo}, {hi}]");
        assert!((0.2..=0.6).contains(&mid), "n = {mid}");
    }

    #[test]
    fn heating_side_is_unstable() {
        let c = cfg();
        let p = ModelParams::from_config(&c, 1e-4, angular(-305e3)).unwrap();
        match steady_state_covariance(&LinearModel::new(p).unwrap()) {
            Err(Error::Instability { eigenvalues, .. }) => assert_eq!(eigenvalues.len(), 4),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn weak_coupling_matches_rate_equation() {
        let c = cfg();
        let mut p = ModelParams::from_config(&c, 1e-4, angular(305e3)).unwrap();
        p.g = p.kappa / 10.0;
        let s = steady_state_covariance(&LinearModel::new(p).unwrap()).unwrap();
        let n_rate = predict_occupation(p.heating_rate(), p.g, p.kappa, p.delta, p.omega).unwrap();
        assert!((s.n_x / n_rate - 1.0).abs() < 0.1, "{} vs {}", s.n_x, n_rate);
        let (am, ap) = scattering_rates(p.g, p.kappa, p.delta, p.omega).unwrap();
        assert!(am > ap);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn cooled_residual_and_psd(
                g_frac in 0.01f64..0.4,
                d_frac in 0.6f64..1.6,
                k_frac in 0.2f64..1.0,
                log_gm in -2.0f64..2.0,
            ) {
                let omega = angular(305e3);
                let kappa = k_frac * omega;
                let p = ModelParams {
                    omega,
                    gamma_m: 10f64.powf(log_gm),
                    n_th: 2.05e7,
                    gamma_extra: angular(6e3),
                    kappa,
                    delta: d_frac * omega,
                    g: g_frac * kappa,
                    x_zpf: 1.0,
                };
                let m = LinearModel::new(p).unwrap();
                prop_assume!(m.is_hurwitz());
                let s = steady_state_covariance(&m).unwrap();
                prop_assert!(s.relative_residual <= 1e-10, "residual {}", s.relative_residual);
                let v = &s.covariance;
                prop_assert!((v - v.transpose()).amax() <= 1e-12 * v.amax());
                let ev = v.clone().symmetric_eigenvalues();
                prop_assert!(ev.iter().all(|&e| e >= -1e-9 * v.amax()));
                let dmin = m.diffusion.clone().symmetric_eigenvalues().min();
                prop_assert!(dmin >= 0.0);
            }
        }
    }
}
