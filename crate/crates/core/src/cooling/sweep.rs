use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooling::{steady_state_covariance, LinearModel, ModelParams};
use crate::error::{Error, Result};
use crate::physpar::ExperimentConfig;
use crate::Real;

/// Pressure of the gas-negligible "ultimate" curve, Pa (10⁻⁸ mbar).
pub const ULTIMATE_PRESSURE_PA: f64 = 1e-6;

/// One detuning of the sweep; `None` marks an unstable (gap) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    /// rad/s
    pub delta: T,
    pub n_low: Option<T>,
    pub n_high: Option<T>,
    pub n_ultimate: Option<T>,
    pub stable: bool,
}

fn occupation<T: Real>(cfg: &ExperimentConfig<T>, pressure: T, delta: T) -> Result<Option<T>> {
    let params = ModelParams::from_config(cfg, pressure, delta)?;
    match steady_state_covariance(&LinearModel::new(params)?) {
        Ok(s) => Ok(Some(s.n_x)),
        Err(Error::Instability { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Steady-state occupation band over `delta_grid` (rad/s) between the two
/// pressure extremes (Pa), plus the ultimate curve.
pub fn detuning_sweep<T: Real>(
    cfg: &ExperimentConfig<T>,
    delta_grid: &[T],
    pressure_range: (T, T),
) -> Result<Vec<SweepPoint<T>>> {
    if delta_grid.is_empty() {
        return Err(Error::domain("detuning_sweep", "empty detuning grid"));
    }
    let (p_lo, p_hi) = pressure_range;
    if !(p_lo > T::zero() && p_lo <= p_hi) {
        return Err(Error::domain("detuning_sweep", "pressure range must satisfy 0 < low <= high"));
    }
    let ultimate = T::of(ULTIMATE_PRESSURE_PA);
    delta_grid
        .par_iter()
        .map(|&delta| {
            let a = occupation(cfg, p_lo, delta)?;
            let b = occupation(cfg, p_hi, delta)?;
            let u = occupation(cfg, ultimate, delta)?;
            let (n_low, n_high) = match (a, b) {
                (Some(a), Some(b)) => (Some(a.min(b)), Some(a.max(b))),
                _ => (None, None),
            };
            if n_low.is_none() {
                log::debug!("unstable sweep point at Δ = {:e} rad/s", delta.as_f64());
            }
            Ok(SweepPoint {
                delta,
                n_low,
                n_high,
                n_ultimate: u,
                stable: n_low.is_some(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;
    use crate::scalar::angular;
    use crate::specgen::uniform_grid;

    #[test]
    fn band_shape() {
        let cfg: ExperimentConfig<f64> = ConfigFile::paper_defaults().to_experiment().unwrap();
        let grid = uniform_grid(angular(100e3), angular(1525e3), 286);
        let pts = detuning_sweep(&cfg, &grid, (0.7e-4, 1.3e-4)).unwrap();
        let step = grid[1] - grid[0];
        let best = pts
            .iter()
            .filter(|p| p.stable)
            .min_by(|a, b| a.n_low.partial_cmp(&b.n_low).unwrap())
            .unwrap();
        assert!((best.delta - cfg.omega_x()).abs() <= step * 1.0001, "min at {}", best.delta / angular(1.0));
        let at315 = pts.iter().find(|p| (p.delta - angular(315e3)).abs() < 1.0).unwrap();
        assert!(at315.n_low.unwrap() < 0.43 && 0.43 < at315.n_high.unwrap());
        assert!(at315.n_ultimate.unwrap() < at315.n_low.unwrap());
        // Occupation grows beyond the optimum out to 5Ω.
        let beyond: Vec<f64> = pts.iter().filter(|p| p.delta > angular(400e3)).map(|p| p.n_low.unwrap()).collect();
        assert!(beyond.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn negative_detuning_gives_gaps() {
        let cfg: ExperimentConfig<f64> = ConfigFile::paper_defaults().to_experiment().unwrap();
        let pts = detuning_sweep(&cfg, &[angular(-305e3)], (1e-4, 1e-4)).unwrap();
        assert!(!pts[0].stable && pts[0].n_low.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg: ExperimentConfig<f64> = ConfigFile::paper_defaults().to_experiment().unwrap();
        assert!(detuning_sweep(&cfg, &[], (1e-4, 1e-4)).is_err());
        assert!(detuning_sweep(&cfg, &[1.0], (2e-4, 1e-4)).is_err());
    }
}
