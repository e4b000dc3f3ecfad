use serde::{Deserialize, Serialize};

use crate::error::{require_non_negative, require_positive, Result};
use crate::physpar::{Axis, ExperimentConfig};
use crate::specgen::{heterodyne_model, uniform_grid, ModeParams, PsdTrace, SpectrumModelParams};
use crate::Real;

/// Frequency grid of a synthesized heterodyne spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisGrid<T> {
    /// Half-span |ω| covered on each side of the carrier, rad/s.
    pub span: T,
    /// Bin spacing, rad/s.
    pub rbw: T,
}

impl<T: Real> Default for SynthesisGrid<T> {
    fn default() -> Self {
        Self {
            span: T::two_pi_s() * T::of(600e3),
            rbw: T::two_pi_s() * T::of(1e3),
        }
    }
}

impl<T: Real> SynthesisGrid<T> {
    pub fn points(&self) -> Result<Vec<T>> {
        require_positive("SynthesisGrid", "span", self.span)?;
        require_positive("SynthesisGrid", "rbw", self.rbw)?;
        let half = (self.span / self.rbw).floor().to_usize().unwrap_or(0);
        Ok(uniform_grid(-self.rbw * T::from_usize_lossy(half), self.rbw * T::from_usize_lossy(half), 2 * half + 1))
    }
}

/// Sideband scattering weight 2η·4g²/κ of the cavity-axis mode.
pub fn sideband_weight<T: Real>(cfg: &ExperimentConfig<T>) -> T {
    T::of(8.0) * cfg.detection.efficiency * cfg.drive.coupling_x.sq() / cfg.cavity.kappa
}

/// Heterodyne model of the configured experiment with the x mode at
/// occupation `n_x`; the y pair is added when `include_y` is set.
pub fn experiment_model<T: Real>(cfg: &ExperimentConfig<T>, n_x: T, include_y: bool) -> Result<SpectrumModelParams<T>> {
    require_non_negative("experiment_model", "n_x", n_x)?;
    let det = &cfg.detection;
    let w = sideband_weight(cfg);
    let mut modes = vec![ModeParams {
        omega: cfg.trap.omega(Axis::X),
        gamma: det.sideband_linewidth,
        n_occ: n_x,
        weight: w,
    }];
    if include_y {
        modes.push(ModeParams {
            omega: cfg.trap.omega(Axis::Y),
            gamma: det.y_linewidth,
            n_occ: det.y_occupation,
            weight: w * det.y_weight_ratio,
        });
    }
    let params = SpectrumModelParams {
        modes,
        kappa: cfg.cavity.kappa,
        delta: cfg.drive.detuning,
        classical_floor: None,
    };
    params.validate()?;
    Ok(params)
}

/// Noiseless experiment spectrum on `grid`, tagged with the heterodyne
/// carrier from the config.
pub fn experiment_spectrum<T: Real>(
    cfg: &ExperimentConfig<T>,
    n_x: T,
    include_y: bool,
    grid: &SynthesisGrid<T>,
) -> Result<PsdTrace<T>> {
    let model = experiment_model(cfg, n_x, include_y)?;
    let mut trace = heterodyne_model(&model, &grid.points()?)?;
    trace.het_freq = Some(cfg.drive.het_freq);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;

    #[test]
    fn grid_is_symmetric_and_contains_zero() {
        let g = SynthesisGrid::<f64>::default().points().unwrap();
        assert_eq!(g.len(), 1201);
        assert_eq!(g[600], 0.0);
        assert!((g[0] + g[1200]).abs() < 1e-6);
    }

    #[test]
    fn y_mode_is_optional() {
        let cfg: ExperimentConfig<f64> = ConfigFile::paper_defaults().to_experiment().unwrap();
        assert_eq!(experiment_model(&cfg, 0.43, false).unwrap().modes.len(), 1);
        let m = experiment_model(&cfg, 0.43, true).unwrap();
        assert_eq!(m.modes.len(), 2);
        assert!(m.modes[1].weight < m.modes[0].weight);
    }
}
