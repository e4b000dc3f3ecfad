use serde::{Deserialize, Serialize};

use crate::cavity::cavity_response;
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::Real;

/// Lorentzian L(x) = (γ/2)/(x² + (γ/2)²); its area is π for any γ.
#[inline]
pub fn lorentzian<T: Real>(x: T, gamma: T) -> T {
    let hw = gamma / T::of(2.0);
    hw / (x * x + hw * hw)
}

/// One motional mode contributing a Stokes/anti-Stokes pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams<T> {
    /// rad/s
    pub omega: T,
    /// Sideband linewidth, rad/s.
    pub gamma: T,
    pub n_occ: T,
    /// Scattering-rate scale, rad/s; the sideband prefactors are
    /// weight·(n+1)·T(Δ,−Ω) and weight·n·T(Δ,Ω).
    pub weight: T,
}

impl<T: Real> ModeParams<T> {
    /// (a_S, a_AS) prefactors of L(ω+Ω) and L(ω−Ω).
    pub fn amplitudes(&self, kappa: T, delta: T) -> Result<(T, T)> {
        let t_s = cavity_response(kappa, delta, -self.omega)?;
        let t_as = cavity_response(kappa, delta, self.omega)?;
        Ok((
            self.weight * (self.n_occ + T::one()) * t_s,
            self.weight * self.n_occ * t_as,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModelParams<T> {
    pub modes: Vec<ModeParams<T>>,
    /// rad/s
    pub kappa: T,
    /// rad/s
    pub delta: T,
    /// Classical noise filtered by the cavity: amplitude·T(Δ,ω) added to the
    /// unit shot floor.
    pub classical_floor: Option<T>,
}

impl<T: Real> SpectrumModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        require_positive("heterodyne_model", "kappa", self.kappa)?;
        if !self.delta.is_finite() {
            return Err(Error::domain("heterodyne_model", "delta must be finite"));
        }
        for m in &self.modes {
            require_positive("heterodyne_model", "mode omega", m.omega)?;
            require_positive("heterodyne_model", "mode gamma", m.gamma)?;
            require_non_negative("heterodyne_model", "mode n_occ", m.n_occ)?;
            require_non_negative("heterodyne_model", "mode weight", m.weight)?;
        }
        if let Some(a) = self.classical_floor {
            require_non_negative("heterodyne_model", "classical floor", a)?;
        }
        Ok(())
    }

    /// Noiseless spectral density at signed offset ω from the heterodyne
    /// carrier; anti-Stokes sits at +Ω.
    pub fn evaluate(&self, omega: T) -> T {
        let mut s = T::one();
        for m in &self.modes {
            let (a_s, a_as) = m.amplitudes(self.kappa, self.delta).expect("validated");
            s += a_s * lorentzian(omega + m.omega, m.gamma) + a_as * lorentzian(omega - m.omega, m.gamma);
        }
        if let Some(a) = self.classical_floor {
            s += a * cavity_response(self.kappa, self.delta, omega).expect("validated");
        }
        s
    }
}

/// Heterodyne power spectrum in shot-noise units on a signed frequency grid
/// relative to the heterodyne carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdTrace<T> {
    /// rad/s, strictly increasing.
    pub freq: Vec<T>,
    pub psd: Vec<T>,
    /// Number of averaged periodograms; 0 marks a noiseless model curve.
    pub n_avg: usize,
    /// rad/s
    pub resolution_bw: T,
    /// Carrier frequency for absolute-axis output, rad/s.
    pub het_freq: Option<T>,
}

impl<T: Real> PsdTrace<T> {
    pub fn validate(&self) -> Result<()> {
        if self.freq.len() != self.psd.len() {
            return Err(Error::domain("PsdTrace", "freq and psd lengths differ"));
        }
        if self.freq.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("PsdTrace", "frequency grid must be strictly increasing"));
        }
        if self.psd.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(Error::domain("PsdTrace", "psd values must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// Effective averaging count for per-bin weights.
    pub fn n_avg_eff(&self) -> T {
        T::from_usize_lossy(self.n_avg.max(1))
    }

    /// Index of the bin nearest to `omega`.
    pub fn nearest(&self, omega: T) -> usize {
        let i = self.freq.partition_point(|&f| f < omega);
        if i == 0 {
            return 0;
        }
        if i >= self.freq.len() {
            return self.freq.len() - 1;
        }
        if (self.freq[i] - omega).abs() < (omega - self.freq[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }

    /// Indices with |ω| inside [lo, hi] on the chosen side.
    pub fn band_indices(&self, lo: T, hi: T, positive: bool) -> Vec<usize> {
        self.freq
            .iter()
            .enumerate()
            .filter(|(_, &f)| {
                let a = if positive { f } else { -f };
                a >= lo && a <= hi
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Evaluates the noiseless heterodyne model on `grid` (rad/s).
pub fn heterodyne_model<T: Real>(params: &SpectrumModelParams<T>, grid: &[T]) -> Result<PsdTrace<T>> {
    params.validate()?;
    let psd = grid.iter().map(|&w| params.evaluate(w)).collect();
    let resolution_bw = if grid.len() > 1 {
        (grid[grid.len() - 1] - grid[0]) / T::from_usize_lossy(grid.len() - 1)
    } else {
        T::zero()
    };
    let trace = PsdTrace {
        freq: grid.to_vec(),
        psd,
        n_avg: 0,
        resolution_bw,
        het_freq: None,
    };
    trace.validate()?;
    Ok(trace)
}

/// Uniform grid of `n` points spanning [lo, hi].
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect()
}
