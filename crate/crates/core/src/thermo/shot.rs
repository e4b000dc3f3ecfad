use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// One local-oscillator level and the detected band power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPowerPoint<T> {
    /// W
    pub lo_power: T,
    /// Integrated power in the ±(250–350) kHz bands, arbitrary units.
    pub band_power: T,
    /// Standard error of `band_power`; when every point carries one the
    /// fits are weighted and the scatter is not used to rescale errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseVerdict<T> {
    pub linear: bool,
    pub slope: T,
    pub intercept: T,
    pub intercept_sigma: T,
    pub r_squared: T,
    /// RMS residual of the straight-line fit, weighted when errors are given.
    pub residual: T,
    /// Quadratic coefficient of a second-order fit in units of its standard
    /// error; absent with fewer than four levels.
    pub curvature_z: Option<T>,
}

// Weighted least squares of y on the monomials x^0..x^deg; returns the
// coefficients, their standard errors and the weighted residual sum of
// squares. Without known errors the standard errors come from the scatter.
fn polyfit(x: &[f64], y: &[f64], sigma: Option<&[f64]>, deg: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = x.len();
    let m = deg + 1;
    let w = |i: usize| sigma.map_or(1.0, |s| 1.0 / s[i]);
    let a = nalgebra::DMatrix::from_fn(n, m, |i, j| w(i) * x[i].powi(j as i32));
    let b = nalgebra::DVector::from_fn(n, |i, _| w(i) * y[i]);
    let ata = a.tr_mul(&a);
    let inv = ata.clone().try_inverse()?;
    let coef = &inv * a.tr_mul(&b);
    let res = &b - &a * &coef;
    let rss = res.norm_squared();
    let s2 = match sigma {
        Some(_) => 1.0,
        None => rss / n.saturating_sub(m).max(1) as f64,
    };
    let se = (0..m).map(|j| (inv[(j, j)] * s2).max(0.0).sqrt()).collect();
    Some((coef.iter().copied().collect(), se, rss))
}

/// Shot-noise verdict: band power linear in LO power.
///
/// Linear when the straight-line intercept is within 2σ of zero, R² > 0.99
/// and, given four or more levels, a quadratic term is within 3σ of zero.
/// The curvature test catches a classical P_LO² term that the intercept
/// alone can hide. Errors are taken from `sigma` when every point has one.
pub fn shot_noise_check<T: Real>(points: &[BandPowerPoint<T>]) -> Result<ShotNoiseVerdict<T>> {
    if points.len() < 3 {
        return Err(Error::domain("shot_noise_check", "at least 3 LO power levels are required"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.lo_power.as_f64()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.band_power.as_f64()).collect();
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::domain("shot_noise_check", "band powers must be finite"));
    }
    let sigma: Option<Vec<f64>> = points.iter().map(|p| p.sigma.map(|s| s.as_f64())).collect();
    if let Some(s) = &sigma {
        if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain("shot_noise_check", "band power errors must be positive"));
        }
    }
    let sigma = sigma.as_deref();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let (c1, se1, rss1) =
        polyfit(&xs, &y, sigma, 1).ok_or_else(|| Error::domain("shot_noise_check", "LO power levels must differ"))?;
    let w2: Vec<f64> = (0..y.len()).map(|i| sigma.map_or(1.0, |s| s[i].powi(-2))).collect();
    let mean = y.iter().zip(&w2).map(|(v, w)| v * w).sum::<f64>() / w2.iter().sum::<f64>();
    let tss = y.iter().zip(&w2).map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>();
    let r_squared = if tss > 0.0 { 1.0 - rss1 / tss } else { 0.0 };
    let intercept_ok = c1[0].abs() <= 2.0 * se1[0];
    let curvature_z = if points.len() >= 4 {
        polyfit(&xs, &y, sigma, 2).map(|(c2, se2, _)| {
            if se2[2] > 0.0 {
                c2[2] / se2[2]
            } else if c2[2] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
    } else {
        None
    };
    let curvature_ok = curvature_z.is_none_or(|z| z.abs() <= 3.0);
    Ok(ShotNoiseVerdict {
        linear: intercept_ok && r_squared > 0.99 && curvature_ok,
        slope: T::of(c1[1] / scale),
        intercept: T::of(c1[0]),
        intercept_sigma: T::of(se1[0]),
        r_squared: T::of(r_squared),
        residual: T::of((rss1 / y.len() as f64).sqrt()),
        curvature_z: curvature_z.map(|z| T::of(z.clamp(-1e300, 1e300))),
    })
}
