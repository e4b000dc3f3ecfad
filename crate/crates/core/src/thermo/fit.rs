use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cavity::moving_average;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::specgen::{lorentzian, ModeParams, PsdTrace};
use crate::Real;

/// One Stokes/anti-Stokes pair; amplitudes multiply L(ω ± Ω), so the peak
/// height above the floor is 2a/γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandPeak<T> {
    /// rad/s
    pub omega: T,
    /// rad/s
    pub gamma: T,
    pub a_s: T,
    pub a_as: T,
}

impl<T: Real> SidebandPeak<T> {
    fn excess(&self, w: T) -> T {
        self.a_s * lorentzian(w + self.omega, self.gamma) + self.a_as * lorentzian(w - self.omega, self.gamma)
    }

    fn from_slice(p: &[T]) -> Self {
        Self {
            a_s: p[0],
            a_as: p[1],
            omega: p[2],
            gamma: p[3],
        }
    }

    fn to_vec(self) -> [T; 4] {
        [self.a_s, self.a_as, self.omega, self.gamma]
    }
}

/// Starting point for [`fit_sidebands`]; a y pair is fitted iff present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandGuess<T> {
    pub x: SidebandPeak<T>,
    pub y: Option<SidebandPeak<T>>,
}

impl<T: Real> SidebandGuess<T> {
    /// Guess from known mode frequencies and linewidths, reading amplitudes
    /// off the spectrum at ±Ω.
    pub fn from_modes(psd: &PsdTrace<T>, x: (T, T), y: Option<(T, T)>) -> Self {
        let peak = |(omega, gamma): (T, T)| SidebandPeak {
            omega,
            gamma,
            a_s: amplitude_at(psd, -omega, gamma),
            a_as: amplitude_at(psd, omega, gamma),
        };
        let mut g = Self { x: peak(x), y: y.map(peak) };
        floor_amplitudes(&mut g.x);
        if let Some(p) = g.y.as_mut() {
            floor_amplitudes(p);
        }
        g
    }
}

/// Result of the joint sideband fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandFit<T: Real> {
    pub x: SidebandPeak<T>,
    pub y: Option<SidebandPeak<T>>,
    /// Parameter order a_S, a_AS, Ω_x, γ_x, then a_Sy, a_ASy, Ω_y, γ_y.
    pub covariance: DMatrix<T>,
    pub reduced_chi2: T,
    pub n_points: usize,
    /// Set when either x amplitude is below three standard errors.
    pub low_confidence: bool,
    /// |ω| intervals excluded from the residual, rad/s.
    pub mask: Vec<(T, T)>,
}

impl<T: Real> SidebandFit<T> {
    pub fn sigma(&self, i: usize) -> T {
        self.covariance[(i, i)].max(T::zero()).sqrt()
    }

    /// Fitted x pair as a forward-model mode with effective weight 1.
    pub fn x_mode(&self) -> ModeParams<T> {
        ModeParams {
            omega: self.x.omega,
            gamma: self.x.gamma,
            n_occ: T::zero(),
            weight: T::one(),
        }
    }

    /// Noiseless fitted spectrum at ω.
    pub fn evaluate(&self, w: T) -> T {
        T::one() + self.x.excess(w) + self.y.map_or(T::zero(), |p| p.excess(w))
    }
}

fn masked<T: Real>(mask: &[(T, T)], w: T) -> bool {
    let a = w.abs();
    mask.iter().any(|&(lo, hi)| a >= lo && a <= hi)
}

// Mean excess over ±γ/4 around `at`, converted to an L prefactor.
fn amplitude_at<T: Real>(psd: &PsdTrace<T>, at: T, gamma: T) -> T {
    let q = gamma / T::of(4.0);
    let (mut sum, mut n) = (T::zero(), 0usize);
    for (&f, &s) in psd.freq.iter().zip(&psd.psd) {
        if (f - at).abs() <= q {
            sum += s - T::one();
            n += 1;
        }
    }
    if n == 0 {
        let i = psd.nearest(at);
        sum = psd.psd[i] - T::one();
        n = 1;
    }
    sum / T::from_usize_lossy(n) * gamma / T::of(2.0)
}

fn floor_amplitudes<T: Real>(p: &mut SidebandPeak<T>) {
    let top = p.a_s.max(p.a_as).max(T::tiny());
    let lo = top * T::of(1e-3);
    p.a_s = p.a_s.max(lo);
    p.a_as = p.a_as.max(lo);
}

// Local maxima of `v` strictly above both neighbours, edges excluded.
fn strongest_local_max<T: Real>(v: &[T]) -> Option<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1])
        .max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal))
}

// Full width at half of v[k], at least one bin.
fn half_max_width<T: Real>(freq: &[T], v: &[T], k: usize, rbw: T) -> T {
    let h = v[k] / T::of(2.0);
    let (mut l, mut r) = (k, k);
    while l > 0 && v[l - 1] > h {
        l -= 1;
    }
    while r + 1 < v.len() && v[r + 1] > h {
        r += 1;
    }
    (freq[r] - freq[l]).max(rbw)
}

/// Peak search for an initial guess.
///
/// Works on mirrored excesses S(+|ω|) + S(−|ω|) − 2 smoothed over three
/// bins. The strongest interior local maximum seeds a one-pair fit; a second
/// pair is added when the fit residual has a local maximum more than five
/// standard errors high. The broader pair is taken as the cavity-axis mode,
/// which is the strongly damped one.
pub fn auto_guess<T: Real>(psd: &PsdTrace<T>, mask: &[(T, T)]) -> Result<SidebandGuess<T>> {
    psd.validate()?;
    let idx: Vec<usize> = (0..psd.len())
        .filter(|&i| psd.freq[i] > T::zero() && !masked(mask, psd.freq[i]))
        .collect();
    if idx.len() < 5 {
        return Err(fit_error("too few unmasked bins on the positive side"));
    }
    let freq: Vec<T> = idx.iter().map(|&i| psd.freq[i]).collect();
    let mirror: Vec<usize> = idx.iter().map(|&i| psd.nearest(-psd.freq[i])).collect();
    let mirrored = |vals: &dyn Fn(usize) -> T| -> Vec<T> {
        let raw: Vec<T> = idx.iter().zip(&mirror).map(|(&i, &m)| vals(i) + vals(m)).collect();
        moving_average(&raw, 1)
    };
    let rbw = (freq[freq.len() - 1] - freq[0]) / T::from_usize_lossy(freq.len() - 1);
    // σ of a two-bin sum averaged over three bins, per unit of local level.
    let rel_sigma = (T::of(2.0) / T::of(3.0)).sqrt() / psd.n_avg_eff().sqrt();

    let excess = mirrored(&|i| psd.psd[i] - T::one());
    let k = strongest_local_max(&excess).ok_or_else(|| fit_error("no interior peak in the spectrum"))?;
    let threshold = if psd.n_avg == 0 { T::zero() } else { T::of(5.0) * rel_sigma };
    if !(excess[k] > threshold) {
        return Err(fit_error("no sideband peak above five standard errors"));
    }
    let first = (freq[k], half_max_width(&freq, &excess, k, rbw));
    let single = fit_with_guess(psd, &SidebandGuess::from_modes(psd, first, None), mask, 1)?;

    let resid = mirrored(&|i| psd.psd[i] - single.evaluate(psd.freq[i]));
    let level = mirrored(&|i| single.evaluate(psd.freq[i]));
    let mut z: Vec<T> = if psd.n_avg == 0 {
        // Noiseless input: anything above round-off is structure.
        let top = excess[k].max(T::tiny());
        resid.iter().map(|&r| r / (top * T::of(1e-6))).collect()
    } else {
        resid.iter().zip(&level).map(|(&r, &l)| r / (l / T::of(2.0) * rel_sigma)).collect()
    };
    // The single-pair fit leaves structure at its own centre when a second
    // pair overlaps it.
    let guard = (single.x.gamma / T::of(2.0)).max(T::of(2.0) * rbw);
    for (zj, &f) in z.iter_mut().zip(&freq) {
        if (f - single.x.omega).abs() < guard {
            *zj = T::zero();
        }
    }
    let second = strongest_local_max(&z)
        .filter(|&j| z[j] > T::of(5.0))
        .map(|j| (freq[j], half_max_width(&freq, &resid, j, rbw)));

    let (x, y) = match second {
        Some(b) if b.1 > first.1 => (b, Some(first)),
        Some(b) => (first, Some(b)),
        None => (first, None),
    };
    Ok(SidebandGuess::from_modes(psd, x, y))
}

fn fit_error(reason: impl Into<String>) -> Error {
    Error::Fit {
        target: "sidebands".into(),
        reason: reason.into(),
    }
}

/// Weighted nonlinear least squares of 1 + Σ a_S·L(ω+Ω) + a_AS·L(ω−Ω).
///
/// Per-bin σ = S_model/√n_avg (averaged-periodogram statistics), refreshed
/// from the model twice. `mask` lists |ω| intervals removed on both sides.
/// Without `init` the guess comes from [`auto_guess`].
pub fn fit_sidebands<T: Real>(
    psd: &PsdTrace<T>,
    init: Option<&SidebandGuess<T>>,
    mask: &[(T, T)],
) -> Result<SidebandFit<T>> {
    psd.validate()?;
    let guess = match init {
        Some(g) => *g,
        None => auto_guess(psd, mask)?,
    };
    fit_with_guess(psd, &guess, mask, 3)
}

fn fit_with_guess<T: Real>(
    psd: &PsdTrace<T>,
    guess: &SidebandGuess<T>,
    mask: &[(T, T)],
    passes: usize,
) -> Result<SidebandFit<T>> {
    let idx: Vec<usize> = (0..psd.len()).filter(|&i| !masked(mask, psd.freq[i])).collect();
    let w: Vec<T> = idx.iter().map(|&i| psd.freq[i]).collect();
    let y: Vec<T> = idx.iter().map(|&i| psd.psd[i]).collect();
    let m = w.len();
    let with_y = guess.y.is_some();
    let np = if with_y { 8 } else { 4 };
    if m <= np {
        return Err(fit_error(format!("{m} unmasked bins for {np} parameters")));
    }
    let rbw = psd.resolution_bw.max(T::tiny());
    let span = w[m - 1] - w[0];

    let mut p0: Vec<T> = guess.x.to_vec().to_vec();
    if let Some(py) = guess.y {
        p0.extend_from_slice(&py.to_vec());
    }
    let big = T::of(1e30);
    let bounds_for = |p: &SidebandPeak<T>| {
        [
            (T::zero(), big),
            (T::zero(), big),
            (p.omega * T::of(0.8), p.omega * T::of(1.2)),
            (rbw * T::of(0.05), span),
        ]
    };
    let mut bounds: Vec<(T, T)> = bounds_for(&guess.x).to_vec();
    if let Some(py) = guess.y.as_ref() {
        bounds.extend_from_slice(&bounds_for(py));
    }

    let model = |p: &[T], f: T| -> T {
        let mut s = T::one() + SidebandPeak::from_slice(&p[..4]).excess(f);
        if with_y {
            s += SidebandPeak::from_slice(&p[4..8]).excess(f);
        }
        s
    };
    let root_n = psd.n_avg_eff().sqrt();
    let mut sigma: Vec<T> = y.iter().map(|&v| v.max(T::one()) / root_n).collect();
    let mut params = p0;
    let mut last = None;
    for pass in 0..passes {
        let sg = sigma.clone();
        let fit = levenberg_marquardt(
            |p: &[T], r: &mut [T]| {
                for k in 0..m {
                    r[k] = (y[k] - model(p, w[k])) / sg[k];
                }
            },
            m,
            &params,
            Some(&bounds),
            &LmOptions::default(),
        )
        .map_err(|e| match e {
            Error::Fit { reason, .. } => fit_error(format!("pass {pass}: {reason}")),
            other => other,
        })?;
        params = fit.params.clone();
        for k in 0..m {
            sigma[k] = model(&params, w[k]).max(T::tiny()) / root_n;
        }
        last = Some(fit);
    }
    let fit = last.expect("at least one pass");
    if !fit.converged {
        return Err(fit_error(format!(
            "no convergence after {} iterations, χ² = {:e}",
            fit.iterations,
            fit.chi2.as_f64()
        )));
    }
    let x = SidebandPeak::from_slice(&params[..4]);
    let ypk = with_y.then(|| SidebandPeak::from_slice(&params[4..8]));
    let sd = |i: usize| fit.covariance[(i, i)].max(T::zero()).sqrt();
    let three = T::of(3.0);
    let low_confidence = x.a_s < three * sd(0) || x.a_as < three * sd(1);
    Ok(SidebandFit {
        x,
        y: ypk,
        covariance: fit.covariance.clone(),
        reduced_chi2: fit.reduced_chi2(),
        n_points: m,
        low_confidence,
        mask: mask.to_vec(),
    })
}
