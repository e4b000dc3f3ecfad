use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specgen::{PsdTrace, TimeTrace};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // Periodic Hann.
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::domain("window", format!("unknown window '{other}'"))),
        }
    }
}

/// Averaged modified periodogram over non-overlapping segments.
///
/// Two-sided: white noise of variance σ² gives a flat level σ²·dt, and the
/// sum of the returned PSD times the bin width 1/(N·dt) equals the mean
/// power. Frequencies are in rad/s, ascending over [−fs/2, fs/2).
pub fn welch_psd<T: Real>(trace: &TimeTrace<T>, segment_len: usize, window: Window) -> Result<PsdTrace<T>> {
    trace.validate()?;
    if segment_len < 2 {
        return Err(Error::domain("welch_psd", "segment length must be at least 2"));
    }
    if segment_len > trace.samples.len() {
        return Err(Error::domain(
            "welch_psd",
            format!(
                "segment length {} exceeds trace length {}",
                segment_len,
                trace.samples.len()
            ),
        ));
    }
    let n = segment_len;
    let n_seg = trace.samples.len() / n;
    let dt = trace.dt.as_f64();
    let w = window.coefficients(n);
    let norm = dt / w.iter().map(|v| v * v).sum::<f64>();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);

    let acc = trace
        .samples
        .par_chunks_exact(n)
        .map(|seg| {
            let mut buf: Vec<Complex64> = seg
                .iter()
                .zip(&w)
                .map(|(&x, &wi)| Complex64::new(x.as_f64() * wi, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.iter().map(|c| c.norm_sqr()).collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let df = std::f64::consts::TAU / (n as f64 * dt);
    let neg = (n + 1) / 2;
    let mut freq = Vec::with_capacity(n);
    let mut psd = Vec::with_capacity(n);
    // fftshift: bins from (n+1)/2 up carry negative frequencies.
    for k in (neg..n).chain(0..neg) {
        let signed = if k >= neg { k as f64 - n as f64 } else { k as f64 };
        freq.push(T::of(signed * df));
        psd.push(T::of(acc[k] * norm / n_seg as f64));
    }
    let out = PsdTrace {
        freq,
        psd,
        n_avg: n_seg,
        resolution_bw: T::of(df),
        het_freq: None,
    };
    out.validate()?;
    Ok(out)
}

/// Welch estimate of a heterodyne record in shot-noise units on offsets
/// relative to the intermediate frequency, covering (−fs/4, fs/4).
pub fn heterodyne_psd<T: Real>(trace: &TimeTrace<T>, segment_len: usize, window: Window) -> Result<PsdTrace<T>> {
    let full = welch_psd(trace, segment_len, window)?;
    let f_if = trace.intermediate_frequency();
    let floor = trace.dt;
    let (freq, psd): (Vec<T>, Vec<T>) = full
        .freq
        .iter()
        .zip(&full.psd)
        .filter(|(&f, _)| f > T::zero())
        .map(|(&f, &s)| (f - f_if, s / floor))
        .filter(|(f, _)| f.abs() < f_if)
        .unzip();
    Ok(PsdTrace {
        freq,
        psd,
        n_avg: full.n_avg,
        resolution_bw: full.resolution_bw,
        het_freq: Some(f_if),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn white(n: usize, sigma: f64, dt: f64, seed: u64) -> TimeTrace<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        TimeTrace {
            dt,
            samples: (0..n).map(|_| d.sample(&mut rng)).collect(),
            seed,
            model_hash: String::new(),
        }
    }

    #[test]
    fn white_noise_level_is_two_sided() {
        let (sigma, dt) = (1.7, 1e-6);
        let tr = white(10_000 * 200, sigma, dt, 4);
        for win in [Window::Rectangular, Window::Hann] {
            let p = welch_psd(&tr, 10_000, win).unwrap();
            assert_eq!(p.len(), 10_000);
            assert_eq!(p.n_avg, 200);
            let mean = p.psd.iter().sum::<f64>() / p.len() as f64;
            assert!((mean / (sigma * sigma * dt) - 1.0).abs() < 0.03, "{win:?}: {mean}");
        }
    }

    #[test]
    fn parseval() {
        let tr = white(4096 * 8, 1.0, 2e-7, 8);
        let p = welch_psd(&tr, 4096, Window::Rectangular).unwrap();
        let power = p.psd.iter().sum::<f64>() * p.resolution_bw / std::f64::consts::TAU;
        let var = tr.samples.iter().map(|x| x * x).sum::<f64>() / tr.samples.len() as f64;
        assert!((power / var - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sinusoid_peak_and_leakage() {
        let (n, dt) = (1024usize, 1e-6);
        // Half-bin offset: worst-case scalloping.
        let f = (100.5) / (n as f64 * dt);
        let samples: Vec<f64> = (0..n * 4).map(|i| (std::f64::consts::TAU * f * i as f64 * dt).cos()).collect();
        let tr = TimeTrace { dt, samples, seed: 0, model_hash: String::new() };
        let rect = welch_psd(&tr, n, Window::Rectangular).unwrap();
        let hann = welch_psd(&tr, n, Window::Hann).unwrap();
        let peak = |p: &PsdTrace<f64>| {
            let (i, _) = p.psd.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
            p.freq[i].abs() / std::f64::consts::TAU
        };
        let df = 1.0 / (n as f64 * dt);
        assert!((peak(&rect) - f).abs() <= df);
        assert!((peak(&hann) - f).abs() <= df);
        // 40 bins away: rectangular sidelobes fall as 1/k², Hann as 1/k⁶.
        let far = |p: &PsdTrace<f64>| p.psd[p.nearest(std::f64::consts::TAU * (f + 40.0 * df))];
        let top = |p: &PsdTrace<f64>| p.psd.iter().cloned().fold(0.0, f64::max);
        let r_rect = far(&rect) / top(&rect);
        let r_hann = far(&hann) / top(&hann);
        assert!(r_rect > 1e-4 && r_rect < 1e-3, "rect leakage {r_rect}");
        assert!(r_hann < 1e-7, "hann leakage {r_hann}");
    }

    #[test]
    fn rejects_long_segment() {
        let tr = white(100, 1.0, 1.0, 0);
        assert!(welch_psd(&tr, 101, Window::Hann).is_err());
        assert!("hann".parse::<Window>().is_ok() && "kaiser".parse::<Window>().is_err());
    }

    #[test]
    fn heterodyne_floor_is_unity() {
        let tr = white(2048 * 100, 1.0, 1e-7, 2);
        let p = heterodyne_psd(&tr, 2048, Window::Hann).unwrap();
        let mean = p.psd.iter().sum::<f64>() / p.len() as f64;
        assert!((mean - 1.0).abs() < 0.02);
        assert!(p.freq.iter().all(|f| f.abs() < tr.intermediate_frequency()));
    }
}
