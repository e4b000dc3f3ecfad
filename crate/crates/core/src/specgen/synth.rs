use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::specgen::PsdTrace;
use crate::Real;

/// Draws an averaged-periodogram realization of a noiseless model trace.
///
/// Each bin is S(ω)·G with G ~ Gamma(shape n_avg, scale 1/n_avg), the
/// distribution of the mean of n_avg exponential periodogram ordinates.
pub fn synthesize_spectrum<T: Real>(model: &PsdTrace<T>, n_avg: usize, seed: u64) -> Result<PsdTrace<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_with(model, n_avg, &mut rng)
}

/// As [`synthesize_spectrum`], drawing from a caller-owned generator.
pub fn synthesize_with<T: Real, R: rand::Rng + ?Sized>(
    model: &PsdTrace<T>,
    n_avg: usize,
    rng: &mut R,
) -> Result<PsdTrace<T>> {
    if n_avg < 1 {
        return Err(Error::domain("synthesize_spectrum", "n_avg must be at least 1"));
    }
    model.validate()?;
    let k = n_avg as f64;
    let gamma = Gamma::new(k, 1.0 / k).map_err(|e| Error::domain("synthesize_spectrum", e.to_string()))?;
    let psd = model.psd.iter().map(|&s| s * T::of(gamma.sample(rng))).collect();
    Ok(PsdTrace {
        freq: model.freq.clone(),
        psd,
        n_avg,
        resolution_bw: model.resolution_bw,
        het_freq: model.het_freq,
    })
}
