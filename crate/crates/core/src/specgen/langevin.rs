use nalgebra::{DMatrix, DVector};
use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::cooling::{optical_spring, scattering_rates, steady_state_covariance, LinearModel};
use crate::specgen::{ModeParams, PsdTrace, SpectrumModelParams};
use crate::error::{Error, Result};
use crate::Real;

/// Heterodyne photocurrent record.
///
/// Samples are real, carry the demodulated field on an intermediate
/// frequency of fs/4, and are scaled so that pure shot noise has unit
/// variance per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace<T> {
    /// s
    pub dt: T,
    pub samples: Vec<T>,
    pub seed: u64,
    /// First 16 hex digits of the SHA-256 of the generating model.
    pub model_hash: String,
}

impl<T: Real> TimeTrace<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::domain("TimeTrace", "dt must be positive"));
        }
        if self.samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("TimeTrace", "samples must be finite"));
        }
        Ok(())
    }

    /// Intermediate frequency of the record, rad/s.
    pub fn intermediate_frequency(&self) -> T {
        T::two_pi_s() / (T::of(4.0) * self.dt)
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_usize_lossy(self.samples.len())
    }
}

/// Hash identifying the model and detection efficiency behind a trace.
pub fn model_hash<T: Real>(model: &LinearModel<T>, efficiency: T) -> String {
    let p = &model.params;
    let text = format!(
        "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
        p.omega.as_f64(),
        p.gamma_m.as_f64(),
        p.n_th.as_f64(),
        p.gamma_extra.as_f64(),
        p.kappa.as_f64(),
        p.delta.as_f64(),
        p.g.as_f64(),
        p.x_zpf.as_f64(),
        efficiency.as_f64()
    );
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

// State layout of the augmented system: q, p, X, Y, ∫X_out dt, ∫Y_out dt.
const N_AUG: usize = 6;

/// Exact one-step propagator of the augmented linear SDE.
#[derive(Debug, Clone)]
pub struct ExactPropagator<T: Real> {
    pub dt: T,
    /// e^{A dt} on the augmented state.
    pub transition: DMatrix<T>,
    /// Discrete noise covariance ∫₀^dt e^{As} D e^{Aᵀs} ds.
    pub noise_covariance: DMatrix<T>,
    noise_factor: DMatrix<T>,
}

impl<T: Real> ExactPropagator<T> {
    /// Van Loan construction; the integrator rows read out the cavity output
    /// quadratures X_out = √κ·X − ξ_X with the input noise shared with X.
    pub fn new(model: &LinearModel<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::domain("ExactPropagator", "dt must be positive"));
        }
        let half = T::of(0.5);
        let sk = model.params.kappa.sqrt();
        let mut a = DMatrix::zeros(N_AUG, N_AUG);
        a.view_mut((0, 0), (4, 4)).copy_from(&model.drift);
        a[(4, 2)] = sk;
        a[(5, 3)] = sk;
        let mut d = DMatrix::zeros(N_AUG, N_AUG);
        d.view_mut((0, 0), (4, 4)).copy_from(&model.diffusion);
        for (x, i) in [(2, 4), (3, 5)] {
            d[(x, i)] = -sk * half;
            d[(i, x)] = -sk * half;
            d[(i, i)] = half;
        }
        let n = N_AUG;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(-&a * dt));
        m.view_mut((0, n), (n, n)).copy_from(&(&d * dt));
        m.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
        let e = m.exp();
        let transition = e.view((n, n), (n, n)).transpose();
        let q = &transition * e.view((0, n), (n, n));
        let noise_covariance = (&q + q.transpose()) * half;
        let noise_factor = psd_factor(&noise_covariance);
        Ok(Self {
            dt,
            transition,
            noise_covariance,
            noise_factor,
        })
    }

    /// Noise-free update of the augmented state.
    pub fn deterministic(&self, state: &DVector<T>) -> DVector<T> {
        &self.transition * state
    }

    fn step<R: rand::Rng + ?Sized>(&self, state: &DVector<T>, rng: &mut R) -> DVector<T> {
        let w = DVector::from_fn(N_AUG, |_, _| T::of(StandardNormal.sample(rng)));
        &self.transition * state + &self.noise_factor * w
    }
}

// Square-root factor of a symmetric PSD matrix; tolerates exact zeros.
fn psd_factor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if let Some(c) = m.clone().cholesky() {
        return c.l();
    }
    let eig = m.clone().symmetric_eigen();
    let sqrt = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

/// Slowest energy decay rate 2·min(−Re λ) of the drift, s⁻¹.
fn slowest_energy_decay<T: Real>(model: &LinearModel<T>) -> f64 {
    model
        .eigenvalues()
        .iter()
        .map(|&(re, _)| -2.0 * re)
        .fold(f64::INFINITY, f64::min)
}

/// Mechanical and cavity state sampled at every step, alongside the record.
#[derive(Debug, Clone)]
pub struct LangevinRun<T: Real> {
    pub trace: TimeTrace<T>,
    /// (q, p, X, Y) at the end of each sample interval.
    pub states: Vec<[T; 4]>,
}

fn check_preconditions<T: Real>(model: &LinearModel<T>, dt: T, duration: T) -> Result<()> {
    model.require_hurwitz()?;
    let p = &model.params;
    let limit = T::of(0.05) * (T::two_pi_s() / p.omega).min(T::two_pi_s() / p.kappa);
    if !(dt > T::zero()) || dt > limit {
        return Err(Error::Precondition(format!(
            "dt = {:e} s exceeds 0.05·min(2π/Ω, 2π/κ) = {:e} s",
            dt.as_f64(),
            limit.as_f64()
        )));
    }
    let gamma = slowest_energy_decay(model);
    if duration.as_f64() * gamma < 100.0 {
        return Err(Error::Precondition(format!(
            "duration = {:e} s is shorter than 100/γ_total = {:e} s",
            duration.as_f64(),
            100.0 / gamma
        )));
    }
    Ok(())
}

/// Integrates the linear model exactly and records the heterodyne
/// photocurrent at detection efficiency `efficiency`.
pub fn simulate_langevin<T: Real>(
    model: &LinearModel<T>,
    efficiency: T,
    dt: T,
    duration: T,
    seed: u64,
) -> Result<TimeTrace<T>> {
    run(model, efficiency, dt, duration, seed, false).map(|r| r.trace)
}

/// As [`simulate_langevin`], also keeping the state trajectory.
pub fn simulate_langevin_states<T: Real>(
    model: &LinearModel<T>,
    efficiency: T,
    dt: T,
    duration: T,
    seed: u64,
) -> Result<LangevinRun<T>> {
    run(model, efficiency, dt, duration, seed, true)
}

fn run<T: Real>(
    model: &LinearModel<T>,
    efficiency: T,
    dt: T,
    duration: T,
    seed: u64,
    keep_states: bool,
) -> Result<LangevinRun<T>> {
    if !(efficiency > T::zero() && efficiency <= T::one()) {
        return Err(Error::domain("simulate_langevin", "efficiency must lie in (0, 1]"));
    }
    check_preconditions(model, dt, duration)?;
    let prop = ExactPropagator::new(model, dt)?;
    let n = (duration / dt).ceil().to_usize().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Start from the stationary covariance so no burn-in is needed.
    let ss = steady_state_covariance(model)?;
    let init_factor = psd_factor(&ss.covariance);
    let w0 = DVector::from_fn(4, |_, _| T::of(StandardNormal.sample(&mut rng)));
    let s0 = &init_factor * w0;
    let mut state = DVector::zeros(N_AUG);
    state.rows_mut(0, 4).copy_from(&s0);

    let sqrt_eta = efficiency.sqrt();
    let sqrt_loss = (T::one() - efficiency).sqrt();
    // Vacuum quadrature variance of a dt-average is 1/(2dt); the record
    // scale √(2dt) makes it unit.
    let vac = (T::of(0.5) / dt).sqrt();
    let scale = (T::of(2.0) * dt).sqrt();
    let mut samples = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(if keep_states { n } else { 0 });
    for k in 0..n {
        state[4] = T::zero();
        state[5] = T::zero();
        state = prop.step(&state, &mut rng);
        let lx: T = T::of(StandardNormal.sample(&mut rng));
        let ly: T = T::of(StandardNormal.sample(&mut rng));
        let xd = sqrt_eta * state[4] / dt + sqrt_loss * vac * lx;
        let yd = sqrt_eta * state[5] / dt + sqrt_loss * vac * ly;
        // Re[(x − iy)·e^{iπk/2}]
        let v = match k % 4 {
            0 => xd,
            1 => yd,
            2 => -xd,
            _ => -yd,
        };
        samples.push(scale * v);
        if keep_states {
            states.push([state[0], state[1], state[2], state[3]]);
        }
    }
    let trace = TimeTrace {
        dt,
        samples,
        seed,
        model_hash: model_hash(model, efficiency),
    };
    trace.validate()?;
    Ok(LangevinRun { trace, states })
}

/// Exact heterodyne spectrum of the linear model in shot-noise units at
/// signed offsets `grid` (rad/s); anti-Stokes at +Ω.
pub fn linear_heterodyne_spectrum<T: Real>(model: &LinearModel<T>, efficiency: T, grid: &[T]) -> Result<Vec<T>> {
    model.require_hurwitz()?;
    let p = &model.params;
    let sk = p.kappa.sqrt();
    let half = T::of(0.5);
    let a = model.drift.map(|v| Complex::new(v, T::zero()));
    // Noise sources (ξ_p, ξ_X, ξ_Y) with intensities (D_pp, ½, ½).
    let intensity = [model.diffusion[(1, 1)], half, half];
    let mut b = DMatrix::<Complex<T>>::zeros(4, 3);
    b[(1, 0)] = Complex::new(T::one(), T::zero());
    b[(2, 1)] = Complex::new(sk, T::zero());
    b[(3, 2)] = Complex::new(sk, T::zero());
    let i = Complex::new(T::zero(), T::one());
    grid.iter()
        .map(|&w| {
            let m = DMatrix::<Complex<T>>::identity(4, 4) * Complex::new(T::zero(), w) - &a;
            let g = m
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::domain("linear_heterodyne_spectrum", "singular resolvent"))?;
            // z = X_out − i·Y_out
            let mut s_z = T::zero();
            for (j, &nj) in intensity.iter().enumerate() {
                let mut h = (g[(2, j)] - i * g[(3, j)]) * Complex::new(sk, T::zero());
                if j == 1 {
                    h -= Complex::new(T::one(), T::zero());
                }
                if j == 2 {
                    h += i;
                }
                s_z += h.norm_sqr() * nj;
            }
            Ok(T::one() + efficiency * (s_z - T::one()) * half)
        })
        .collect()
}

/// Sideband-model parameters implied by a linear model: spring-shifted
/// frequency, linewidth Γ_opt + γ_m, Lyapunov occupation and weight
/// 2η·4g²/κ.
pub fn sideband_model_for<T: Real>(model: &LinearModel<T>, efficiency: T) -> Result<SpectrumModelParams<T>> {
    let p = &model.params;
    let ss = steady_state_covariance(model)?;
    let (am, ap) = scattering_rates(p.g, p.kappa, p.delta, p.omega)?;
    let spring = optical_spring(p.g, p.kappa, p.delta, p.omega)?;
    let four = T::of(4.0);
    Ok(SpectrumModelParams {
        modes: vec![ModeParams {
            omega: p.omega + spring,
            gamma: am - ap + p.gamma_m,
            n_occ: ss.n_x,
            weight: T::of(2.0) * efficiency * four * p.g * p.g / p.kappa,
        }],
        kappa: p.kappa,
        delta: p.delta,
        classical_floor: None,
    })
}

/// RMS of psd/model − 1 over bins within `half_widths` linewidths of any
/// sideband centre; returns (rms, bins used).
pub fn sideband_rms_deviation<T: Real>(
    psd: &PsdTrace<T>,
    model: &SpectrumModelParams<T>,
    half_widths: T,
) -> Result<(T, usize)> {
    model.validate()?;
    let mut acc = T::zero();
    let mut count = 0usize;
    for (&f, &s) in psd.freq.iter().zip(&psd.psd) {
        let inside = model
            .modes
            .iter()
            .any(|m| (f - m.omega).abs() <= half_widths * m.gamma || (f + m.omega).abs() <= half_widths * m.gamma);
        if inside {
            acc += (s / model.evaluate(f) - T::one()).sq();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::domain("sideband_rms_deviation", "no bins inside the sideband support"));
    }
    Ok(((acc / T::from_usize_lossy(count)).sqrt(), count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooling::ModelParams;
    use crate::scalar::angular;

    fn thermal(gamma_m: f64, diffusive: bool) -> LinearModel<f64> {
        LinearModel::new(ModelParams {
            omega: angular(305e3),
            gamma_m,
            n_th: if diffusive { 1e4 } else { 0.0 },
            gamma_extra: 0.0,
            kappa: angular(193e3),
            delta: angular(315e3),
            g: 0.0,
            x_zpf: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn deterministic_decay_matches_closed_form() {
        let gamma = angular(2e3);
        let m = thermal(gamma, false);
        let w = m.params.omega;
        let dt = 0.02 * angular(1.0) / w;
        let prop = ExactPropagator::new(&m, dt).unwrap();
        let mut s = DVector::zeros(N_AUG);
        s[0] = 1.0;
        let wd = (w * w - gamma * gamma / 4.0).sqrt();
        for k in 1..=5000 {
            s = prop.deterministic(&s);
            let t = k as f64 * dt;
            // q̈ + γq̇ + Ω²q = 0 with q(0)=1, q̇(0)=0 (q̇ = Ωp).
            let q = (-gamma * t / 2.0).exp() * ((wd * t).cos() + gamma / (2.0 * wd) * (wd * t).sin());
            assert!((s[0] - q).abs() < 1e-8, "step {k}: {} vs {q}", s[0]);
        }
    }

    #[test]
    fn noise_covariance_accumulates_to_lyapunov() {
        let m = thermal(angular(2e3), true);
        let dt = 0.02 * angular(1.0) / m.params.omega;
        let prop = ExactPropagator::new(&m, dt).unwrap();
        let mut v = DMatrix::zeros(N_AUG, N_AUG);
        let phi = prop.transition.view((0, 0), (4, 4)).into_owned();
        let q = prop.noise_covariance.view((0, 0), (4, 4)).into_owned();
        let mut v4 = v.view((0, 0), (4, 4)).into_owned();
        for _ in 0..200_000 {
            v4 = &phi * &v4 * phi.transpose() + &q;
        }
        v.view_mut((0, 0), (4, 4)).copy_from(&v4);
        let ss = steady_state_covariance(&m).unwrap();
        assert!((v4[(0, 0)] / ss.covariance[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equipartition_of_thermal_oscillator() {
        let m = thermal(angular(20e3), true);
        let dt = 0.05 * angular(1.0) / m.params.omega;
        let run = simulate_langevin_states(&m, 1.0, dt, 0.2, 3).unwrap();
        let n = run.states.len() as f64;
        let var = run.states.iter().map(|s| s[0] * s[0]).sum::<f64>() / n;
        // ⟨x²⟩ = 2x_zpf²(n+½) = k_B T/(mΩ²) with x_zpf = 1.
        let expected = 2.0 * (1e4 + 0.5) / 2.0;
        assert!((var / expected - 1.0).abs() < 0.03, "var = {var}, expected {expected}");
    }

    #[test]
    fn vacuum_record_is_unit_white() {
        let m = thermal(angular(5e3), false);
        let dt = 0.05 * angular(1.0) / m.params.omega;
        let tr = simulate_langevin(&m, 0.5, dt, 0.004, 1).unwrap();
        let n = tr.samples.len() as f64;
        let var = tr.samples.iter().map(|s| s * s).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.01, "var = {var}");
    }

    #[test]
    fn preconditions() {
        let m = thermal(angular(5e3), true);
        let w = m.params.omega;
        assert!(matches!(
            simulate_langevin(&m, 1.0, 0.2 * angular(1.0) / w, 1.0, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            simulate_langevin(&m, 1.0, 0.01 * angular(1.0) / w, 1e-4, 0),
            Err(Error::Precondition(_))
        ));
        let mut p = m.params;
        p.delta = -p.omega;
        p.g = angular(71e3);
        let hot = LinearModel::new(p).unwrap();
        assert!(matches!(
            simulate_langevin(&hot, 1.0, 1e-8, 1.0, 0),
            Err(Error::Instability { .. })
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let m = thermal(angular(5e3), true);
        let dt = 0.05 * angular(1.0) / m.params.omega;
        let a = simulate_langevin(&m, 0.3, dt, 0.004, 9).unwrap();
        let b = simulate_langevin(&m, 0.3, dt, 0.004, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.model_hash.len(), 16);
    }

    #[test]
    fn exact_spectrum_reduces_to_sideband_model_at_weak_coupling() {
        use crate::specgen::uniform_grid;
        let mut p = thermal(angular(1e2), true).params;
        p.g = p.kappa / 30.0;
        p.gamma_extra = angular(1e3);
        let m = LinearModel::new(p).unwrap();
        let ss = steady_state_covariance(&m).unwrap();
        let (am, ap) = scattering_rates(p.g, p.kappa, p.delta, p.omega).unwrap();
        let eta = 0.4;
        let model = SpectrumModelParams {
            modes: vec![ModeParams {
                omega: p.omega,
                gamma: am - ap + p.gamma_m,
                n_occ: ss.n_x,
                weight: 2.0 * eta * 4.0 * p.g * p.g / p.kappa,
            }],
            kappa: p.kappa,
            delta: p.delta,
            classical_floor: None,
        };
        // Sideband areas agree; the peak positions carry the optical spring.
        let gamma = model.modes[0].gamma;
        let (a_s, a_as) = model.modes[0].amplitudes(p.kappa, p.delta).unwrap();
        for (centre, area) in [(p.omega, a_as), (-p.omega, a_s)] {
            let grid = uniform_grid(centre - 40.0 * gamma, centre + 40.0 * gamma, 20_001);
            let dw = grid[1] - grid[0];
            let exact: f64 = linear_heterodyne_spectrum(&m, eta, &grid).unwrap().iter().map(|s| s - 1.0).sum::<f64>() * dw;
            let approx = area * std::f64::consts::PI * (2.0 / std::f64::consts::PI * (80.0f64).atan());
            assert!((exact / approx - 1.0).abs() < 0.02, "{exact} vs {approx}");
        }
    }
}
