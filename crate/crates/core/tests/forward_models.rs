use levicool::config::ConfigFile;
use levicool::cooling::{steady_state_covariance, LinearModel, ModelParams};
use levicool::scalar::angular;
use levicool::specgen::{
    heterodyne_psd, linear_heterodyne_spectrum, sideband_model_for, sideband_rms_deviation, simulate_langevin,
    simulate_langevin_states, welch_psd, TimeTrace, Window,
};

fn default_model() -> LinearModel<f64> {
    let cfg: levicool::Config = ConfigFile::paper_defaults().to_experiment().unwrap();
    LinearModel::new(ModelParams::from_config(&cfg, 1e-4, cfg.drive.detuning).unwrap()).unwrap()
}

fn max_dt(m: &LinearModel<f64>) -> f64 {
    0.05 * angular(1.0) / m.params.omega.max(m.params.kappa)
}

#[test]
fn welch_of_langevin_matches_sideband_model() {
    let m = default_model();
    let eta = 0.25;
    let dt = max_dt(&m);
    let seg = (1.0 / (dt * 5e3)) as usize;
    let tr = simulate_langevin(&m, eta, dt, seg as f64 * dt * 4000.0, 11).unwrap();
    let psd = heterodyne_psd(&tr, seg, Window::Hann).unwrap();
    let model = sideband_model_for(&m, eta).unwrap();
    let (rms, bins) = sideband_rms_deviation(&psd, &model, 2.0).unwrap();
    assert!(bins > 100);
    assert!(rms < 0.05, "rms = {rms}");

    // The exact linear-model spectrum is closer still.
    let exact = linear_heterodyne_spectrum(&m, eta, &psd.freq).unwrap();
    let n = psd.len() as f64;
    let dev = (psd.psd.iter().zip(&exact).map(|(a, b)| (a / b - 1.0).powi(2)).sum::<f64>() / n).sqrt();
    assert!(dev < 0.03, "exact rms = {dev}");
}

#[test]
fn position_spectrum_integrates_to_lyapunov_variance() {
    let m = default_model();
    let dt = max_dt(&m);
    let run = simulate_langevin_states(&m, 1.0, dt, 0.1, 5).unwrap();
    let ss = steady_state_covariance(&m).unwrap();
    let q = TimeTrace {
        dt,
        samples: run.states.iter().map(|s| s[0]).collect(),
        seed: 5,
        model_hash: run.trace.model_hash.clone(),
    };
    let var = q.samples.iter().map(|x| x * x).sum::<f64>() / q.samples.len() as f64;
    assert!((var / ss.covariance[(0, 0)] - 1.0).abs() < 0.03, "sample variance {var}");
    let p = welch_psd(&q, 4096, Window::Hann).unwrap();
    let integral = p.psd.iter().sum::<f64>() * p.resolution_bw / angular(1.0);
    assert!((integral / ss.covariance[(0, 0)] - 1.0).abs() < 0.03, "∫S = {integral}");
}

#[test]
fn sample_covariance_matches_steady_state() {
    let m = default_model();
    let dt = max_dt(&m);
    let run = simulate_langevin_states(&m, 1.0, dt, 0.05, 21).unwrap();
    let ss = steady_state_covariance(&m).unwrap();
    let n = run.states.len() as f64;
    for i in 0..4 {
        for j in 0..4 {
            let c = run.states.iter().map(|s| s[i] * s[j]).sum::<f64>() / n;
            let v = ss.covariance[(i, j)];
            let scale = (ss.covariance[(i, i)] * ss.covariance[(j, j)]).sqrt();
            assert!((c - v).abs() <= 0.05 * scale, "V[{i}{j}]: {c} vs {v}");
        }
    }
}
