use std::path::Path;
use std::process::{Command, Output};

use levicool::cavity::{cavity_response, TransmissionScan};
use levicool::io::{read_psd_csv, write_psd_csv, write_scan_csv};
use levicool::report::RunReport;
use levicool::scalar::angular;
use levicool::specgen::{heterodyne_model, synthesize_spectrum, uniform_grid, SpectrumModelParams};

fn levicool(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levicool"))
        .args(args)
        .env("LEVICOOL_OUT", out)
        .output()
        .expect("binary runs")
}

fn report(path: &Path) -> RunReport {
    RunReport::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicool(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("sweep"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicool(dir.path(), &["budget", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&levicool::config::ConfigFile::paper_defaults().to_json_pretty()).unwrap();
    v["cavity"]["linewidth_hz"] = serde_json::json!(-1.0);
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = levicool(dir.path(), &["budget", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cavity.linewidth_hz") && err.contains("Hz"), "{err}");
}

#[test]
fn sweep_band_brackets_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicool(
        dir.path(),
        &["sweep", "--pressure", "0.7e-6:1.3e-6", "--delta", "200e3:500e3:5e3", "--format", "csv"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<String>> = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    let at = rows.iter().find(|r| r[0] == "315000").expect("row at 315 kHz");
    let (lo, hi): (f64, f64) = (at[1].parse().unwrap(), at[2].parse().unwrap());
    assert!(lo < 0.43 && 0.43 < hi, "[{lo}, {hi}]");
    assert_eq!(at[4], "1");
}

#[test]
fn fit_recovers_synthetic_occupation() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicool(dir.path(), &["simulate", "--n", "1", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = dir.path().join("spectrum.csv");
    let o = levicool(dir.path(), &["fit", "--in", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("fit.json"));
    let occ = r.occupation.unwrap();
    assert!((occ.n - 1.0).abs() <= 3.0 * occ.sigma_n, "{} ± {}", occ.n, occ.sigma_n);
    assert_eq!(r.input_hashes.len(), 1);
    assert!(r.fit.is_some());
}

#[test]
fn band_methods_need_a_band() {
    let dir = tempfile::tempdir().unwrap();
    levicool(dir.path(), &["simulate"]);
    let spec = dir.path().join("spectrum.csv");
    let o = levicool(dir.path(), &["fit", "--in", spec.to_str().unwrap(), "--method", "band"]);
    assert_eq!(o.status.code(), Some(2));
    let o = levicool(
        dir.path(),
        &["fit", "--in", spec.to_str().unwrap(), "--method", "band", "--band", "250e3:360e3"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flat_spectrum_is_analysis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let grid = uniform_grid(angular(-600e3), angular(600e3), 1201);
    let model = heterodyne_model(
        &SpectrumModelParams { modes: vec![], kappa: angular(193e3), delta: angular(315e3), classical_floor: None },
        &grid,
    )
    .unwrap();
    let p = dir.path().join("flat.csv");
    write_psd_csv(&p, &synthesize_spectrum(&model, 500, 3).unwrap()).unwrap();
    let o = levicool(dir.path(), &["fit", "--in", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn kappa_from_scans() {
    let dir = tempfile::tempdir().unwrap();
    let k = angular(193e3);
    let mut args = vec!["kappa".to_string()];
    for i in 0..3 {
        let grid = uniform_grid(angular(-1e6), angular(1e6), 401);
        let power = grid.iter().map(|&d| cavity_response(k, d, 0.0).unwrap() * (1.0 + 0.01 * i as f64)).collect();
        let p = dir.path().join(format!("scan{i}.csv"));
        write_scan_csv(&p, &TransmissionScan::new(grid, power, format!("s{i}")).unwrap()).unwrap();
        args.extend(["--in".into(), p.display().to_string()]);
    }
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = levicool(dir.path(), &argv);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let est = report(&dir.path().join("kappa.json")).kappa.unwrap();
    assert!((est.kappa / k - 1.0).abs() < 1e-3, "κ = {}", est.kappa);
}

#[test]
fn detuning_from_classical_floor() {
    let dir = tempfile::tempdir().unwrap();
    let grid = uniform_grid(angular(-800e3), angular(800e3), 1601);
    let params = SpectrumModelParams {
        modes: vec![],
        kappa: angular(193e3),
        delta: angular(315e3),
        classical_floor: Some(2.0),
    };
    let psd = synthesize_spectrum(&heterodyne_model(&params, &grid).unwrap(), 500, 11).unwrap();
    let p = dir.path().join("noise.csv");
    write_psd_csv(&p, &psd).unwrap();
    let o = levicool(dir.path(), &["detuning", "--in", p.to_str().unwrap(), "--band", "350e3:700e3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let est = report(&dir.path().join("detuning.json")).detuning.unwrap();
    assert!((est.delta - angular(315e3)).abs() <= angular(10e3));
}

#[test]
fn decohere_and_budget_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(levicool(dir.path(), &["decohere"]).status.code(), Some(0));
    let ff = report(&dir.path().join("free_fall.json")).free_fall.unwrap();
    assert!((ff.tau_target / 12e-3 - 1.0).abs() < 0.1);
    let json = std::fs::read_to_string(dir.path().join("free_fall.json")).unwrap();
    assert!(json.contains("required_pressure_pa") && json.contains("required_pressure_mbar"));
    let o = levicool(dir.path(), &["decohere", "--target", "1e-13"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(levicool(dir.path(), &["budget"]).status.code(), Some(0));
    let b = report(&dir.path().join("budget.json")).budget.unwrap();
    assert!(b.get("gamma_gas").is_some());
}

#[test]
fn report_passes_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = levicool(d.path(), &["report", "--seed", "5"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ja = std::fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.path().join("report.json")).unwrap());
}

#[test]
fn report_fails_with_doubled_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = levicool::config::ConfigFile::paper_defaults();
    f.cavity.linewidth_hz *= 2.0;
    f.cavity.finesse /= 2.0;
    let cfg = dir.path().join("k2.json");
    std::fs::write(&cfg, f.to_json_pretty()).unwrap();
    let o = levicool(dir.path(), &["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_min"));
}

#[test]
fn trace_simulation_writes_both_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = levicool(dir.path(), &["simulate", "--kind", "trace", "--duration", "0.02"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let psd = read_psd_csv::<f64>(&dir.path().join("spectrum.csv")).unwrap();
    assert!(psd.n_avg >= 50);
    let t = levicool::io::read_time_trace::<f64>(&dir.path().join("trace.bin")).unwrap();
    assert_eq!(t.seed, 1);
}
