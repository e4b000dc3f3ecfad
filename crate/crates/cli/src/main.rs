use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use levicool::budget::total_budget;
use levicool::cavity::{estimate_detuning, fit_linewidth};
use levicool::config::{load_experiment, ConfigFile, PA_PER_MBAR};
use levicool::cooling::{detuning_sweep, LinearModel, ModelParams};
use levicool::decohere::free_fall_plan;
use levicool::io::{
    artifact_path, read_psd_csv, read_scan_csv, sha256_file, write_psd_csv, write_sweep_csv, write_time_trace,
};
use levicool::physpar::ExperimentConfig;
use levicool::report::{reproduce_paper, BudgetReport, FitSummary, RunReport};
use levicool::scalar::{angular, ordinary};
use levicool::specgen::{
    experiment_spectrum, heterodyne_psd, simulate_langevin, synthesize_spectrum, SynthesisGrid, Window,
};
use levicool::thermo::{
    band_power_occupation, fit_sidebands, occupation_from_asymmetry, psd_hash, worst_case_occupation,
    EnvelopeCalibration, OccupationMethod,
};
use levicool::Error;

#[derive(Parser)]
#[command(name = "levicool", version, about = "Cavity cooling, sideband thermometry and decoherence budgets")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration JSON; the bundled defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, env = "LEVICOOL_OUT", default_value = "levicool-out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Format of tabular output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    /// Model spectrum with averaged-periodogram noise.
    Spectrum,
    /// Langevin time trace and its Welch spectrum.
    Trace,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Joint,
    Masked,
    Band,
    WorstCase,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a heterodyne spectrum or integrate the Langevin model.
    Simulate {
        #[arg(long, value_enum, default_value_t = SimKind::Spectrum)]
        kind: SimKind,
        /// Cavity-axis occupation; the measured value when omitted.
        #[arg(long)]
        n: Option<f64>,
        #[arg(long, default_value_t = 500)]
        n_avg: usize,
        /// Add the weakly coupled y-mode pair.
        #[arg(long)]
        include_y: bool,
        /// Trace length, s.
        #[arg(long, default_value_t = 0.1)]
        duration: f64,
        /// Welch resolution bandwidth, Hz.
        #[arg(long, default_value_t = 5e3)]
        rbw: f64,
    },
    /// Fit sidebands in a spectrum CSV and report the occupation.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Joint)]
        method: Method,
        /// |f| interval to exclude, Hz, as lo:hi; repeatable.
        #[arg(long, value_parser = parse_range)]
        mask: Vec<(f64, f64)>,
        /// |f| band for band-power methods, Hz, as lo:hi.
        #[arg(long, value_parser = parse_range)]
        band: Option<(f64, f64)>,
    },
    /// Cavity linewidth from transmission scans.
    Kappa {
        #[arg(long = "in", required = true)]
        input: Vec<PathBuf>,
    },
    /// Laser detuning from the classical-noise asymmetry of a spectrum.
    Detuning {
        #[arg(long = "in")]
        input: PathBuf,
        /// |f| band free of motional sidebands, Hz, as lo:hi.
        #[arg(long, value_parser = parse_range)]
        band: (f64, f64),
    },
    /// Heating-rate budget.
    Budget {
        /// Include the phase-noise heating bound in the total.
        #[arg(long)]
        include_phase: bool,
    },
    /// Steady-state occupation versus detuning over a pressure band.
    Sweep {
        /// Pressure band, mbar, as lo:hi.
        #[arg(long, value_parser = parse_range, default_value = "0.7e-6:1.3e-6")]
        pressure: (f64, f64),
        /// Detuning grid, Hz, as lo:hi:step.
        #[arg(long, value_parser = parse_grid, default_value = "-400e3:900e3:5e3")]
        delta: (f64, f64, f64),
    },
    /// Free-fall coherence forecast.
    Decohere {
        /// Target wavepacket size, m; the particle radius when omitted.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Full chain against the reference values.
    Report,
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} colon-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    if !(v[0] < v[1]) {
        return Err("range must satisfy lo < hi".into());
    }
    Ok((v[0], v[1]))
}

fn parse_grid(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_floats(s, 3)?;
    if !(v[0] <= v[1] && v[2] > 0.0) {
        return Err("grid must satisfy lo <= hi and step > 0".into());
    }
    Ok((v[0], v[1], v[2]))
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_analysis_failure() {
            Failure::Analysis(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

struct Ctx {
    file: ConfigFile,
    cfg: ExperimentConfig<f64>,
    common: Common,
}

impl Ctx {
    fn report(&self, command: &str) -> RunReport {
        let mut r = RunReport::new(command, self.file.clone(), Some(self.common.seed));
        if let Some(p) = &self.common.config {
            if let Ok(h) = sha256_file(p) {
                r.input_hashes.insert(p.display().to_string(), h);
            }
        }
        r
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        Ok(artifact_path(&self.common.out, name)?)
    }

    fn emit(&self, report: &RunReport, name: &str) -> Result<(), Failure> {
        let path = self.path(name)?;
        report.write(&path)?;
        println!("{}", path.display());
        Ok(())
    }
}

fn hash_inputs(report: &mut RunReport, inputs: &[&Path]) -> Result<(), Failure> {
    for p in inputs {
        report.input_hashes.insert(p.display().to_string(), sha256_file(p)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Analysis(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (file, cfg) = load_experiment::<f64>(cli.common.config.as_deref())?;
    let ctx = Ctx {
        file,
        cfg,
        common: cli.common,
    };
    match cli.command {
        Command::Simulate {
            kind,
            n,
            n_avg,
            include_y,
            duration,
            rbw,
        } => simulate(&ctx, kind, n, n_avg, include_y, duration, rbw),
        Command::Fit {
            input,
            method,
            mask,
            band,
        } => fit(&ctx, &input, method, &mask, band),
        Command::Kappa { input } => kappa(&ctx, &input),
        Command::Detuning { input, band } => detuning(&ctx, &input, band),
        Command::Budget { include_phase } => budget(&ctx, include_phase),
        Command::Sweep { pressure, delta } => sweep(&ctx, pressure, delta),
        Command::Decohere { target } => decohere(&ctx, target),
        Command::Report => report(&ctx),
    }
}

fn simulate(
    ctx: &Ctx,
    kind: SimKind,
    n: Option<f64>,
    n_avg: usize,
    include_y: bool,
    duration: f64,
    rbw: f64,
) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    match kind {
        SimKind::Spectrum => {
            let n = n.unwrap_or(cfg.measured.occupation);
            let model = experiment_spectrum(cfg, n, include_y, &SynthesisGrid::default())?;
            let psd = synthesize_spectrum(&model, n_avg, ctx.common.seed)?;
            let path = ctx.path("spectrum.csv")?;
            write_psd_csv(&path, &psd)?;
            println!("{}", path.display());
        }
        SimKind::Trace => {
            if n.is_some() || include_y {
                return Err(Failure::Usage("--n and --include-y apply to --kind spectrum only".into()));
            }
            let params = ModelParams::from_config(cfg, cfg.environment.pressure, cfg.drive.detuning)?;
            let model = LinearModel::new(params)?;
            let dt = 0.05 * std::f64::consts::TAU / params.omega.max(params.kappa);
            let trace = simulate_langevin(&model, cfg.detection.efficiency, dt, duration, ctx.common.seed)?;
            let seg = ((1.0 / (rbw * dt)).round() as usize).clamp(2, trace.samples.len());
            let psd = heterodyne_psd(&trace, seg, Window::Hann)?;
            let (tp, sp) = (ctx.path("trace.bin")?, ctx.path("spectrum.csv")?);
            write_time_trace(&tp, &trace)?;
            write_psd_csv(&sp, &psd)?;
            println!("{}\n{}", tp.display(), sp.display());
        }
    }
    Ok(())
}

fn hz_pairs(v: &[(f64, f64)]) -> Vec<(f64, f64)> {
    v.iter().map(|&(a, b)| (angular(a), angular(b))).collect()
}

fn fit(ctx: &Ctx, input: &Path, method: Method, mask: &[(f64, f64)], band: Option<(f64, f64)>) -> Result<(), Failure> {
    let psd = read_psd_csv::<f64>(input)?;
    let cal = EnvelopeCalibration::from_config(&ctx.cfg);
    let mask = hz_pairs(mask);
    let mut report = ctx.report("fit");
    hash_inputs(&mut report, &[input])?;
    let band = band.map(|(a, b)| (angular(a), angular(b)));
    let occupation = match method {
        Method::Joint | Method::Masked => {
            if method == Method::Masked && mask.is_empty() {
                return Err(Failure::Usage("--method masked needs at least one --mask".into()));
            }
            let m = if method == Method::Joint { &[][..] } else { &mask[..] };
            let f = fit_sidebands(&psd, None, m)?;
            report.fit = Some(FitSummary::from(&f));
            let kind = if method == Method::Joint {
                OccupationMethod::JointFit
            } else {
                OccupationMethod::MaskedFit
            };
            occupation_from_asymmetry(&f, &cal, kind, psd_hash(&psd))?
        }
        Method::Band | Method::WorstCase => {
            let band = band.ok_or_else(|| Failure::Usage("band-power methods need --band lo:hi".into()))?;
            let omega_x = ctx.cfg.omega_x();
            if method == Method::Band {
                band_power_occupation(&psd, band, band, &mask, &cal, omega_x, OccupationMethod::BandPower)?
            } else {
                worst_case_occupation(&psd, band, &cal, omega_x)?
            }
        }
    };
    eprintln!(
        "n = {:.4} ± {:.4} ({:?}{})",
        occupation.n,
        occupation.sigma_n,
        occupation.method,
        if occupation.low_confidence { ", low confidence" } else { "" }
    );
    report.occupation = Some(occupation);
    ctx.emit(&report, "fit.json")
}

fn kappa(ctx: &Ctx, inputs: &[PathBuf]) -> Result<(), Failure> {
    let scans = inputs.iter().map(|p| read_scan_csv::<f64>(p)).collect::<Result<Vec<_>, _>>()?;
    let est = fit_linewidth(&scans)?;
    eprintln!("kappa/2pi = {:.1} ± {:.1} Hz", ordinary(est.kappa), ordinary(est.kappa_sigma));
    let mut report = ctx.report("kappa");
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    hash_inputs(&mut report, &refs)?;
    report.kappa = Some(est);
    ctx.emit(&report, "kappa.json")
}

fn detuning(ctx: &Ctx, input: &Path, band: (f64, f64)) -> Result<(), Failure> {
    let psd = read_psd_csv::<f64>(input)?;
    let est = estimate_detuning(&psd, (angular(band.0), angular(band.1)), ctx.cfg.cavity.kappa)?;
    eprintln!("Delta/2pi = {:.1} ± {:.1} Hz", ordinary(est.delta), ordinary(est.sigma));
    let mut report = ctx.report("detuning");
    hash_inputs(&mut report, &[input])?;
    report.detuning = Some(est);
    ctx.emit(&report, "detuning.json")
}

fn budget(ctx: &Ctx, include_phase: bool) -> Result<(), Failure> {
    let b = BudgetReport::from_budget(&total_budget(&ctx.cfg, include_phase)?);
    match ctx.common.format {
        Format::Json => {
            let mut report = ctx.report("budget");
            report.budget = Some(b);
            ctx.emit(&report, "budget.json")
        }
        Format::Csv => {
            let path = ctx.path("budget.csv")?;
            let mut text = String::from("name,value,unit,source\n");
            for i in &b.items {
                let src = serde_json::to_value(i.source).map_err(Error::from)?;
                text.push_str(&format!("{},{},{},{}\n", i.name, i.value, i.unit, src.as_str().unwrap_or("")));
            }
            std::fs::write(&path, text).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn sweep(ctx: &Ctx, pressure: (f64, f64), delta: (f64, f64, f64)) -> Result<(), Failure> {
    let (lo, hi, step) = delta;
    let n = ((hi - lo) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| angular(lo + step * i as f64)).collect();
    let points = detuning_sweep(&ctx.cfg, &grid, (pressure.0 * PA_PER_MBAR, pressure.1 * PA_PER_MBAR))?;
    match ctx.common.format {
        Format::Csv => {
            let path = ctx.path("sweep.csv")?;
            write_sweep_csv(&path, &points)?;
            println!("{}", path.display());
            Ok(())
        }
        Format::Json => {
            let mut report = ctx.report("sweep");
            report.sweep = Some(points);
            ctx.emit(&report, "sweep.json")
        }
    }
}

fn decohere(ctx: &Ctx, target: Option<f64>) -> Result<(), Failure> {
    let target = target.unwrap_or(ctx.cfg.particle.radius());
    let ff = free_fall_plan(&ctx.cfg, target)?;
    eprintln!(
        "tau = {:.3e} s, required pressure = {:.2e} mbar",
        ff.tau_target, ff.required_pressure_mbar
    );
    let mut report = ctx.report("decohere");
    report.free_fall = Some(ff);
    ctx.emit(&report, "free_fall.json")
}

fn report(ctx: &Ctx) -> Result<(), Failure> {
    let mut r = reproduce_paper(&ctx.file, ctx.common.seed)?;
    r.input_hashes = ctx.report("report").input_hashes;
    for row in r.comparison.iter().flatten() {
        let computed = row.computed.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4e}"));
        eprintln!(
            "[{}] {:<26} {:>12} vs {:>10.4e} {}",
            if row.pass { "PASS" } else { "FAIL" },
            row.quantity,
            computed,
            row.reference,
            row.unit
        );
    }
    ctx.emit(&r, "report.json")?;
    let failed: Vec<String> = r.failed_rows().iter().map(|row| row.quantity.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Analysis(format!("rows failed: {}", failed.join(", "))))
    }
}
