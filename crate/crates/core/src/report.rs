//! Run reports and the comparison against reference values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::budget::{cooperativity, total_budget, HeatingBudget};
use crate::cavity::{DetuningEstimate, LinewidthEstimate};
use crate::config::ConfigFile;
use crate::cooling::{backaction_limit, SweepPoint};
use crate::decohere::{free_fall_plan, FreeFallReport};
use crate::error::{Error, Result};
use crate::physpar::{occupation_temperature, thermal_de_broglie, ExperimentConfig};
use crate::scalar::ordinary;
use crate::specgen::{experiment_spectrum, synthesize_spectrum, SynthesisGrid};
use crate::thermo::{
    fit_sidebands, occupation_from_asymmetry, psd_hash, EnvelopeCalibration, OccupationMethod,
    OccupationResult, ShotNoiseVerdict, SidebandFit, SidebandPeak,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Averages used by the closed-loop row of the comparison.
pub const CLOSED_LOOP_N_AVG: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemSource {
    Computed,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetItem {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub source: ItemSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub items: Vec<BudgetItem>,
}

impl BudgetReport {
    /// Rates as ordinary frequencies (Hz); phase heating is a config input.
    pub fn from_budget(b: &HeatingBudget<f64>) -> Self {
        use ItemSource::*;
        let item = |name: &str, value: f64, unit: &str, source| BudgetItem {
            name: name.into(),
            value,
            unit: unit.into(),
            source,
        };
        let mut items = vec![
            item("gamma_gas", ordinary(b.gamma_gas), "Hz", Computed),
            item("gamma_rec", ordinary(b.gamma_rec), "Hz", Computed),
            item("gamma_phase", ordinary(b.gamma_phase), "Hz", PassThrough),
        ];
        for (axis, g) in ["x", "y", "z"].iter().zip(b.gamma_int) {
            items.push(item(&format!("gamma_int_{axis}"), ordinary(g), "Hz", Computed));
        }
        items.extend([
            item("n_phase", b.n_phase, "phonons", Computed),
            item("n_int", b.n_int, "phonons", PassThrough),
            item("c_pp", b.c_pp, "1", PassThrough),
            item("c_qq", b.c_qq, "1", PassThrough),
            item("gamma_total", ordinary(b.gamma_total), "Hz", Computed),
            item("cooperativity", b.cooperativity, "1", Computed),
            item("t_trap", b.t_trap, "s", Computed),
            item("n_osc", b.n_osc, "1", Computed),
        ]);
        Self { items }
    }

    pub fn get(&self, name: &str) -> Option<&BudgetItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// One sideband pair in ordinary units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub omega_hz: f64,
    pub gamma_hz: f64,
    pub a_s: f64,
    pub a_as: f64,
}

impl From<SidebandPeak<f64>> for PeakSummary {
    fn from(p: SidebandPeak<f64>) -> Self {
        Self {
            omega_hz: ordinary(p.omega),
            gamma_hz: ordinary(p.gamma),
            a_s: p.a_s,
            a_as: p.a_as,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub x: PeakSummary,
    pub y: Option<PeakSummary>,
    pub ratio_as_s: f64,
    pub reduced_chi2: f64,
    pub n_points: usize,
    pub low_confidence: bool,
    pub mask_hz: Vec<(f64, f64)>,
}

impl From<&SidebandFit<f64>> for FitSummary {
    fn from(f: &SidebandFit<f64>) -> Self {
        Self {
            x: f.x.into(),
            y: f.y.map(Into::into),
            ratio_as_s: f.x.a_as / f.x.a_s,
            reduced_chi2: f.reduced_chi2,
            n_points: f.n_points,
            low_confidence: f.low_confidence,
            mask_hz: f.mask.iter().map(|&(a, b)| (ordinary(a), ordinary(b))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
    /// Computed within [reference/f, reference·f].
    Factor(f64),
}

impl Tolerance {
    pub fn accepts(&self, computed: f64, reference: f64) -> bool {
        if !computed.is_finite() {
            return false;
        }
        match *self {
            Tolerance::Absolute(a) => (computed - reference).abs() <= a,
            Tolerance::Relative(r) => (computed - reference).abs() <= r * reference.abs(),
            Tolerance::Factor(f) => {
                let q = computed / reference;
                q >= 1.0 / f && q <= f
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub unit: String,
    /// Absent when the computation failed; see `note`.
    pub computed: Option<f64>,
    pub reference: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ComparisonRow {
    fn new(quantity: &str, unit: &str, computed: Result<f64>, reference: f64, tolerance: Tolerance) -> Self {
        let (computed, note) = match computed {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite result {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            quantity: quantity.into(),
            unit: unit.into(),
            pass: computed.is_some_and(|v| tolerance.accepts(v, reference)),
            computed,
            reference,
            tolerance,
            note,
        }
    }
}

/// Everything a run produced, with the inputs needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub toolkit_version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: ConfigFile,
    pub input_hashes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationResult<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<LinewidthEstimate<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<DetuningEstimate<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_noise: Option<ShotNoiseVerdict<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_fall: Option<FreeFallReport<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPoint<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<ComparisonRow>>,
}

impl RunReport {
    pub fn new(command: impl Into<String>, config: ConfigFile, seed: Option<u64>) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.into(),
            command: command.into(),
            seed,
            config,
            input_hashes: BTreeMap::new(),
            occupation: None,
            fit: None,
            kappa: None,
            detuning: None,
            shot_noise: None,
            budget: None,
            free_fall: None,
            sweep: None,
            comparison: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn failed_rows(&self) -> Vec<&ComparisonRow> {
        self.comparison.iter().flatten().filter(|r| !r.pass).collect()
    }
}

/// Closed loop at the measured occupation: synthesize, fit, invert.
pub fn closed_loop_occupation(cfg: &ExperimentConfig<f64>, n_avg: usize, seed: u64) -> Result<OccupationResult<f64>> {
    let model = experiment_spectrum(cfg, cfg.measured.occupation, false, &SynthesisGrid::default())?;
    let psd = synthesize_spectrum(&model, n_avg, seed)?;
    let fit = fit_sidebands(&psd, None, &[])?;
    occupation_from_asymmetry(&fit, &EnvelopeCalibration::from_config(cfg), OccupationMethod::JointFit, psd_hash(&psd))
}

/// Radius of the particle, the free-fall target.
fn target_sigma(cfg: &ExperimentConfig<f64>) -> f64 {
    cfg.particle.radius()
}

/// Runs the full chain and compares against the reference values with the
/// acceptance tolerances. Deterministic for a given config and seed.
pub fn reproduce_paper(file: &ConfigFile, seed: u64) -> Result<RunReport> {
    let cfg: ExperimentConfig<f64> = file.to_experiment()?;
    let k = &cfg.constants;
    let omega = cfg.omega_x();
    let n_meas = cfg.measured.occupation;
    let budget = total_budget(&cfg, false)?;
    let free_fall = free_fall_plan(&cfg, target_sigma(&cfg));

    use Tolerance::*;
    let mut rows = vec![
        ComparisonRow::new("n_min", "phonons", backaction_limit(cfg.cavity.kappa, omega), 0.025, Absolute(0.0005)),
        ComparisonRow::new(
            "cooperativity",
            "1",
            cooperativity(cfg.drive.coupling_x, cfg.cavity.kappa, cfg.measured.heating_total),
            5.0,
            Absolute(0.2),
        ),
        ComparisonRow::new(
            "T_mode",
            "uK",
            occupation_temperature(k, n_meas, omega).map(|t| t.temperature * 1e6),
            12.2,
            Absolute(0.1),
        ),
        ComparisonRow::new(
            "ground_state_probability",
            "%",
            occupation_temperature(k, n_meas, omega).map(|t| t.ground_probability * 100.0),
            70.0,
            Absolute(1.0),
        ),
        ComparisonRow::new("x_zpf", "pm", Ok(cfg.x_zpf() * 1e12), 3.1, Relative(0.02)),
    ];
    let lambda_th = thermal_de_broglie(k, cfg.environment.gas_molecule_mass, cfg.environment.temperature);
    rows.push(ComparisonRow::new(
        "lambda_th",
        "pm",
        lambda_th.as_ref().map(|l| l * 1e12).map_err(clone_err),
        19.0,
        Relative(0.03),
    ));
    rows.push(ComparisonRow::new(
        "lambda_th/x_zpf",
        "1",
        lambda_th.map(|l| l / cfg.x_zpf()),
        6.2,
        Absolute(0.2),
    ));
    let ff = |f: fn(&FreeFallReport<f64>) -> f64| free_fall.as_ref().map(f).map_err(clone_err);
    rows.extend([
        ComparisonRow::new("t_max", "us", ff(|r| r.t_max * 1e6), 1.42, Relative(0.03)),
        ComparisonRow::new("xi_max", "pm", ff(|r| r.xi_max * 1e12), 10.2, Relative(0.03)),
        ComparisonRow::new("Gamma_sat", "MHz", ff(|r| r.gamma_sat * 1e-6), 3.6, Relative(0.15)),
        ComparisonRow::new("tau", "ms", ff(|r| r.tau_target * 1e3), 12.0, Relative(0.1)),
        ComparisonRow::new(
            "required_rate",
            "Hz",
            ff(|r| r.required_rate.unwrap_or(f64::NAN)),
            84.0,
            Relative(0.05),
        ),
        ComparisonRow::new(
            "required_pressure",
            "mbar",
            ff(|r| r.required_pressure_mbar),
            2e-11,
            Factor(1.5),
        ),
        ComparisonRow::new("t_max_bb", "ms", ff(|r| r.t_max_bb * 1e3), 0.55, Relative(0.1)),
        ComparisonRow::new("xi_max_bb", "nm", ff(|r| r.xi_max_bb * 1e9), 2.0, Factor(2.5)),
    ]);
    let closed = closed_loop_occupation(&cfg, CLOSED_LOOP_N_AVG, seed);
    rows.push(ComparisonRow::new(
        "n_x_closed_loop",
        "phonons",
        closed.as_ref().map(|r| r.n).map_err(clone_err),
        n_meas,
        Absolute(0.05),
    ));

    let mut report = RunReport::new("report", file.clone(), Some(seed));
    report.budget = Some(BudgetReport::from_budget(&budget));
    report.free_fall = free_fall.ok();
    report.occupation = closed.ok();
    report.comparison = Some(rows);
    Ok(report)
}

// Errors are not Clone; rows only need the message.
fn clone_err(e: &Error) -> Error {
    Error::Precondition(e.to_string())
}
