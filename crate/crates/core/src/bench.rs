//! Randomized SMST/EMST comparison against a mismatched plant.
//!
//! Each sequence draws its targets and its plant perturbation from one
//! ChaCha8 stream: seed `rng_seed`, stream number = sequence index. The
//! targets are drawn first, then the Everett perturbation, so a report is a
//! pure function of the configuration and identical on every platform.
//!
//! Both methods start from the same demagnetized state on fresh copies of
//! the plant. Planners are sensorless: they track their own prediction and
//! never see the plant. EMST targets that need saturation fall back to an
//! SMST plan and are counted.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{plan_energy, CoilParams, PulseWaveform};
use crate::hysteresis::{HysteresisModel, MagnetState, PreisachParams};
use crate::tuning::{execute_plan, smst_calibrate, Fallback, Method, Planner, SmstCalibration, DEFAULT_TOL_B};
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Relative Everett perturbation that puts the SMST RMSE of the default
/// configuration at 4.8 mT on seed 0. Found with [`calibrate_mismatch`]
/// over `[0, 0.01]` at a tolerance of 1 µT.
pub const DEFAULT_MISMATCH_SIGMA: f64 = 2.803955078125e-3;

pub const DETAIL_CSV_HEADER: &str = "seq,step,method,target_t,achieved_t,error_t,energy_j";

fn default_sigma() -> f64 {
    DEFAULT_MISMATCH_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub n_sequences: usize,
    pub seq_length: usize,
    /// Targets are uniform on `[lo, hi]`, T.
    pub target_range: (f64, f64),
    #[serde(default = "default_sigma")]
    pub mismatch_sigma: f64,
    pub rng_seed: u64,
    /// Grid of the planner's Everett table when built from `model`.
    pub planner_grid: usize,
    /// Corner-point samples behind the SMST lookup.
    pub smst_samples: usize,
    pub tol_b: f64,
    pub model: PreisachParams,
    pub coil: CoilParams,
    pub waveform: PulseWaveform,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_sequences: 20,
            seq_length: 10,
            target_range: (-1.0, 1.0),
            mismatch_sigma: DEFAULT_MISMATCH_SIGMA,
            rng_seed: 0,
            planner_grid: 201,
            smst_samples: 1001,
            tol_b: DEFAULT_TOL_B,
            model: PreisachParams::default(),
            coil: CoilParams::default(),
            waveform: PulseWaveform::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sequences == 0 || self.seq_length == 0 {
            return Err(Error::Config("n_sequences and seq_length must be at least 1".into()));
        }
        let (lo, hi) = self.target_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("target_range must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if lo < -self.model.b_r_max || hi > self.model.b_r_max {
            return Err(Error::Config(format!(
                "target_range [{lo}, {hi}] T exceeds ±b_r_max = {} T",
                self.model.b_r_max
            )));
        }
        if !(self.mismatch_sigma.is_finite() && self.mismatch_sigma >= 0.0) {
            return Err(Error::Config(format!("mismatch_sigma must be >= 0, got {}", self.mismatch_sigma)));
        }
        if !(self.tol_b.is_finite() && self.tol_b > 0.0) {
            return Err(Error::Config("tol_b must be > 0".into()));
        }
        self.model.validate()?;
        self.coil.validate()?;
        self.waveform.validate()
    }

    /// Planner model: the analytic model tabulated on `planner_grid`.
    pub fn planner_model(&self) -> Result<HysteresisModel> {
        HysteresisModel::analytic(self.model)?.tabulated(self.planner_grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub target_t: f64,
    pub achieved_t: f64,
    pub error_t: f64,
    pub energy_j: f64,
    /// Plan raised the predicted magnetization.
    pub up: bool,
    pub fell_back: bool,
    pub setpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub rmse_t: f64,
    pub mean_e_tune_j: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub seq: usize,
    pub targets: Vec<f64>,
    pub smst: MethodRun,
    pub emst: MethodRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Mean over sequences of the per-sequence RMSE, T.
    pub rmse_t: f64,
    /// Sample standard deviation of the per-sequence RMSE, T.
    pub rmse_std_t: f64,
    /// Mean energy per tuning step over all steps, J.
    pub mean_e_tune_j: f64,
    /// Sample standard deviation of the per-sequence mean step energy, J.
    pub e_tune_std_j: f64,
    pub mean_e_up_j: f64,
    pub mean_e_down_j: f64,
    pub up_steps: usize,
    pub down_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTable {
    pub smst: MethodSummary,
    pub emst: MethodSummary,
}

/// Tool version and configuration hash attached by front ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub config_echo: BenchConfig,
    pub fallback_policy: Fallback,
    pub methods: MethodTable,
    pub sequences: Vec<SequenceReport>,
    /// EMST targets executed through the SMST fallback.
    pub fallbacks: usize,
}

impl ComparisonReport {
    /// EMST energy over SMST energy, per tuning step on average.
    pub fn energy_ratio(&self) -> f64 {
        self.methods.emst.mean_e_tune_j / self.methods.smst.mean_e_tune_j
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line() as u64, msg: e.to_string() })?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Report(format!("unsupported report format_version {}", r.format_version)));
        }
        Ok(r)
    }
}

fn run_method(
    method: Method,
    targets: &[f64],
    initial: &MagnetState,
    plant_model: &Arc<HysteresisModel>,
    calibration: &Arc<SmstCalibration>,
    cfg: &BenchConfig,
) -> Result<MethodRun> {
    let mut planner = Planner::new(method, initial.clone(), calibration.clone(), cfg.tol_b, Fallback::Smst);
    let mut plant = initial.with_model(plant_model.clone())?;
    let mut steps = Vec::with_capacity(targets.len());
    for (k, &t) in targets.iter().enumerate() {
        let before = planner.predicted().remanence();
        let planned = planner.plan(t)?;
        let ex = execute_plan(&planned.plan, &mut plant)?;
        steps.push(StepRecord {
            step: k,
            target_t: t,
            achieved_t: ex.achieved,
            error_t: ex.error,
            energy_j: plan_energy(&planned.plan, &cfg.waveform, &cfg.coil).total_j,
            up: !planned.plan.is_trivial() && t > before,
            fell_back: planned.fell_back,
            setpoints: planned.plan.setpoints,
        });
    }
    let n = steps.len() as f64;
    let rmse_t = (steps.iter().map(|s| s.error_t * s.error_t).sum::<f64>() / n).sqrt();
    let mean_e_tune_j = steps.iter().map(|s| s.energy_j).sum::<f64>() / n;
    Ok(MethodRun { rmse_t, mean_e_tune_j, steps })
}

fn run_sequence(
    seq: usize,
    cfg: &BenchConfig,
    planner_model: &Arc<HysteresisModel>,
    calibration: &Arc<SmstCalibration>,
    initial: &MagnetState,
) -> Result<SequenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(seq as u64);
    let (lo, hi) = cfg.target_range;
    let targets: Vec<f64> = (0..cfg.seq_length).map(|_| rng.gen_range(lo..=hi)).collect();
    let plant = Arc::new(planner_model.perturbed(cfg.mismatch_sigma, &mut rng)?);
    let smst = run_method(Method::Smst, &targets, initial, &plant, calibration, cfg)?;
    let emst = run_method(Method::Emst, &targets, initial, &plant, calibration, cfg)?;
    Ok(SequenceReport { seq, targets, smst, emst })
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn summarize(runs: &[&MethodRun]) -> MethodSummary {
    let (rmse_t, rmse_std_t) = mean_std(runs.iter().map(|r| r.rmse_t));
    let (_, e_tune_std_j) = mean_std(runs.iter().map(|r| r.mean_e_tune_j));
    let all = || runs.iter().flat_map(|r| r.steps.iter());
    let count = all().count();
    let mean_of = |pred: &dyn Fn(&StepRecord) -> bool| {
        let (s, n) = all().filter(|s| pred(s)).fold((0.0, 0usize), |(s, n), r| (s + r.energy_j, n + 1));
        (if n > 0 { s / n as f64 } else { 0.0 }, n)
    };
    let (mean_e_up_j, up_steps) = mean_of(&|s| s.up);
    let (mean_e_down_j, down_steps) = mean_of(&|s| !s.up);
    MethodSummary {
        rmse_t,
        rmse_std_t,
        mean_e_tune_j: all().map(|s| s.energy_j).sum::<f64>() / count as f64,
        e_tune_std_j,
        mean_e_up_j,
        mean_e_down_j,
        up_steps,
        down_steps,
    }
}

/// Runs the comparison with the planner model built from `cfg.model`.
pub fn run_comparison(cfg: &BenchConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    run_comparison_with_model(cfg, Arc::new(cfg.planner_model()?))
}

/// Runs the comparison with an explicit planner model, which must be a
/// table model so that it can be perturbed into plants.
pub fn run_comparison_with_model(cfg: &BenchConfig, planner_model: Arc<HysteresisModel>) -> Result<ComparisonReport> {
    cfg.validate()?;
    let calibration = Arc::new(smst_calibrate(&planner_model, cfg.smst_samples)?);
    let initial = MagnetState::demagnetized(planner_model.clone())?;
    let mut sequences = (0..cfg.n_sequences)
        .into_par_iter()
        .map(|seq| run_sequence(seq, cfg, &planner_model, &calibration, &initial))
        .collect::<Result<Vec<_>>>()?;
    sequences.sort_by_key(|s| s.seq);
    let smst: Vec<&MethodRun> = sequences.iter().map(|s| &s.smst).collect();
    let emst: Vec<&MethodRun> = sequences.iter().map(|s| &s.emst).collect();
    let methods = MethodTable { smst: summarize(&smst), emst: summarize(&emst) };
    let fallbacks = emst.iter().flat_map(|r| r.steps.iter()).filter(|s| s.fell_back).count();
    Ok(ComparisonReport {
        format_version: REPORT_FORMAT_VERSION,
        provenance: None,
        config_echo: cfg.clone(),
        fallback_policy: Fallback::Smst,
        methods,
        sequences,
        fallbacks,
    })
}

/// Bisects `mismatch_sigma` in `[lo, hi]` until the SMST RMSE of `cfg`
/// matches `target_rmse` within `tol` T. Returns the sigma and its RMSE.
pub fn calibrate_mismatch(cfg: &BenchConfig, target_rmse: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)> {
    let planner_model = Arc::new(cfg.planner_model()?);
    let rmse_at = |sigma: f64| -> Result<f64> {
        let c = BenchConfig { mismatch_sigma: sigma, ..cfg.clone() };
        Ok(run_comparison_with_model(&c, planner_model.clone())?.methods.smst.rmse_t)
    };
    let (f_lo, f_hi) = (rmse_at(lo)?, rmse_at(hi)?);
    if !(f_lo <= target_rmse && target_rmse <= f_hi) {
        return Err(Error::Calibration(format!(
            "SMST RMSE spans [{f_lo}, {f_hi}] T over sigma in [{lo}, {hi}], target {target_rmse} T not bracketed"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = rmse_at(mid)?;
        if (f - target_rmse).abs() <= tol {
            return Ok((mid, f));
        }
        if f < target_rmse {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration("mismatch calibration did not converge".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// Renders a report. The table mirrors the usual two-method layout with
/// RMSE and E_tune rows; csv and json carry every step.
pub fn emit_report(report: &ComparisonReport, format: ReportFormat) -> Result<String> {
    if report.sequences.is_empty() || report.sequences.iter().any(|s| s.smst.steps.is_empty() || s.emst.steps.is_empty()) {
        return Err(Error::Report("report has no per-sequence detail".into()));
    }
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Report(e.to_string())),
        ReportFormat::Csv => {
            let mut out = String::new();
            writeln!(out, "{DETAIL_CSV_HEADER}").unwrap();
            for seq in &report.sequences {
                for (name, run) in [("smst", &seq.smst), ("emst", &seq.emst)] {
                    for s in &run.steps {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            seq.seq, s.step, name, s.target_t, s.achieved_t, s.error_t, s.energy_j
                        )
                        .unwrap();
                    }
                }
            }
            Ok(out)
        }
        ReportFormat::Table => {
            let (s, e) = (&report.methods.smst, &report.methods.emst);
            let cell = |m: f64, sd: f64, scale: f64, unit: &str| format!("{:.2} {unit} ± {:.2} {unit}", m * scale, sd * scale);
            let rows = [
                ("RMSE", cell(s.rmse_t, s.rmse_std_t, 1e3, "mT"), cell(e.rmse_t, e.rmse_std_t, 1e3, "mT")),
                ("E_tune", cell(s.mean_e_tune_j, s.e_tune_std_j, 1.0, "J"), cell(e.mean_e_tune_j, e.e_tune_std_j, 1.0, "J")),
            ];
            let mut out = String::new();
            writeln!(out, "{:<8} | {:<22} | {:<22}", "", "SMST", "EMST").unwrap();
            writeln!(out, "{:-<8}-+-{:-<22}-+-{:-<22}", "", "", "").unwrap();
            for (name, a, b) in rows {
                writeln!(out, "{name:<8} | {a:<22} | {b:<22}").unwrap();
            }
            Ok(out)
        }
    }
}
