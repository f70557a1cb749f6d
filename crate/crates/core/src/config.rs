//! Run configuration shared by the command-line tool.
//!
//! A TOML document with a required `format_version` and five optional
//! sections. Unknown keys are rejected; missing keys take the defaults
//! below.
//!
//! ```toml
//! format_version = 1
//!
//! [magnet]
//! h_c = 120000.0
//!
//! [bench]
//! n_sequences = 20
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuator::{HtmaGeometry, TmaGeometry};
use crate::bench::{BenchConfig, DEFAULT_MISMATCH_SIGMA};
use crate::energy::{CoilParams, PulseShape, PulseWaveform};
use crate::error::toml_error;
use crate::hysteresis::{HysteresisModel, MagnetState, Polarity, PreisachParams};
use crate::tuning::{Fallback, DEFAULT_TOL_B};
use crate::{Error, Result};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Demagnetized,
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetSection {
    pub b_r_max: f64,
    pub b_sat: f64,
    pub h_sat: f64,
    pub h_c: f64,
    pub sigma_c: f64,
    pub sigma_u: f64,
    /// Hard field limit, A/m. Defaults to ten times `h_sat`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_clip: Option<f64>,
    /// Model file from `identify`; replaces the analytic parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    /// Field spacing of intermediate trace samples, A/m.
    pub trace_step: f64,
    pub initial: InitialState,
}

impl Default for MagnetSection {
    fn default() -> Self {
        let p = PreisachParams::default();
        Self {
            b_r_max: p.b_r_max,
            b_sat: p.b_sat,
            h_sat: p.h_sat,
            h_c: p.h_c,
            sigma_c: p.sigma_c,
            sigma_u: p.sigma_u,
            h_clip: None,
            model_file: None,
            trace_step: 10e3,
            initial: InitialState::Demagnetized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoilSection {
    pub n_turns: f64,
    pub resistance: f64,
    /// Defaults to the geometry's `l_m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_m: Option<f64>,
    pub slew: f64,
    pub hold: f64,
}

impl Default for CoilSection {
    fn default() -> Self {
        let c = CoilParams::default();
        let w = PulseWaveform::default();
        Self { n_turns: c.n_turns, resistance: c.resistance, l_m: None, slew: w.slew, hold: w.hold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub a_gap: f64,
    pub g0: f64,
    pub l_m: f64,
    pub a_m: f64,
    pub mu_rec: f64,
    pub n_gaps: u32,
    pub fringing: f64,
    pub b_r_bias: f64,
    pub l_bias: f64,
    pub a_bias: f64,
    pub x_range: f64,
    /// Remanence grid of the force map, swept over ±b_r_max.
    pub br_points: usize,
    pub fit_segments: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let h = HtmaGeometry::default();
        let c = h.core;
        Self {
            a_gap: c.a_gap,
            g0: c.g0,
            l_m: c.l_m,
            a_m: c.a_m,
            mu_rec: c.mu_rec,
            n_gaps: c.n_gaps,
            fringing: c.fringing,
            b_r_bias: h.b_r_bias,
            l_bias: h.l_bias,
            a_bias: h.a_bias,
            x_range: h.x_range,
            br_points: 21,
            fit_segments: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub tol_b: f64,
    pub smst_samples: usize,
    pub fallback: Fallback,
    /// Relative Everett perturbation of the plant `tune` executes against.
    pub plant_sigma: f64,
    pub plant_seed: u64,
    /// Grid used to tabulate an analytic model before perturbing it.
    pub plant_grid: usize,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self { tol_b: DEFAULT_TOL_B, smst_samples: 1001, fallback: Fallback::Error, plant_sigma: 0.0, plant_seed: 0, plant_grid: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub n_sequences: usize,
    pub seq_length: usize,
    pub target_range: (f64, f64),
    pub mismatch_sigma: f64,
    pub rng_seed: u64,
    pub planner_grid: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        let b = BenchConfig::default();
        Self {
            n_sequences: b.n_sequences,
            seq_length: b.seq_length,
            target_range: b.target_range,
            mismatch_sigma: DEFAULT_MISMATCH_SIGMA,
            rng_seed: b.rng_seed,
            planner_grid: b.planner_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    #[serde(default)]
    pub magnet: MagnetSection,
    #[serde(default)]
    pub coil: CoilSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub bench: BenchSection,
    /// Directory relative paths inside the document resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            magnet: MagnetSection::default(),
            coil: CoilSection::default(),
            geometry: GeometrySection::default(),
            tuning: TuningSection::default(),
            bench: BenchSection::default(),
            base_dir: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported config format_version {} (expected {CONFIG_FORMAT_VERSION})",
                cfg.format_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Canonical TOML rendering; the basis of the configuration hash.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.preisach().validate()?;
        if !(self.magnet.trace_step.is_finite() && self.magnet.trace_step > 0.0) {
            return Err(Error::Config("magnet.trace_step must be > 0".into()));
        }
        self.coil().validate()?;
        self.waveform().validate()?;
        self.htma().validate()?;
        if self.geometry.br_points < 2 || self.geometry.fit_segments == 0 {
            return Err(Error::Config("geometry.br_points must be >= 2 and fit_segments >= 1".into()));
        }
        let t = &self.tuning;
        if !(t.tol_b.is_finite() && t.tol_b > 0.0) || t.smst_samples < 2 {
            return Err(Error::Config("tuning.tol_b must be > 0 and smst_samples >= 2".into()));
        }
        if !(t.plant_sigma.is_finite() && t.plant_sigma >= 0.0) {
            return Err(Error::Config("tuning.plant_sigma must be >= 0".into()));
        }
        self.bench_config().validate()
    }

    pub fn preisach(&self) -> PreisachParams {
        let m = &self.magnet;
        PreisachParams { b_r_max: m.b_r_max, b_sat: m.b_sat, h_sat: m.h_sat, h_c: m.h_c, sigma_c: m.sigma_c, sigma_u: m.sigma_u }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Magnet model: the model file if one is named, else the analytic
    /// parameters.
    pub fn model(&self) -> Result<HysteresisModel> {
        let model = match &self.magnet.model_file {
            Some(p) => {
                let path = self.resolve(p);
                HysteresisModel::from_toml(&std::fs::read_to_string(&path).map_err(|e| Error::io_at(&path, e))?)?
            }
            None => HysteresisModel::analytic(self.preisach())?,
        };
        match self.magnet.h_clip {
            Some(c) => model.with_h_clip(c),
            None => Ok(model),
        }
    }

    /// Plant for `tune`: the model itself, or a perturbed table copy when
    /// `tuning.plant_sigma > 0`.
    pub fn plant_model(&self, model: &HysteresisModel) -> Result<HysteresisModel> {
        use rand::SeedableRng;
        if self.tuning.plant_sigma == 0.0 {
            return Ok(model.clone());
        }
        let table = match model.everett() {
            crate::hysteresis::Everett::Table(_) => model.clone(),
            crate::hysteresis::Everett::Analytic(_) => model.tabulated(self.tuning.plant_grid)?,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.tuning.plant_seed);
        table.perturbed(self.tuning.plant_sigma, &mut rng)
    }

    pub fn initial_state(&self, model: std::sync::Arc<HysteresisModel>) -> Result<MagnetState> {
        match self.magnet.initial {
            InitialState::Demagnetized => MagnetState::demagnetized(model),
            InitialState::Positive => Ok(MagnetState::saturated_remanent(model, Polarity::Positive)),
            InitialState::Negative => Ok(MagnetState::saturated_remanent(model, Polarity::Negative)),
        }
    }

    pub fn coil(&self) -> CoilParams {
        CoilParams {
            n_turns: self.coil.n_turns,
            resistance: self.coil.resistance,
            l_m: self.coil.l_m.unwrap_or(self.geometry.l_m),
        }
    }

    pub fn waveform(&self) -> PulseWaveform {
        PulseWaveform { shape: PulseShape::Triangular, slew: self.coil.slew, hold: self.coil.hold }
    }

    pub fn tma(&self) -> TmaGeometry {
        let g = &self.geometry;
        TmaGeometry { a_gap: g.a_gap, g0: g.g0, l_m: g.l_m, a_m: g.a_m, mu_rec: g.mu_rec, n_gaps: g.n_gaps, fringing: g.fringing }
    }

    pub fn htma(&self) -> HtmaGeometry {
        let g = &self.geometry;
        HtmaGeometry { core: self.tma(), b_r_bias: g.b_r_bias, l_bias: g.l_bias, a_bias: g.a_bias, x_range: g.x_range }
    }

    pub fn bench_config(&self) -> BenchConfig {
        let b = &self.bench;
        BenchConfig {
            n_sequences: b.n_sequences,
            seq_length: b.seq_length,
            target_range: b.target_range,
            mismatch_sigma: b.mismatch_sigma,
            rng_seed: b.rng_seed,
            planner_grid: b.planner_grid,
            smst_samples: self.tuning.smst_samples,
            tol_b: self.tuning.tol_b,
            model: self.preisach(),
            coil: self.coil(),
            waveform: self.waveform(),
        }
    }
}
