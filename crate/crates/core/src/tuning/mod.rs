//! Magnetization-state tuning: planning field pulses that leave the magnet
//! at a requested remanence, and executing them on a plant.
//!
//! Two planners exist. [`smst_plan`] follows the descending major branch,
//! saturating first whenever the magnetization must rise. [`emst_plan`]
//! tracks the field history and solves for a corner point on a minor-loop
//! reversal curve, so it never saturates.

mod emst;
mod smst;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use emst::{emst_plan, solve_corner_point};
pub use smst::{smst_calibrate, smst_plan, SmstCalibration};

use crate::hysteresis::{HysteresisModel, MagnetState, MemoryStack};
use crate::{Error, Result};

/// Default flux tolerance of the corner-point solver, T.
pub const DEFAULT_TOL_B: f64 = 1e-4;

/// Largest corner-point magnitude either planner uses, as a fraction of
/// `h_sat`. Keeps EMST pulses strictly below saturation.
pub const CP_LIMIT_FRACTION: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Smst,
    Emst,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Smst => "smst",
            Method::Emst => "emst",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smst" => Ok(Method::Smst),
            "emst" => Ok(Method::Emst),
            other => Err(Error::Invalid(format!("unknown tuning method `{other}`"))),
        }
    }
}

/// Desired remanent flux density, checked against the planner's model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningTarget(f64);

impl TuningTarget {
    pub fn new(b_target: f64, model: &HysteresisModel) -> Result<Self> {
        let lim = model.b_r_max();
        if !b_target.is_finite() || b_target.abs() > lim * (1.0 + 1e-12) {
            return Err(Error::Range { target: b_target, lo: -lim, hi: lim });
        }
        Ok(Self(b_target))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    DescendingMajor,
    AscendingMajor,
    MinorReversal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerPoint {
    pub h_cp: f64,
    pub branch: Branch,
}

/// Ordered field setpoints realising one magnetization change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPlan {
    pub method: Method,
    pub target: f64,
    pub setpoints: Vec<f64>,
    pub predicted_remanence: f64,
    pub predicted_history: MemoryStack,
}

impl TuningPlan {
    /// True for the identity plan `[0]`.
    pub fn is_trivial(&self) -> bool {
        self.setpoints.iter().all(|&h| h == 0.0)
    }

    pub fn max_field(&self) -> f64 {
        self.setpoints.iter().fold(0.0, |m, h| m.max(h.abs()))
    }

    /// Structural checks: ends at zero field; EMST stays below `h_sat`.
    pub fn validate(&self, h_sat: f64) -> Result<()> {
        if self.setpoints.last() != Some(&0.0) {
            return Err(Error::Invalid("plan must end with a zero setpoint".into()));
        }
        if self.setpoints.iter().any(|h| !h.is_finite()) {
            return Err(Error::Invalid("plan has a non-finite setpoint".into()));
        }
        if self.method == Method::Emst && self.max_field() >= h_sat {
            return Err(Error::Invalid(format!(
                "EMST plan reaches {} A/m, at or above h_sat = {h_sat} A/m",
                self.max_field()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line() as u64, msg: e.to_string() })
    }
}

/// Plan built by simulating `setpoints` from `state` on the state's model.
pub(crate) fn predicted_plan(
    method: Method,
    target: f64,
    setpoints: Vec<f64>,
    state: &MagnetState,
) -> Result<TuningPlan> {
    let mut s = state.clone();
    for &h in &setpoints {
        s.apply_field(h)?;
    }
    Ok(TuningPlan {
        method,
        target,
        setpoints,
        predicted_remanence: s.b_now(),
        predicted_history: s.stack().clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Execution {
    pub achieved: f64,
    /// `achieved - target`, T.
    pub error: f64,
}

/// Applies the plan's setpoints to `plant` in order.
pub fn execute_plan(plan: &TuningPlan, plant: &mut MagnetState) -> Result<Execution> {
    for &h in &plan.setpoints {
        plant.apply_field(h)?;
    }
    let achieved = plant.b_now();
    Ok(Execution { achieved, error: achieved - plan.target })
}

/// What EMST does with a target it cannot reach without saturating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    #[default]
    Error,
    Smst,
}

/// Sensorless planner that keeps its own predicted magnet state.
#[derive(Debug, Clone)]
pub struct Planner {
    method: Method,
    predicted: MagnetState,
    calibration: Arc<SmstCalibration>,
    tol_b: f64,
    fallback: Fallback,
}

/// A plan plus whether it came from the SMST fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedStep {
    pub plan: TuningPlan,
    pub fell_back: bool,
}

impl Planner {
    pub fn new(
        method: Method,
        initial: MagnetState,
        calibration: Arc<SmstCalibration>,
        tol_b: f64,
        fallback: Fallback,
    ) -> Self {
        Self { method, predicted: initial, calibration, tol_b, fallback }
    }

    pub fn predicted(&self) -> &MagnetState {
        &self.predicted
    }

    pub fn model(&self) -> &Arc<HysteresisModel> {
        self.predicted.model()
    }

    /// Plans the next step and advances the predicted state along it.
    pub fn plan(&mut self, b_target: f64) -> Result<PlannedStep> {
        let target = TuningTarget::new(b_target, self.predicted.model())?;
        let step = match self.method {
            Method::Smst => PlannedStep {
                plan: smst_plan(target, &self.predicted, &self.calibration, self.tol_b)?,
                fell_back: false,
            },
            Method::Emst => match emst_plan(target, &self.predicted, self.tol_b) {
                Ok(plan) => PlannedStep { plan, fell_back: false },
                Err(Error::Unreachable { .. }) if self.fallback == Fallback::Smst => PlannedStep {
                    plan: smst_plan(target, &self.predicted, &self.calibration, self.tol_b)?,
                    fell_back: true,
                },
                Err(e) => return Err(e),
            },
        };
        for &h in &step.plan.setpoints {
            self.predicted.apply_field(h)?;
        }
        Ok(step)
    }
}
