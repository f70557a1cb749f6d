//! Saturation magnetization-state tuning.
//!
//! The corner point is looked up on the descending major branch from a
//! calibration of corner point against remanence. Raising the
//! magnetization saturates first; lowering it relies on loop closure to
//! rejoin the major branch on the way down.

use serde::{Deserialize, Serialize};

use super::{predicted_plan, Method, TuningPlan, TuningTarget, CP_LIMIT_FRACTION};
use crate::hysteresis::{HysteresisModel, MagnetState, MemoryStack, Polarity};
use crate::{Error, Result};

/// Corner point versus remanence on the descending major branch.
///
/// `slope`/`intercept` are the least-squares line `h_cp = slope * b + intercept`
/// over all samples, with `fit_residual` its RMS residual in A/m. Planning
/// uses the line segments between neighbouring samples (`knots`); the worst
/// flux error of that interpolation, measured at segment midpoints, is
/// `flux_residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmstCalibration {
    pub slope: f64,
    pub intercept: f64,
    pub fit_residual: f64,
    pub valid_range: (f64, f64),
    pub flux_residual: f64,
    /// Two samples determine the line exactly; the residual carries no
    /// information.
    pub underdetermined: bool,
    pub h_sat: f64,
    /// `(remanence, h_cp)` pairs with strictly increasing remanence.
    pub knots: Vec<(f64, f64)>,
}

impl SmstCalibration {
    /// Corner point for `b_target`, clamped to the calibrated branch.
    pub fn corner_point(&self, b_target: f64) -> f64 {
        let k = &self.knots;
        if b_target <= k[0].0 {
            return k[0].1;
        }
        if b_target >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|p| p.0 <= b_target);
        let (b0, h0) = k[i - 1];
        let (b1, h1) = k[i];
        h0 + (b_target - b0) / (b1 - b0) * (h1 - h0)
    }

    /// Prediction of the global least-squares line.
    pub fn linear_corner_point(&self, b_target: f64) -> f64 {
        self.slope * b_target + self.intercept
    }
}

/// Samples `n_samples` corner points evenly from zero field down to the
/// corner-point limit near `-h_sat` and fits them against remanence.
pub fn smst_calibrate(model: &HysteresisModel, n_samples: usize) -> Result<SmstCalibration> {
    if n_samples < 2 {
        return Err(Error::Invalid(format!("SMST calibration needs at least 2 samples, got {n_samples}")));
    }
    let hs = model.h_sat();
    let limit = CP_LIMIT_FRACTION * hs;
    let top = model.path(&MemoryStack::saturated(Polarity::Positive), hs);
    let remanence_at = |c: f64| model.excursion_remanence(&top, c);
    let samples: Vec<(f64, f64)> = (0..n_samples)
        .map(|i| {
            let c = -limit * i as f64 / (n_samples - 1) as f64;
            (remanence_at(c), c)
        })
        .collect();

    let n = samples.len() as f64;
    let mean_b = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_h = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sbb: f64 = samples.iter().map(|s| (s.0 - mean_b).powi(2)).sum();
    let sbh: f64 = samples.iter().map(|s| (s.0 - mean_b) * (s.1 - mean_h)).sum();
    let spread = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max)
        - samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !(spread > 1e-12 * model.b_sat()) {
        return Err(Error::Calibration("remanence does not vary along the descending branch".into()));
    }
    let slope = sbh / sbb;
    let intercept = mean_h - slope * mean_b;
    let fit_residual =
        (samples.iter().map(|s| (s.1 - slope * s.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();

    // samples run from high to low remanence; keep strictly increasing knots,
    // preferring the smaller field where remanence is flat
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    for &(b, c) in samples.iter().rev() {
        match knots.last_mut() {
            Some(last) if b <= last.0 => {
                if b == last.0 {
                    last.1 = c;
                }
            }
            _ => knots.push((b, c)),
        }
    }
    if knots.len() < 2 {
        return Err(Error::Calibration("fewer than two distinct remanence samples".into()));
    }
    let flux_residual = knots
        .windows(2)
        .map(|w| {
            let mid_c = 0.5 * (w[0].1 + w[1].1);
            (remanence_at(mid_c) - 0.5 * (w[0].0 + w[1].0)).abs()
        })
        .fold(0.0, f64::max);
    let valid_range = (knots[0].0, knots[knots.len() - 1].0);
    Ok(SmstCalibration {
        slope,
        intercept,
        fit_residual,
        valid_range,
        flux_residual,
        underdetermined: n_samples == 2,
        h_sat: hs,
        knots,
    })
}

/// Plans an SMST step from the planner's predicted `state`.
///
/// Up-steps are `[+h_sat, h_cp, 0]`, down-steps `[h_cp, 0]`, and a target
/// within `tol_b` of the current remanence gives the identity plan `[0]`.
pub fn smst_plan(
    target: TuningTarget,
    state: &MagnetState,
    cal: &SmstCalibration,
    tol_b: f64,
) -> Result<TuningPlan> {
    let b = target.value();
    let (lo, hi) = cal.valid_range;
    let slack = 1e-9 * (hi - lo).abs().max(1e-12);
    if b < lo - slack || b > hi + slack {
        return Err(Error::Range { target: b, lo, hi });
    }
    let current = state.remanence();
    let setpoints = if (b - current).abs() <= tol_b {
        vec![0.0]
    } else {
        let h_cp = cal.corner_point(b).clamp(-CP_LIMIT_FRACTION * cal.h_sat, 0.0);
        let mut sp = Vec::with_capacity(3);
        if b > current {
            sp.push(cal.h_sat);
        }
        if h_cp != 0.0 {
            sp.push(h_cp);
        }
        sp.push(0.0);
        sp
    };
    predicted_plan(Method::Smst, b, setpoints, state)
}
