//! Envelope magnetization-state tuning.
//!
//! With the field history fixed, the remanence left by the excursion
//! `h_now -> h_cp -> 0` is nondecreasing in `h_cp`. The corner point is found
//! by bisection on that map (it is only piecewise smooth: every wiped
//! extremum leaves a kink), followed by a few false-position steps.

use super::{predicted_plan, Branch, CornerPoint, Method, TuningPlan, TuningTarget, CP_LIMIT_FRACTION};
use crate::hysteresis::{HysteresisModel, MagnetState, MemoryStack, Polarity};
use crate::{Error, Result};

const BISECTION_WIDTH: f64 = 1e-3;
const SECANT_STEPS: usize = 5;
const MAX_ITERATIONS: usize = 200;

/// Solves for the corner point that leaves remanence `target` within `tol_b`.
pub fn solve_corner_point(
    target: TuningTarget,
    stack: &MemoryStack,
    h_now: f64,
    model: &HysteresisModel,
    tol_b: f64,
) -> Result<CornerPoint> {
    if !(tol_b > 0.0) {
        return Err(Error::Invalid(format!("tol_b must be positive, got {tol_b}")));
    }
    stack.validate(model.h_sat())?;
    let b = target.value();
    let hs = model.h_sat();
    let limit = CP_LIMIT_FRACTION * hs;
    let start = model.path(stack, h_now);
    let residual = |c: f64| model.excursion_remanence(&start, c) - b;

    let branch_of = |c: f64| {
        let mut p = start.clone();
        p.advance(c);
        let s = p.stack();
        match (s.is_empty(), s.polarity()) {
            (true, Polarity::Positive) => Branch::DescendingMajor,
            (true, Polarity::Negative) => Branch::AscendingMajor,
            _ => Branch::MinorReversal,
        }
    };
    let done = |c: f64| Ok(CornerPoint { h_cp: c, branch: branch_of(c) });

    let f0 = residual(0.0);
    if f0.abs() <= tol_b {
        return done(0.0);
    }
    let (f_neg, f_pos) = (residual(-limit), residual(limit));
    if f_neg > tol_b || f_pos < -tol_b {
        return Err(Error::Unreachable { target: b, lo: f_neg + b, hi: f_pos + b });
    }
    let (mut lo, mut hi, mut f_lo, mut f_hi) =
        if f0 < 0.0 { (0.0, limit, f0, f_pos) } else { (-limit, 0.0, f_neg, f0) };
    if f_lo.abs() <= tol_b {
        return done(lo);
    }
    if f_hi.abs() <= tol_b {
        return done(hi);
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::Solver(format!("bracket [{lo}, {hi}] A/m does not enclose the target")));
    }

    let mut iterations = 0;
    let update = |c: f64, lo: &mut f64, hi: &mut f64, f_lo: &mut f64, f_hi: &mut f64| -> Option<f64> {
        let f = residual(c);
        if f.abs() <= tol_b {
            return Some(c);
        }
        if f < 0.0 {
            *lo = c;
            *f_lo = f;
        } else {
            *hi = c;
            *f_hi = f;
        }
        None
    };

    while hi - lo > BISECTION_WIDTH * hs && iterations < MAX_ITERATIONS {
        iterations += 1;
        if let Some(c) = update(0.5 * (lo + hi), &mut lo, &mut hi, &mut f_lo, &mut f_hi) {
            return done(c);
        }
    }
    for _ in 0..SECANT_STEPS {
        iterations += 1;
        let c = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        if !(c > lo && c < hi) {
            break;
        }
        if let Some(c) = update(c, &mut lo, &mut hi, &mut f_lo, &mut f_hi) {
            return done(c);
        }
    }
    while iterations < MAX_ITERATIONS && hi - lo > 1e-12 * hs {
        iterations += 1;
        if let Some(c) = update(0.5 * (lo + hi), &mut lo, &mut hi, &mut f_lo, &mut f_hi) {
            return done(c);
        }
    }
    Err(Error::Solver(format!(
        "no convergence to {tol_b} T after {iterations} iterations; bracket [{lo}, {hi}] A/m"
    )))
}

/// Plans an EMST step `[h_cp, 0]` from the planner's predicted `state`.
pub fn emst_plan(target: TuningTarget, state: &MagnetState, tol_b: f64) -> Result<TuningPlan> {
    let model = state.model();
    let cp = solve_corner_point(target, state.stack(), state.h_now(), model, tol_b)?;
    let setpoints = if cp.h_cp == 0.0 { vec![0.0] } else { vec![cp.h_cp, 0.0] };
    let plan = predicted_plan(Method::Emst, target.value(), setpoints, state)?;
    plan.validate(model.h_sat())?;
    Ok(plan)
}
