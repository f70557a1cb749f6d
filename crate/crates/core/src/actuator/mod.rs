//! Lumped magnetic-circuit models of the C-shaped tunable magnet actuator
//! (TMA) and the hybrid tunable magnet actuator (HTMA).
//!
//! Sign conventions, fixed here for the whole module:
//!
//! * `x` is the mover position. Gap 1 has length `g0 - x`, gap 2 (HTMA only)
//!   `g0 + x`, so positive `x` closes gap 1.
//! * Force is positive in `+x`, i.e. toward gap 1. For the TMA this is the
//!   attractive, gap-closing direction.
//! * Positive remanence `b_r` of the tunable magnet drives flux through gap
//!   1 from pole to mover. In the HTMA both bias magnets drive flux from
//!   pole to mover, so control flux aids the bias in gap 1 and opposes it in
//!   gap 2.
//!
//! All magnets sit on linear recoil lines `b = b_r + μ0 μ_rec h`. Tuning and
//! force production are decoupled: the circuit consumes a remanence and does
//! not write back into the hysteresis state.

mod fit;
mod htma;
mod tma;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use fit::{fit_piecewise_linear, line_fit, quadratic_fit_residual, ForceFit, ForceSample, LineFit, Segment};
pub use htma::{coenergy_htma, force_htma, solve_circuit_htma};
pub use tma::{coenergy_tma, force_tma, solve_circuit_tma};

use crate::{Error, Result};

/// Geometry and magnet data of the C-shaped TMA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmaGeometry {
    /// Pole-face area, m².
    pub a_gap: f64,
    /// Nominal air-gap length, m.
    pub g0: f64,
    /// Soft-magnet length along its magnetization, m.
    pub l_m: f64,
    /// Soft-magnet cross-section, m².
    pub a_m: f64,
    pub mu_rec: f64,
    pub n_gaps: u32,
    /// Effective-area multiplier for fringing, 1.0 = none.
    #[serde(default = "one")]
    pub fringing: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TmaGeometry {
    fn default() -> Self {
        Self { a_gap: 1e-4, g0: 0.5e-3, l_m: 10e-3, a_m: 1e-4, mu_rec: 1.05, n_gaps: 2, fringing: 1.0 }
    }
}

impl TmaGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a_gap", self.a_gap), ("g0", self.g0), ("l_m", self.l_m), ("a_m", self.a_m), ("fringing", self.fringing)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(1.0..=20.0).contains(&self.mu_rec) {
            return Err(Error::Geometry(format!("mu_rec must lie in [1, 20], got {}", self.mu_rec)));
        }
        if self.n_gaps == 0 {
            return Err(Error::Geometry("n_gaps must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn effective_area(&self) -> f64 {
        self.a_gap * self.fringing
    }

    pub(crate) fn check_position(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x.abs() >= self.g0 {
            return Err(Error::Geometry(format!("position {x} m closes a gap (g0 = {} m)", self.g0)));
        }
        Ok(())
    }
}

/// HTMA: the TMA core plus two hard bias magnets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtmaGeometry {
    pub core: TmaGeometry,
    /// Bias magnet remanence, T.
    pub b_r_bias: f64,
    /// Bias magnet length, m.
    pub l_bias: f64,
    /// Bias magnet cross-section, m².
    pub a_bias: f64,
    /// Half travel: admissible positions are `|x| <= x_range`, m.
    pub x_range: f64,
}

impl Default for HtmaGeometry {
    fn default() -> Self {
        Self { core: TmaGeometry::default(), b_r_bias: 1.2, l_bias: 120e-3, a_bias: 0.2e-4, x_range: 250e-6 }
    }
}

impl HtmaGeometry {
    pub fn validate(&self) -> Result<()> {
        self.core.validate()?;
        for (name, v) in [("l_bias", self.l_bias), ("a_bias", self.a_bias), ("x_range", self.x_range)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.b_r_bias.is_finite() {
            return Err(Error::Geometry("b_r_bias must be finite".into()));
        }
        if self.x_range >= self.core.g0 {
            return Err(Error::Geometry(format!(
                "travel ±{} m would close a gap of {} m",
                self.x_range, self.core.g0
            )));
        }
        Ok(())
    }
}

/// Fluxes of a solved circuit, Wb, and the soft magnet's operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSolution {
    /// Flux through the tunable magnet.
    pub phi_tm: f64,
    /// Gap 1, pole to mover.
    pub phi_g1: f64,
    /// Gap 2, pole to mover (TMA: equal to `phi_g1`, faces in series).
    pub phi_g2: f64,
    /// Bias magnet fluxes, back iron to pole (zero for the TMA).
    pub phi_bias1: f64,
    pub phi_bias2: f64,
    /// Soft-magnet field, A/m, and flux density, T.
    pub h_m: f64,
    pub b_m: f64,
}

impl FluxSolution {
    /// Largest flux imbalance over the circuit nodes relative to the largest
    /// branch flux.
    pub fn conservation_residual(&self, tma: bool) -> f64 {
        let scale = [self.phi_tm, self.phi_g1, self.phi_g2, self.phi_bias1, self.phi_bias2]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let worst = if tma {
            (self.phi_tm - self.phi_g1).abs().max((self.phi_g1 - self.phi_g2).abs())
        } else {
            let pole1 = self.phi_bias1 + self.phi_tm - self.phi_g1;
            let pole2 = self.phi_bias2 - self.phi_tm - self.phi_g2;
            let mover = self.phi_g1 + self.phi_g2 - self.phi_bias1 - self.phi_bias2;
            pole1.abs().max(pole2.abs()).max(mover.abs())
        };
        worst / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuatorKind {
    Tma,
    Htma,
}

impl std::str::FromStr for ActuatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tma" => Ok(ActuatorKind::Tma),
            "htma" => Ok(ActuatorKind::Htma),
            other => Err(Error::Invalid(format!("unknown actuator mode `{other}`"))),
        }
    }
}

/// Force and flux at one `(x, b_r)` operating point.
pub fn operating_point(kind: ActuatorKind, geom: &HtmaGeometry, b_r: f64, x: f64) -> Result<ForceSample> {
    let (sol, force) = match kind {
        ActuatorKind::Tma => {
            let s = solve_circuit_tma(&geom.core, b_r, x)?;
            (s, force_tma(&s, &geom.core))
        }
        ActuatorKind::Htma => {
            let s = solve_circuit_htma(geom, b_r, x)?;
            (s, force_htma(&s, geom))
        }
    };
    Ok(ForceSample { x, phi_tm: sol.phi_tm, force })
}

/// Sweeps remanence over `b_r_values` at each position. Positions must lie
/// within `±x_range`.
pub fn force_map(kind: ActuatorKind, geom: &HtmaGeometry, positions: &[f64], b_r_values: &[f64]) -> Result<Vec<ForceSample>> {
    geom.validate()?;
    let mut out = Vec::with_capacity(positions.len() * b_r_values.len());
    for &x in positions {
        if !x.is_finite() || x.abs() > geom.x_range * (1.0 + 1e-9) {
            return Err(Error::Invalid(format!("position {x} m outside travel ±{} m", geom.x_range)));
        }
        for &b in b_r_values {
            out.push(operating_point(kind, geom, b, x)?);
        }
    }
    Ok(out)
}

pub const FORCE_MAP_HEADER: &str = "x_m,phi_tm_Wb,force_N";

pub fn write_force_map_csv<W: Write>(mut w: W, samples: &[ForceSample]) -> Result<()> {
    writeln!(w, "{FORCE_MAP_HEADER}")?;
    for s in samples {
        writeln!(w, "{},{},{}", s.x, s.phi_tm, s.force)?;
    }
    Ok(())
}
