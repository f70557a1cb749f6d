//! Coil current pulses and their resistive heat.
//!
//! Every nonzero setpoint of a plan is one current pulse: a symmetric
//! triangle from zero to the peak and back at a fixed field slew rate, with
//! an optional dwell at the peak. Only `i²R` loss counts; inductive energy
//! goes back to the supply.

use serde::{Deserialize, Serialize};

use crate::tuning::TuningPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilParams {
    pub n_turns: f64,
    /// Ω
    pub resistance: f64,
    /// Magnetic path length through the magnet, m.
    pub l_m: f64,
}

impl Default for CoilParams {
    fn default() -> Self {
        Self { n_turns: 500.0, resistance: 2.0, l_m: 10e-3 }
    }
}

impl CoilParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_turns", self.n_turns), ("resistance", self.resistance), ("l_m", self.l_m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("coil {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseWaveform {
    #[serde(default)]
    pub shape: PulseShape,
    /// Field slew rate, (A/m)/s.
    pub slew: f64,
    /// Dwell at the peak, s.
    pub hold: f64,
}

impl Default for PulseWaveform {
    fn default() -> Self {
        Self { shape: PulseShape::Triangular, slew: 5e6, hold: 0.0 }
    }
}

impl PulseWaveform {
    pub fn validate(&self) -> Result<()> {
        if !(self.slew.is_finite() && self.slew > 0.0) {
            return Err(Error::Config(format!("slew must be > 0, got {}", self.slew)));
        }
        if !(self.hold.is_finite() && self.hold >= 0.0) {
            return Err(Error::Config(format!("hold must be >= 0, got {}", self.hold)));
        }
        Ok(())
    }

    /// Ramp-up plus ramp-down plus dwell for a pulse to `h_peak`.
    pub fn duration(&self, h_peak: f64) -> f64 {
        if h_peak == 0.0 {
            return 0.0;
        }
        2.0 * h_peak.abs() / self.slew + self.hold
    }
}

/// Coil current producing field `h` in the magnet: `i = h l_m / N`.
pub fn current_for_field(h: f64, coil: &CoilParams) -> f64 {
    h * coil.l_m / coil.n_turns
}

/// Heat of one pulse: `R i_peak² (T_ramp / 3 + hold)`, where `T_ramp` is the
/// combined rise and fall time.
pub fn pulse_energy(h_peak: f64, wf: &PulseWaveform, coil: &CoilParams) -> f64 {
    if h_peak == 0.0 {
        return 0.0;
    }
    let i_peak = current_for_field(h_peak, coil);
    let ramp = 2.0 * h_peak.abs() / wf.slew;
    coil.resistance * i_peak * i_peak * (ramp / 3.0 + wf.hold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub h_peak: f64,
    pub duration_s: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub pulses: Vec<Pulse>,
    pub total_j: f64,
}

/// One pulse per nonzero setpoint; the pulses return through zero field.
pub fn plan_energy(plan: &TuningPlan, wf: &PulseWaveform, coil: &CoilParams) -> EnergyReport {
    let pulses: Vec<Pulse> = plan
        .setpoints
        .iter()
        .filter(|&&h| h != 0.0)
        .map(|&h| Pulse { h_peak: h, duration_s: wf.duration(h), energy_j: pulse_energy(h, wf, coil) })
        .collect();
    let total_j = pulses.iter().map(|p| p.energy_j).sum();
    EnergyReport { pulses, total_j }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hysteresis::{MemoryStack, Polarity};
    use crate::tuning::Method;

    fn plan(setpoints: Vec<f64>) -> TuningPlan {
        TuningPlan {
            method: Method::Smst,
            target: 0.0,
            setpoints,
            predicted_remanence: 0.0,
            predicted_history: MemoryStack::saturated(Polarity::Positive),
        }
    }

    // ∫ R i(t)² dt by the trapezoidal rule on the piecewise-linear profile.
    fn quadrature(h_peak: f64, wf: &PulseWaveform, coil: &CoilParams, steps: usize) -> f64 {
        let i_peak = current_for_field(h_peak, coil).abs();
        let rise = h_peak.abs() / wf.slew;
        let total = 2.0 * rise + wf.hold;
        let current = |t: f64| {
            if t < rise {
                i_peak * t / rise
            } else if t < rise + wf.hold {
                i_peak
            } else {
                i_peak * (total - t) / rise
            }
        };
        let dt = total / steps as f64;
        let mut acc = 0.0;
        for k in 0..steps {
            let (a, b) = (current(k as f64 * dt), current((k + 1) as f64 * dt));
            acc += 0.5 * dt * (a * a + b * b);
        }
        coil.resistance * acc
    }

    #[test]
    fn current_from_field() {
        let coil = CoilParams::default();
        assert_eq!(current_for_field(0.0, &coil), 0.0);
        assert!((current_for_field(500e3, &coil) - 10.0).abs() < 1e-12);
        let double = CoilParams { n_turns: 1000.0, ..coil };
        assert!((current_for_field(500e3, &double) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_scaling_without_hold() {
        let (wf, coil) = (PulseWaveform::default(), CoilParams::default());
        assert_eq!(pulse_energy(0.0, &wf, &coil), 0.0);
        let e1 = pulse_energy(1.3e5, &wf, &coil);
        let e2 = pulse_energy(2.0 * 1.3e5, &wf, &coil);
        assert!((e2 / e1 - 8.0).abs() < 1e-12);
        assert_eq!(pulse_energy(-1.3e5, &wf, &coil), e1);
    }

    #[test]
    fn matches_quadrature() {
        let coil = CoilParams { n_turns: 320.0, resistance: 1.7, l_m: 0.013 };
        for (h, wf) in [
            (4.2e5, PulseWaveform::default()),
            (-2.5e5, PulseWaveform { slew: 3e6, hold: 0.02, ..Default::default() }),
        ] {
            let exact = pulse_energy(h, &wf, &coil);
            let q = quadrature(h, &wf, &coil, 1_000_000);
            assert!(((q - exact) / exact).abs() < 1e-9, "{q} vs {exact}");
        }
    }

    #[test]
    fn plan_energy_sums_nonzero_pulses() {
        let (wf, coil) = (PulseWaveform::default(), CoilParams::default());
        assert_eq!(plan_energy(&plan(vec![0.0]), &wf, &coil).total_j, 0.0);
        let r = plan_energy(&plan(vec![5e5, -1e5, 0.0]), &wf, &coil);
        assert_eq!(r.pulses.len(), 2);
        assert_eq!(r.total_j, r.pulses[0].energy_j + r.pulses[1].energy_j);
        let smaller = plan_energy(&plan(vec![5e5, 0.0]), &wf, &coil);
        assert!(r.total_j >= smaller.total_j);
    }
}
