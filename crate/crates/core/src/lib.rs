//! Simulation and planning toolkit for tunable-magnet actuators.
//!
//! The crate is organised around the life of one soft permanent magnet:
//!
//! * [`hysteresis`] models the B(H) behaviour of the magnet with a scalar
//!   Preisach model (return-point memory and wiping out), either from an
//!   analytic Preisach density or from an Everett table identified from
//!   first-order reversal curves.
//! * [`tuning`] plans field pulses that move the magnet to a new remanent
//!   magnetization state, either via saturation (SMST) or along minor-loop
//!   reversal curves without saturation (EMST).
//! * [`energy`] converts plans into coil current pulses and resistive heat.
//! * [`actuator`] turns remanence and mover position into flux and force for
//!   the C-shaped TMA and the bias-linearised hybrid HTMA.
//! * [`bench`] runs randomized target sequences through both tuning methods
//!   against a mismatched plant and reports accuracy and energy.
//! * [`config`] holds the run configuration shared by the command-line tool.

pub mod actuator;
pub mod bench;
pub mod config;
pub mod energy;
mod error;
pub mod hysteresis;
pub mod tuning;

pub use error::{Error, Result};

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Tool name and version stamped into every emitted document.
pub fn generator() -> String {
    format!("tunemag {}", env!("CARGO_PKG_VERSION"))
}
