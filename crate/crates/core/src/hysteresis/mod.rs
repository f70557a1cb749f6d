//! Scalar rate-independent hysteresis with return-point memory.
//!
//! The magnet's memory is the alternating sequence of dominant past field
//! extrema since the last saturation ([`MemoryStack`]). A field excursion
//! that reaches past a stored extremum wipes it (and its partner) out; an
//! excursion that reaches `h_sat` wipes everything. Flux density follows from
//! the Everett surface by the telescoping sum over that sequence, plus a
//! linear reversible term `chi_rev * h`.

mod everett;
mod forc;
mod model_file;
mod quad;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use everett::{AnalyticEverett, Everett, EverettTable, PreisachParams};
pub use forc::{identify_from_forc, parse_field_list, ForcCurve, ForcRow, ForcTable, Identification};
pub use model_file::{ModelDocument, MODEL_FORMAT_VERSION};

use crate::{Error, Result};

/// Default hard field limit as a multiple of `h_sat`.
pub const DEFAULT_CLIP_FACTOR: f64 = 10.0;

/// Sign of the last saturation the magnet saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// Dominant field extrema since the last saturation, oldest first.
///
/// With positive polarity the first stored extremum is a minimum, then a
/// maximum, and so on; with negative polarity the first is a maximum. Each
/// entry lies strictly inside the interval spanned by its two predecessors
/// (the saturation field and its mirror image stand in for missing ones).
/// An empty stack means the state is on a major-loop branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStack {
    polarity: Polarity,
    extrema: Vec<f64>,
}

impl MemoryStack {
    pub fn saturated(polarity: Polarity) -> Self {
        Self { polarity, extrema: Vec::new() }
    }

    /// Builds a stack from raw parts, checking alternation and dominance.
    pub fn new(polarity: Polarity, extrema: Vec<f64>, h_sat: f64) -> Result<Self> {
        let s = Self { polarity, extrema };
        s.validate(h_sat)?;
        Ok(s)
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn extrema(&self) -> &[f64] {
        &self.extrema
    }

    pub fn is_empty(&self) -> bool {
        self.extrema.is_empty()
    }

    pub fn len(&self) -> usize {
        self.extrema.len()
    }

    /// Checks alternation and dominance against `h_sat`.
    pub fn validate(&self, h_sat: f64) -> Result<()> {
        let sat = match self.polarity {
            Polarity::Positive => h_sat,
            Polarity::Negative => -h_sat,
        };
        let (mut older, mut newer) = (-sat, sat);
        for (k, &e) in self.extrema.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::StateCorruption(format!("extremum {k} is not finite")));
            }
            let (lo, hi) = if older < newer { (older, newer) } else { (newer, older) };
            if !(e > lo && e < hi) {
                let what = if (newer > older) == (e > newer) { "alternation" } else { "dominance" };
                return Err(Error::StateCorruption(format!(
                    "{what} violated at extremum {k}: {e} not inside ({lo}, {hi})"
                )));
            }
            older = newer;
            newer = e;
        }
        Ok(())
    }
}

/// Reduced input history: `[-h_sat, (+h_sat), extrema..., current]`.
///
/// Index parity fixes the role of each point: even indices are minima, odd
/// indices maxima, counting from the leading negative saturation.
#[derive(Debug, Clone)]
pub(crate) struct Path {
    h_sat: f64,
    pts: Vec<f64>,
}

impl Path {
    fn prefix(polarity: Polarity, h_sat: f64) -> Vec<f64> {
        match polarity {
            Polarity::Positive => vec![-h_sat, h_sat],
            Polarity::Negative => vec![-h_sat],
        }
    }

    /// History made of the stack alone; its last point is the current one.
    pub(crate) fn from_stack(stack: &MemoryStack, h_sat: f64) -> Self {
        let mut pts = Self::prefix(stack.polarity, h_sat);
        pts.extend_from_slice(&stack.extrema);
        Self { h_sat, pts }
    }

    fn from_state(stack: &MemoryStack, h_now: f64, h_sat: f64) -> Self {
        let mut p = Self::from_stack(stack, h_sat);
        p.advance(h_now);
        p
    }

    fn is_max_slot(idx: usize) -> bool {
        idx % 2 == 1
    }

    pub(crate) fn current(&self) -> f64 {
        *self.pts.last().expect("path never empty")
    }

    /// Moves the input monotonically to `x`, applying wiping out.
    pub(crate) fn advance(&mut self, x: f64) {
        let hs = self.h_sat;
        if x >= hs {
            self.pts.clear();
            self.pts.extend_from_slice(&[-hs, hs]);
            return;
        }
        if x <= -hs {
            self.pts.clear();
            self.pts.push(-hs);
            return;
        }
        let last = self.pts.len() - 1;
        let cur = self.pts[last];
        if x == cur {
            return;
        }
        let rising_into_cur = Self::is_max_slot(last);
        if (x > cur) == rising_into_cur {
            self.pts[last] = x;
        } else {
            self.pts.push(x);
        }
        loop {
            let n = self.pts.len();
            if n < 3 {
                break;
            }
            let x = self.pts[n - 1];
            let reach = self.pts[n - 3];
            let wiped = if Self::is_max_slot(n - 1) { x >= reach } else { x <= reach };
            if !wiped {
                break;
            }
            self.pts.drain(n - 3..n - 1);
        }
    }

    /// Stack of stored extrema (excluding the current point).
    pub(crate) fn stack(&self) -> MemoryStack {
        let positive = self.pts.len() >= 2 && self.pts[1] == self.h_sat;
        let (polarity, start) = if positive {
            (Polarity::Positive, 2)
        } else {
            (Polarity::Negative, 1)
        };
        let end = self.pts.len().saturating_sub(1).max(start);
        MemoryStack { polarity, extrema: self.pts[start..end].to_vec() }
    }

    /// Irreversible flux by the Everett telescoping sum.
    fn irreversible(&self, everett: &Everett, e_total: f64) -> f64 {
        let mut b = -0.5 * e_total;
        for w in self.pts.windows(2) {
            let (from, to) = (w[0], w[1]);
            if to > from {
                b += everett.value(to, from);
            } else {
                b -= everett.value(from, to);
            }
        }
        b
    }
}

/// Immutable hysteresis model: Everett surface plus reversible term.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisModel {
    everett: Everett,
    h_sat: f64,
    h_clip: f64,
    chi_rev: f64,
    e_total: f64,
    b_sat: f64,
    b_r_max: f64,
}

impl HysteresisModel {
    /// Analytic Gaussian-Preisach model normalised to `params.b_r_max`.
    ///
    /// Fails if the requested `b_sat` would need a negative reversible
    /// susceptibility or one contributing more than 10% of `b_sat`.
    pub fn analytic(params: PreisachParams) -> Result<Self> {
        params.validate()?;
        let hs = params.h_sat;
        let mut ev = AnalyticEverett::new(params);
        let total = ev.value(hs, -hs);
        let remanent = 0.5 * total - ev.value(hs, 0.0);
        if !(remanent > 0.0) {
            return Err(Error::Config("Preisach density yields no remanence".into()));
        }
        let scale = params.b_r_max / remanent;
        ev.set_scale(scale);
        let e_total = scale * total;
        let reversible = params.b_sat - 0.5 * e_total;
        if reversible < -1e-12 * params.b_sat || reversible > 0.1 * params.b_sat {
            return Err(Error::Config(format!(
                "parameters need a reversible contribution of {reversible:.4} T at h_sat; \
                 it must lie in [0, {:.4}] T (10% of b_sat)",
                0.1 * params.b_sat
            )));
        }
        let chi_rev = reversible.max(0.0) / hs;
        Ok(Self::assemble(Everett::Analytic(ev), chi_rev, e_total))
    }

    /// Table model. `chi_rev` is the reversible susceptibility in T per A/m.
    pub fn from_table(table: EverettTable, chi_rev: f64) -> Result<Self> {
        if !(chi_rev.is_finite() && chi_rev >= 0.0) {
            return Err(Error::Invalid(format!("chi_rev must be >= 0, got {chi_rev}")));
        }
        let hs = table.h_sat();
        let e_total = table.value(hs, -hs);
        if !(e_total > 0.0) {
            return Err(Error::Invalid("Everett table has no irreversible swing".into()));
        }
        Ok(Self::assemble(Everett::Table(table), chi_rev, e_total))
    }

    fn assemble(everett: Everett, chi_rev: f64, e_total: f64) -> Self {
        let h_sat = everett.h_sat();
        let mut m = Self {
            everett,
            h_sat,
            h_clip: DEFAULT_CLIP_FACTOR * h_sat,
            chi_rev,
            e_total,
            b_sat: 0.5 * e_total + chi_rev * h_sat,
            b_r_max: 0.0,
        };
        let p = Path::from_stack(&MemoryStack::saturated(Polarity::Positive), h_sat);
        m.b_r_max = m.remanence_of(p);
        m
    }

    pub fn with_h_clip(mut self, h_clip: f64) -> Result<Self> {
        if !(h_clip.is_finite() && h_clip >= self.h_sat) {
            return Err(Error::Invalid(format!("h_clip must be >= h_sat, got {h_clip}")));
        }
        self.h_clip = h_clip;
        Ok(self)
    }

    /// Samples this model's irreversible surface on an `n`-node grid.
    pub fn tabulated(&self, n: usize) -> Result<Self> {
        let table = EverettTable::tabulate(self.h_sat, n, |a, b| self.everett.value(a, b))?;
        Ok(Self::from_table(table, self.chi_rev)?.with_h_clip(self.h_clip)?)
    }

    /// Same model with its Everett table perturbed node by node.
    pub fn perturbed<R: rand::Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        match &self.everett {
            Everett::Table(t) => Self::from_table(t.perturbed(sigma, rng)?, self.chi_rev)?.with_h_clip(self.h_clip),
            Everett::Analytic(_) => Err(Error::Invalid(
                "only table models can be perturbed; tabulate the analytic model first".into(),
            )),
        }
    }

    pub fn everett(&self) -> &Everett {
        &self.everett
    }
    pub fn h_sat(&self) -> f64 {
        self.h_sat
    }
    pub fn h_clip(&self) -> f64 {
        self.h_clip
    }
    pub fn b_sat(&self) -> f64 {
        self.b_sat
    }
    pub fn chi_rev(&self) -> f64 {
        self.chi_rev
    }
    /// Remanence after positive saturation.
    pub fn b_r_max(&self) -> f64 {
        self.b_r_max
    }

    fn flux_of(&self, path: &Path) -> f64 {
        let h = path.current().clamp(-self.h_sat, self.h_sat);
        path.irreversible(&self.everett, self.e_total) + self.chi_rev * h
    }

    fn remanence_of(&self, mut path: Path) -> f64 {
        path.advance(0.0);
        self.flux_of(&path)
    }

    fn check_field(&self, h: f64) -> Result<()> {
        if !h.is_finite() || h.abs() > self.h_clip {
            return Err(Error::Invalid(format!(
                "field {h} A/m outside the hard limit ±{} A/m",
                self.h_clip
            )));
        }
        Ok(())
    }

    /// Flux density after the history `stack` followed by a monotone sweep
    /// to `h`. Extrema reached by that sweep are wiped.
    pub fn evaluate(&self, stack: &MemoryStack, h: f64) -> Result<f64> {
        stack.validate(self.h_sat)?;
        self.check_field(h)?;
        let mut p = Path::from_stack(stack, self.h_sat);
        p.advance(h);
        Ok(self.flux_of(&p))
    }

    /// Remanence reached by sweeping from `h_from` (after `stack`) to zero.
    pub fn remanence(&self, stack: &MemoryStack, h_from: f64) -> Result<f64> {
        stack.validate(self.h_sat)?;
        self.check_field(h_from)?;
        Ok(self.remanence_of(Path::from_state(stack, h_from, self.h_sat)))
    }

    /// Remanence after the excursion `h_now -> h_cp -> 0`, no validation.
    pub(crate) fn excursion_remanence(&self, start: &Path, h_cp: f64) -> f64 {
        let mut p = start.clone();
        p.advance(h_cp);
        self.remanence_of(p)
    }

    pub(crate) fn path(&self, stack: &MemoryStack, h_now: f64) -> Path {
        Path::from_state(stack, h_now, self.h_sat)
    }
}

/// Full hysteresis state of one magnet: field, flux and memory.
#[derive(Debug, Clone)]
pub struct MagnetState {
    model: Arc<HysteresisModel>,
    stack: MemoryStack,
    h_now: f64,
    b_now: f64,
}

impl PartialEq for MagnetState {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.model, &other.model)
            && self.stack == other.stack
            && self.h_now == other.h_now
            && self.b_now == other.b_now
    }
}

impl MagnetState {
    /// Remanent state after saturating with the given polarity.
    pub fn saturated_remanent(model: Arc<HysteresisModel>, polarity: Polarity) -> Self {
        let stack = MemoryStack::saturated(polarity);
        let mut s = Self { model, stack, h_now: 0.0, b_now: 0.0 };
        s.refresh();
        s
    }

    /// State with an explicit history. `h_now` is reached from the last
    /// stored extremum by a monotone sweep.
    pub fn from_history(model: Arc<HysteresisModel>, stack: MemoryStack, h_now: f64) -> Result<Self> {
        stack.validate(model.h_sat)?;
        model.check_field(h_now)?;
        let p = model.path(&stack, h_now);
        let mut s = Self { stack: p.stack(), model, h_now, b_now: 0.0 };
        s.refresh();
        Ok(s)
    }

    /// Zero-remanence state reached on the descending major branch:
    /// saturate positive, demagnetise to the corner point that leaves zero
    /// remanence, return to zero field.
    pub fn demagnetized(model: Arc<HysteresisModel>) -> Result<Self> {
        let hs = model.h_sat;
        let start = Path::from_stack(&MemoryStack::saturated(Polarity::Positive), hs);
        let (mut lo, mut hi) = (-hs * (1.0 - 1e-9), 0.0);
        if model.excursion_remanence(&start, lo) > 0.0 {
            return Err(Error::Solver("model cannot be demagnetised without saturation".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if model.excursion_remanence(&start, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hs {
                break;
            }
        }
        let mut s = Self::saturated_remanent(model, Polarity::Positive);
        s.apply_field(0.5 * (lo + hi))?;
        s.apply_field(0.0)?;
        Ok(s)
    }

    fn refresh(&mut self) {
        let p = self.model.path(&self.stack, self.h_now);
        self.b_now = self.model.flux_of(&p);
    }

    /// Monotone sweep from the current field to `h_target`.
    pub fn apply_field(&mut self, h_target: f64) -> Result<()> {
        self.model.check_field(h_target)?;
        if h_target == self.h_now {
            return Ok(());
        }
        let mut p = self.model.path(&self.stack, self.h_now);
        p.advance(h_target);
        self.stack = p.stack();
        self.h_now = h_target;
        self.b_now = self.model.flux_of(&p);
        Ok(())
    }

    /// Remanence this state would decay to if the field went to zero now.
    pub fn remanence(&self) -> f64 {
        self.model.remanence_of(self.model.path(&self.stack, self.h_now))
    }

    pub fn model(&self) -> &Arc<HysteresisModel> {
        &self.model
    }
    pub fn stack(&self) -> &MemoryStack {
        &self.stack
    }
    pub fn h_now(&self) -> f64 {
        self.h_now
    }
    pub fn b_now(&self) -> f64 {
        self.b_now
    }

    /// Same field history replayed on another model.
    pub fn with_model(&self, model: Arc<HysteresisModel>) -> Result<Self> {
        Self::from_history(model, self.stack.clone(), self.h_now)
    }
}
