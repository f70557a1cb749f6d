//! Reference implementations shared by the integration tests. None of them
//! touch the Everett surface or the reduced-memory bookkeeping of the
//! library.

#![allow(dead_code)]

use std::sync::Arc;

use tunemag::hysteresis::{HysteresisModel, MagnetState, MemoryStack, Polarity, PreisachParams};

/// Discretised Preisach plane: one relay per grid cell with `α ≥ β`,
/// carrying its own ±1 state.
pub struct HysteronGrid {
    h_sat: f64,
    n: usize,
    /// Cell masses, row `i` (α-interval) holds cells `j = 0..=i`.
    mass: Vec<f64>,
    state: Vec<i8>,
    amplitude: f64,
    chi: f64,
    h: f64,
}

const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl HysteronGrid {
    /// Builds the grid for the Gaussian density of `p` with `n_nodes`
    /// field nodes spanning `[-h_sat, h_sat]`, then normalises it the same
    /// way the model is specified: remanence after positive saturation is
    /// `b_r_max`, flux at `h_sat` is `b_sat`.
    pub fn new(p: &PreisachParams, n_nodes: usize) -> Self {
        let hs = p.h_sat;
        let cells = n_nodes - 1;
        let d = 2.0 * hs / cells as f64;
        let density = |a: f64, b: f64| {
            let k = 0.5 * (a - b);
            let u = 0.5 * (a + b);
            let zc = (k - p.h_c) / p.sigma_c;
            let zu = u / p.sigma_u;
            (-0.5 * zc * zc).exp() * (-0.5 * zu * zu).exp()
        };
        let mut mass = vec![0.0; row_start(cells)];
        for i in 0..cells {
            let a0 = -hs + i as f64 * d;
            for j in 0..=i {
                let b0 = -hs + j as f64 * d;
                let mut m = 0.0;
                if j < i {
                    for (xa, wa) in GL3 {
                        for (xb, wb) in GL3 {
                            let a = a0 + 0.5 * d * (xa + 1.0);
                            let b = b0 + 0.5 * d * (xb + 1.0);
                            m += wa * wb * density(a, b);
                        }
                    }
                    m *= 0.25 * d * d;
                } else {
                    // triangle b0 <= β <= α <= a0 + d, collapsed coordinates
                    for (xa, wa) in GL3 {
                        let a = a0 + 0.5 * d * (xa + 1.0);
                        let span = a - a0;
                        for (xt, wt) in GL3 {
                            let t = 0.5 * (xt + 1.0);
                            m += wa * wt * density(a, a0 + span * t) * span;
                        }
                    }
                    m *= 0.25 * d;
                }
                mass[row_start(i) + j] = m;
            }
        }
        let mut g = Self { h_sat: hs, n: n_nodes, state: vec![-1; mass.len()], mass, amplitude: 1.0, chi: 0.0, h: -hs };
        g.apply_node(n_nodes - 1);
        g.apply_node((n_nodes - 1) / 2);
        let remanent = g.irreversible();
        let total: f64 = g.mass.iter().sum();
        g.amplitude = p.b_r_max / remanent;
        g.chi = (p.b_sat - 0.5 * g.amplitude * total) / hs;
        g.reset_negative();
        g
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.h_sat
        } else {
            -self.h_sat + k as f64 * 2.0 * self.h_sat / (self.n - 1) as f64
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn reset_negative(&mut self) {
        self.state.iter_mut().for_each(|s| *s = -1);
        self.h = -self.h_sat;
    }

    /// Sweeps monotonically to field node `k`.
    pub fn apply_node(&mut self, k: usize) {
        let h = self.node(k);
        if h > self.h {
            // every relay whose up-threshold α lies at or below h switches up
            for i in 0..k.min(self.n - 1) {
                let r = row_start(i);
                self.state[r..=r + i].iter_mut().for_each(|s| *s = 1);
            }
        } else if h < self.h {
            for i in k..self.n - 1 {
                let r = row_start(i);
                self.state[r + k..=r + i].iter_mut().for_each(|s| *s = -1);
            }
        }
        self.h = h;
    }

    fn irreversible(&self) -> f64 {
        0.5 * self.amplitude * self.mass.iter().zip(&self.state).map(|(m, s)| m * *s as f64).sum::<f64>()
    }

    pub fn flux(&self) -> f64 {
        self.irreversible() + self.chi * self.h
    }
}

/// Dominant alternating extrema of a raw field history, found by scanning
/// backwards for new suffix maxima and minima. The history must start with
/// a saturation (`|h| >= h_sat`).
pub fn reduced_memory(history: &[f64], h_sat: f64) -> MemoryStack {
    let last_sat = history.iter().rposition(|h| h.abs() >= h_sat).expect("history starts saturated");
    let polarity = if history[last_sat] > 0.0 { Polarity::Positive } else { Polarity::Negative };
    let tail = &history[last_sat + 1..];
    if tail.is_empty() {
        return MemoryStack::saturated(polarity);
    }
    let now = *tail.last().unwrap();
    let (mut hi, mut lo) = (now, now);
    // (value, is_max), newest first
    let mut records: Vec<(f64, bool)> = Vec::new();
    for &h in tail[..tail.len() - 1].iter().rev() {
        if h > hi {
            hi = h;
            match records.last_mut() {
                Some(r) if r.1 => r.0 = h,
                _ => records.push((h, true)),
            }
        } else if h < lo {
            lo = h;
            match records.last_mut() {
                Some(r) if !r.1 => r.0 = h,
                _ => records.push((h, false)),
            }
        }
    }
    // the saturation itself acts as the oldest record of its sign
    if let Some(r) = records.last() {
        let sat_is_max = polarity == Polarity::Positive;
        if r.1 == sat_is_max {
            records.pop();
        }
    }
    let extrema: Vec<f64> = records.iter().rev().map(|r| r.0).collect();
    MemoryStack::new(polarity, extrema, h_sat).expect("oracle stack is valid")
}

/// Remanence after `h_now → c → 0` for `c` on `n` evenly spaced points of
/// the open interval `(-h_sat, h_sat)`, replayed with `apply_field`.
pub fn dense_cp_sweep(state: &MagnetState, n: usize) -> Vec<(f64, f64)> {
    let hs = state.model().h_sat();
    (0..n)
        .map(|i| {
            let c = -hs + 2.0 * hs * (i as f64 + 0.5) / n as f64;
            let mut s = state.clone();
            s.apply_field(c).unwrap();
            s.apply_field(0.0).unwrap();
            (c, s.b_now())
        })
        .collect()
}

/// Corner point at which the swept remanence first crosses `target`,
/// linearly interpolated between sweep samples.
pub fn locate_cp(sweep: &[(f64, f64)], target: f64) -> Option<f64> {
    sweep.windows(2).find_map(|w| {
        let ((c0, b0), (c1, b1)) = (w[0], w[1]);
        if (b0 - target) * (b1 - target) <= 0.0 && b0 != b1 {
            Some(c0 + (target - b0) / (b1 - b0) * (c1 - c0))
        } else {
            None
        }
    })
}

pub fn default_model() -> Arc<HysteresisModel> {
    Arc::new(HysteresisModel::analytic(PreisachParams::default()).unwrap())
}

/// Planner-grade table model used by the bench.
pub fn table_model() -> Arc<HysteresisModel> {
    Arc::new(HysteresisModel::analytic(PreisachParams::default()).unwrap().tabulated(201).unwrap())
}

/// Random valid state: a saturation of random sign followed by up to
/// `max_len` random fields inside `(-h_sat, h_sat)`.
pub fn random_state<R: rand::Rng>(model: &Arc<HysteresisModel>, rng: &mut R, max_len: usize) -> (MagnetState, Vec<f64>) {
    let hs = model.h_sat();
    let pol = if rng.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
    let mut s = MagnetState::saturated_remanent(model.clone(), pol);
    let mut hist = vec![if pol == Polarity::Positive { hs } else { -hs }, 0.0];
    let len = rng.gen_range(0..=max_len);
    for _ in 0..len {
        let h = rng.gen_range(-0.98 * hs..0.98 * hs);
        s.apply_field(h).unwrap();
        hist.push(h);
    }
    (s, hist)
}
