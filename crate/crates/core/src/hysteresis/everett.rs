//! Everett surfaces: the flux change E(α, β) collected by sweeping a Preisach
//! model from β up to α.
//!
//! Two realisations exist. [`AnalyticEverett`] integrates a Preisach density
//! that is Gaussian in the interaction field `u = (α+β)/2` and in the
//! coercive half-width `k = (α-β)/2`. [`EverettTable`] stores node values on
//! a uniform triangular grid and interpolates bilinearly (linearly on the
//! half cells that touch the diagonal, so that E(α, α) = 0 holds exactly).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::quad;
use crate::{Error, Result};

/// Parameters of the analytic Preisach density.
///
/// The density amplitude is not a parameter: it is fixed so that the
/// remanence after positive saturation equals `b_r_max`. The reversible
/// susceptibility is then whatever lifts the saturated flux to `b_sat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreisachParams {
    /// Remanence after positive saturation, T.
    pub b_r_max: f64,
    /// Flux density at `h_sat`, T.
    pub b_sat: f64,
    /// Saturation field, A/m.
    pub h_sat: f64,
    /// Mean coercive half-width, A/m.
    pub h_c: f64,
    /// Spread of the coercive half-width, A/m.
    pub sigma_c: f64,
    /// Spread of the interaction field, A/m.
    pub sigma_u: f64,
}

impl Default for PreisachParams {
    fn default() -> Self {
        Self {
            b_r_max: 1.0,
            b_sat: 1.2,
            h_sat: 500e3,
            h_c: 120e3,
            sigma_c: 60e3,
            sigma_u: 60e3,
        }
    }
}

impl PreisachParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.b_r_max, self.b_sat, self.h_sat, self.h_c, self.sigma_c, self.sigma_u];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("Preisach parameters must be finite".into()));
        }
        if self.b_r_max <= 0.0 || self.b_sat <= self.b_r_max {
            return Err(Error::Config(format!(
                "need 0 < b_r_max < b_sat, got b_r_max = {}, b_sat = {}",
                self.b_r_max, self.b_sat
            )));
        }
        if self.h_sat <= 0.0 || self.sigma_c <= 0.0 || self.sigma_u <= 0.0 || self.h_c < 0.0 {
            return Err(Error::Config("h_sat, sigma_c, sigma_u must be > 0 and h_c >= 0".into()));
        }
        Ok(())
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Everett function of the Gaussian Preisach density.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEverett {
    params: PreisachParams,
    scale: f64,
    tol: f64,
}

impl AnalyticEverett {
    /// Builds the surface and returns it with its unscaled integral over the
    /// whole Preisach triangle. `scale` is set later by the model.
    pub(crate) fn new(params: PreisachParams) -> Self {
        let mut e = Self { params, scale: 1.0, tol: 0.0 };
        let total = e.raw(params.h_sat, -params.h_sat);
        e.tol = total * 1e-13;
        e
    }

    pub(crate) fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    pub fn params(&self) -> &PreisachParams {
        &self.params
    }

    // Integral over the triangle {β ≤ β' ≤ α' ≤ α} written in (u, k)
    // coordinates: the u-integral is a difference of normal CDFs, the
    // k-integral is done numerically. Constant factors live in `scale`.
    fn raw(&self, alpha: f64, beta: f64) -> f64 {
        let p = &self.params;
        let half_width = 0.5 * (alpha - beta);
        let (hc, sc, su) = (p.h_c, p.sigma_c, p.sigma_u);
        let f = |k: f64| {
            let d = (k - hc) / sc;
            let upper = std_normal_cdf((alpha - k) / su);
            let lower = std_normal_cdf((beta + k) / su);
            (-0.5 * d * d).exp() * (upper - lower)
        };
        quad::integrate(f, 0.0, half_width, self.tol, 400)
    }

    pub fn value(&self, alpha: f64, beta: f64) -> f64 {
        let hs = self.params.h_sat;
        let a = alpha.clamp(-hs, hs);
        let b = beta.clamp(-hs, hs);
        if a <= b {
            return 0.0;
        }
        self.scale * self.raw(a, b)
    }
}

/// Everett values on a uniform triangular grid over `[-h_sat, h_sat]`.
///
/// Node `(i, j)` with `j <= i` holds E(a_i, a_j) where
/// `a_i = -h_sat + i * 2 h_sat / (n - 1)`. Storage is row-major by α index,
/// row `i` holding `i + 1` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EverettTable {
    h_sat: f64,
    n: usize,
    values: Vec<f64>,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl EverettTable {
    pub const MIN_GRID: usize = 11;

    pub fn new(h_sat: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!("Everett grid needs at least 2 nodes, got {n}")));
        }
        if !(h_sat.is_finite() && h_sat > 0.0) {
            return Err(Error::Invalid(format!("h_sat must be positive, got {h_sat}")));
        }
        if values.len() != n * (n + 1) / 2 {
            return Err(Error::Invalid(format!(
                "triangular grid of {n} nodes needs {} values, got {}",
                n * (n + 1) / 2,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite Everett value {v}")));
        }
        Ok(Self { h_sat, n, values })
    }

    /// Samples `f(α, β)` on the grid nodes.
    pub fn tabulate<F: Fn(f64, f64) -> f64 + Sync>(h_sat: f64, n: usize, f: F) -> Result<Self> {
        use rayon::prelude::*;
        if n < 2 {
            return Err(Error::Invalid(format!("Everett grid needs at least 2 nodes, got {n}")));
        }
        let nodes: Vec<f64> = (0..n).map(|i| grid_node(h_sat, n, i)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..=i).map(|j| if i == j { 0.0 } else { f(nodes[i], nodes[j]) }).collect())
            .collect();
        Self::new(h_sat, n, rows.concat())
    }

    pub fn h_sat(&self) -> f64 {
        self.h_sat
    }

    pub fn grid_n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        grid_node(self.h_sat, self.n, i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[tri(i, j)]
    }

    pub fn value(&self, alpha: f64, beta: f64) -> f64 {
        let hs = self.h_sat;
        let a = alpha.clamp(-hs, hs);
        let b = beta.clamp(-hs, hs);
        if a <= b {
            return 0.0;
        }
        let step = 2.0 * hs / (self.n - 1) as f64;
        let s = (a + hs) / step;
        let t = (b + hs) / step;
        let i = (s.floor() as usize).min(self.n - 2);
        let j = (t.floor() as usize).min(self.n - 2);
        let fs = s - i as f64;
        let ft = t - j as f64;
        if i > j {
            let v00 = self.at(i, j);
            let v10 = self.at(i + 1, j);
            let v01 = self.at(i, j + 1);
            let v11 = self.at(i + 1, j + 1);
            (1.0 - fs) * (1.0 - ft) * v00 + fs * (1.0 - ft) * v10 + (1.0 - fs) * ft * v01 + fs * ft * v11
        } else {
            // lower half of a diagonal cell; fs >= ft here
            let v00 = self.at(i, i);
            let v10 = self.at(i + 1, i);
            let v11 = self.at(i + 1, i + 1);
            v00 + fs * (v10 - v00) + ft * (v11 - v10)
        }
    }

    /// Forces E(a_i, a_i) = 0 and monotonicity (nondecreasing in α,
    /// nonincreasing in β) by clipping negative increments. Returns the
    /// number of nodes whose value changed.
    pub fn enforce_monotone(&mut self) -> usize {
        let original = self.values.clone();
        let n = self.n;
        for i in 0..n {
            self.values[tri(i, i)] = 0.0;
        }
        for j in 0..n {
            for i in (j + 1)..n {
                let below = self.at(i - 1, j);
                let v = &mut self.values[tri(i, j)];
                if *v < below {
                    *v = below;
                }
            }
        }
        for i in 0..n {
            for j in (0..i).rev() {
                let right = self.at(i, j + 1);
                let v = &mut self.values[tri(i, j)];
                if *v < right {
                    *v = right;
                }
            }
        }
        original.iter().zip(&self.values).filter(|(a, b)| a != b).count()
    }

    /// Multiplies every node by `1 + ε`, `ε ~ N(0, sigma²)` drawn in storage
    /// order. Monotonicity is not restored: clipping noisy nodes with a
    /// running maximum biases the surface upward. Call
    /// [`EverettTable::enforce_monotone`] if a nonnegative density is needed.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Invalid(format!("perturbation sigma must be >= 0, got {sigma}")));
        }
        let mut out = self.clone();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?;
            for v in out.values.iter_mut() {
                *v *= 1.0 + normal.sample(rng);
            }
        }
        Ok(out)
    }
}

pub(crate) fn grid_node(h_sat: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        h_sat
    } else {
        -h_sat + i as f64 * (2.0 * h_sat) / (n - 1) as f64
    }
}

/// Either realisation of the Everett surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Everett {
    Analytic(AnalyticEverett),
    Table(EverettTable),
}

impl Everett {
    pub fn value(&self, alpha: f64, beta: f64) -> f64 {
        match self {
            Everett::Analytic(a) => a.value(alpha, beta),
            Everett::Table(t) => t.value(alpha, beta),
        }
    }

    pub fn h_sat(&self) -> f64 {
        match self {
            Everett::Analytic(a) => a.params.h_sat,
            Everett::Table(t) => t.h_sat,
        }
    }
}
