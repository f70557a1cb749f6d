use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One force evaluation: position, control flux, force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub x: f64,
    pub phi_tm: f64,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x_lo: f64,
    pub x_hi: f64,
    pub k_m: f64,
    pub k_a: f64,
    pub r2: f64,
    pub max_residual: f64,
    pub n_samples: usize,
}

/// Piecewise model `F = k_m·φ_tm + k_a·x`. The top-level constants come
/// from one fit over all samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceFit {
    pub k_m: f64,
    pub k_a: f64,
    pub r2: f64,
    pub max_residual: f64,
    pub segments: Vec<Segment>,
}

impl ForceFit {
    /// Segment containing `x`; positions outside the fitted range use the
    /// nearest end segment.
    pub fn segment_for(&self, x: f64) -> &Segment {
        self.segments
            .iter()
            .find(|s| x <= s.x_hi)
            .unwrap_or_else(|| self.segments.last().expect("fit has at least one segment"))
    }

    pub fn predict(&self, x: f64, phi_tm: f64) -> f64 {
        let s = self.segment_for(x);
        s.k_m * phi_tm + s.k_a * x
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }
}

fn r_squared(ys: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = ys.clone().count() as f64;
    let mean = ys.clone().map(|(y, _)| y).sum::<f64>() / n;
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    let mut worst = 0.0f64;
    for (y, yhat) in ys {
        ss_tot += (y - mean).powi(2);
        ss_res += (y - yhat).powi(2);
        worst = worst.max((y - yhat).abs());
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (r2.clamp(0.0, 1.0), worst)
}

// Two-column least squares without intercept, columns rescaled to unit
// max-norm before forming the normal equations.
fn fit_two_column(samples: &[ForceSample]) -> Result<(f64, f64)> {
    let sp = samples.iter().fold(0.0f64, |m, s| m.max(s.phi_tm.abs()));
    let sx = samples.iter().fold(0.0f64, |m, s| m.max(s.x.abs()));
    if sp == 0.0 {
        return Err(Error::Fit("control flux is zero in every sample: k_m is indeterminate".into()));
    }
    if sx == 0.0 {
        return Err(Error::Fit("every sample sits at x = 0: k_a is indeterminate".into()));
    }
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let (p, x) = (s.phi_tm / sp, s.x / sx);
        a11 += p * p;
        a12 += p * x;
        a22 += x * x;
        b1 += p * s.force;
        b2 += x * s.force;
    }
    let det = a11 * a22 - a12 * a12;
    if det <= 1e-12 * a11 * a22 {
        return Err(Error::Fit("control flux and position columns are collinear: rank-deficient sample grid".into()));
    }
    let km = (b1 * a22 - a12 * b2) / det;
    let ka = (a11 * b2 - a12 * b1) / det;
    Ok((km / sp, ka / sx))
}

fn fit_block(samples: &[ForceSample]) -> Result<(f64, f64, f64, f64)> {
    let (k_m, k_a) = fit_two_column(samples)?;
    let (r2, worst) = r_squared(samples.iter().map(|s| (s.force, k_m * s.phi_tm + k_a * s.x)));
    Ok((k_m, k_a, r2, worst))
}

/// Splits the sampled x-range into `n_segments` equal intervals and fits
/// `F = k_m·φ_tm + k_a·x` on each.
pub fn fit_piecewise_linear(samples: &[ForceSample], n_segments: usize) -> Result<ForceFit> {
    if n_segments == 0 {
        return Err(Error::Invalid("n_segments must be at least 1".into()));
    }
    if samples.iter().any(|s| !(s.x.is_finite() && s.phi_tm.is_finite() && s.force.is_finite())) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    let (k_m, k_a, r2, max_residual) = fit_block(samples)?;

    let lo = samples.iter().map(|s| s.x).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_segments as f64;
    let mut buckets: Vec<Vec<ForceSample>> = vec![Vec::new(); n_segments];
    for s in samples {
        let k = if width > 0.0 { (((s.x - lo) / width).floor() as usize).min(n_segments - 1) } else { 0 };
        buckets[k].push(*s);
    }
    let mut segments = Vec::with_capacity(n_segments);
    for (k, bucket) in buckets.iter().enumerate() {
        let x_lo = lo + k as f64 * width;
        let x_hi = if k + 1 == n_segments { hi } else { lo + (k + 1) as f64 * width };
        if bucket.len() < 2 {
            return Err(Error::Fit(format!("segment [{x_lo}, {x_hi}] m holds {} samples", bucket.len())));
        }
        let (km, ka, r2, worst) = fit_block(bucket)
            .map_err(|e| Error::Fit(format!("segment [{x_lo}, {x_hi}] m: {e}")))?;
        segments.push(Segment { x_lo, x_hi, k_m: km, k_a: ka, r2, max_residual: worst, n_samples: bucket.len() });
    }
    Ok(ForceFit { k_m, k_a, r2, max_residual, segments })
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit("line fit needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (r2, _) = r_squared(xs.iter().zip(ys).map(|(x, y)| (*y, slope * x + intercept)));
    Ok(LineFit { slope, intercept, r2 })
}

/// Residual norm of the least-squares quadratic `y = c0 + c1 x + c2 x²`,
/// relative to the norm of `y`.
pub fn quadratic_fit_residual(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Fit("quadratic fit needs three or more paired points".into()));
    }
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Err(Error::Fit("all abscissae are zero".into()));
    }
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (x, y) in xs.iter().zip(ys) {
        let t = x / scale;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            b[i] += basis[i] * y;
            for j in 0..3 {
                a[i][j] += basis[i] * basis[j];
            }
        }
    }
    let c = solve3(a, b).ok_or_else(|| Error::Fit("quadratic design matrix is singular".into()))?;
    let mut res = 0.0;
    let mut norm = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let t = x / scale;
        res += (y - (c[0] + c[1] * t + c[2] * t * t)).powi(2);
        norm += y * y;
    }
    Ok(if norm > 0.0 { (res / norm).sqrt() } else { 0.0 })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}
