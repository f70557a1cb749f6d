//! First-order reversal curves and Everett identification from them.
//!
//! A curve starts on the descending major branch at its reversal field
//! `h_reversal` and is swept back up towards positive saturation. For a
//! Preisach model the rise of such a curve above its starting point is
//! exactly the Everett value E(h, h_reversal), reversible part included, so
//! identified models carry `chi_rev = 0`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::everett::{grid_node, EverettTable};
use super::{HysteresisModel, MagnetState, Polarity};
use crate::{Error, Result};
use std::sync::Arc;

pub const FORC_HEADER: [&str; 3] = ["h_reversal", "h", "b"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcRow {
    pub h_reversal: f64,
    pub h: f64,
    pub b: f64,
}

/// One reversal curve: `(h, b)` samples with strictly increasing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcCurve {
    pub h_reversal: f64,
    pub points: Vec<(f64, f64)>,
}

impl ForcCurve {
    fn start(&self) -> f64 {
        self.points[0].1
    }

    fn top(&self) -> f64 {
        self.points.last().map(|p| p.0).unwrap_or(self.h_reversal)
    }

    /// Rise above the curve's starting flux at field `h`.
    fn rise(&self, h: f64) -> f64 {
        let pts = &self.points;
        if h <= pts[0].0 {
            return 0.0;
        }
        let last = pts[pts.len() - 1];
        if h >= last.0 {
            return last.1 - self.start();
        }
        let k = pts.partition_point(|p| p.0 <= h);
        let (h0, b0) = pts[k - 1];
        let (h1, b1) = pts[k];
        let w = (h - h0) / (h1 - h0);
        b0 + w * (b1 - b0) - self.start()
    }
}

/// A set of FORCs grouped by reversal field, sorted ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForcTable {
    curves: Vec<ForcCurve>,
}

impl ForcTable {
    /// Groups rows into curves. Rows of one curve must be contiguous.
    pub fn from_rows(rows: &[ForcRow]) -> Result<Self> {
        let mut curves: Vec<ForcCurve> = Vec::new();
        for (k, r) in rows.iter().enumerate() {
            if !(r.h_reversal.is_finite() && r.h.is_finite() && r.b.is_finite()) {
                return Err(Error::Invalid(format!("row {k}: non-finite value")));
            }
            match curves.last_mut() {
                Some(c) if c.h_reversal == r.h_reversal => c.points.push((r.h, r.b)),
                _ => {
                    if curves.iter().any(|c| c.h_reversal == r.h_reversal) {
                        return Err(Error::Invalid(format!(
                            "row {k}: rows of reversal curve {} are not contiguous",
                            r.h_reversal
                        )));
                    }
                    curves.push(ForcCurve { h_reversal: r.h_reversal, points: vec![(r.h, r.b)] });
                }
            }
        }
        let t = Self { curves: Self::sorted(curves) };
        t.validate()?;
        Ok(t)
    }

    fn sorted(mut curves: Vec<ForcCurve>) -> Vec<ForcCurve> {
        curves.sort_by(|a, b| a.h_reversal.total_cmp(&b.h_reversal));
        curves
    }

    /// Structural checks. Flux monotonicity along a curve is not enforced
    /// here: measured curves carry noise, which identification clips.
    pub fn validate(&self) -> Result<()> {
        for c in &self.curves {
            if c.points[0].0 < c.h_reversal {
                return Err(Error::Invalid(format!(
                    "curve {}: first sample at h = {} lies below the reversal field",
                    c.h_reversal, c.points[0].0
                )));
            }
            if let Some(w) = c.points.windows(2).find(|w| w[1].0 <= w[0].0) {
                return Err(Error::Invalid(format!(
                    "curve {}: h must increase strictly, found {} then {}",
                    c.h_reversal, w[0].0, w[1].0
                )));
            }
        }
        Ok(())
    }

    pub fn curves(&self) -> &[ForcCurve] {
        &self.curves
    }

    pub fn rows(&self) -> impl Iterator<Item = ForcRow> + '_ {
        self.curves.iter().flat_map(|c| {
            c.points.iter().map(move |&(h, b)| ForcRow { h_reversal: c.h_reversal, h, b })
        })
    }

    /// Reads the `h_reversal,h,b` CSV format. Lines starting with `#` are
    /// comments.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let header_line = headers.position().map(|p| p.line()).unwrap_or(1);
        if headers.iter().ne(FORC_HEADER.iter().copied()) {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("expected header `h_reversal,h,b`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(e, 0))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 3 {
                return Err(Error::Parse { line, msg: format!("expected 3 fields, got {}", rec.len()) });
            }
            let mut vals = [0.0; 3];
            for (slot, field) in vals.iter_mut().zip(rec.iter()) {
                *slot = parse_number(field).map_err(|msg| Error::Parse { line, msg })?;
            }
            rows.push(ForcRow { h_reversal: vals[0], h: vals[1], b: vals[2] });
        }
        Self::from_rows(&rows)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", FORC_HEADER.join(","))?;
        for r in self.rows() {
            writeln!(w, "{},{},{}", r.h_reversal, r.h, r.b)?;
        }
        Ok(())
    }

    /// Synthetic measurement: `n_curves` reversal fields evenly spaced over
    /// `[-h_sat, h_sat]`, each curve sampled at `n_points` fields from its
    /// reversal up to `h_sat`.
    pub fn sample_model(model: &Arc<HysteresisModel>, n_curves: usize, n_points: usize) -> Result<Self> {
        use rayon::prelude::*;
        if n_curves < 2 || n_points < 2 {
            return Err(Error::Invalid("need at least 2 curves of 2 points".into()));
        }
        let hs = model.h_sat();
        let curves: Result<Vec<ForcCurve>> = (0..n_curves)
            .into_par_iter()
            .map(|i| {
                let hr = grid_node(hs, n_curves, i);
                let mut s = MagnetState::saturated_remanent(model.clone(), Polarity::Positive);
                s.apply_field(hs)?;
                s.apply_field(hr)?;
                let mut points = vec![(hr, s.b_now())];
                for k in 1..n_points {
                    let h = hr + (hs - hr) * k as f64 / (n_points - 1) as f64;
                    if h <= points.last().expect("nonempty").0 {
                        continue;
                    }
                    s.apply_field(h)?;
                    points.push((h, s.b_now()));
                }
                Ok(ForcCurve { h_reversal: hr, points })
            })
            .collect();
        Ok(Self { curves: curves? })
    }

    /// Copy with i.i.d. Gaussian noise of standard deviation `sigma_b` added to
    /// every flux sample.
    pub fn with_noise<R: rand::Rng + ?Sized>(&self, sigma_b: f64, rng: &mut R) -> Result<Self> {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, sigma_b).map_err(|e| Error::Invalid(e.to_string()))?;
        let mut out = self.clone();
        for c in &mut out.curves {
            for p in &mut c.points {
                p.1 += normal.sample(rng);
            }
        }
        Ok(out)
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse { line, msg: e.to_string() }
}

fn parse_number(field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("`{field}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{field}` is not finite"));
    }
    Ok(v)
}

/// Parses a list of field values separated by commas, whitespace or
/// newlines. `#` starts a comment; a leading `h` header token is skipped.
pub fn parse_field_list(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            if out.is_empty() && tok == "h" {
                continue;
            }
            let v = parse_number(tok).map_err(|msg| Error::Parse { line: idx as u64 + 1, msg })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Identified model with the share of grid nodes changed by monotonicity
/// clipping.
#[derive(Debug, Clone)]
pub struct Identification {
    pub model: HysteresisModel,
    pub clip_fraction: f64,
}

/// Builds an Everett table on a `grid_n`-node triangular grid from FORC data.
///
/// `h_sat` is taken as the largest field in the table. Reversal fields must
/// cover `[-h_sat, h_sat]` with no gap wider than two grid steps, and every
/// curve must be swept up to within one grid step of `h_sat`.
pub fn identify_from_forc(table: &ForcTable, grid_n: usize) -> Result<Identification> {
    if grid_n < EverettTable::MIN_GRID {
        return Err(Error::Invalid(format!(
            "grid must have at least {} nodes, got {grid_n}",
            EverettTable::MIN_GRID
        )));
    }
    table.validate()?;
    let curves = table.curves();
    if curves.len() < 2 {
        return Err(Error::Identification(format!(
            "{} reversal curve(s) cannot cover the Preisach plane",
            curves.len()
        )));
    }
    let h_sat = curves.iter().map(ForcCurve::top).fold(f64::NEG_INFINITY, f64::max);
    if !(h_sat > 0.0) {
        return Err(Error::Identification("curves never reach a positive field".into()));
    }
    let step = 2.0 * h_sat / (grid_n - 1) as f64;
    let slack = 1e-9 * h_sat;

    let first = curves[0].h_reversal;
    if first > -h_sat + step + slack {
        return Err(Error::Identification(format!("gap in reversal fields: [{}, {first}] A/m", -h_sat)));
    }
    let last = curves[curves.len() - 1].h_reversal;
    if last < h_sat - step - slack {
        return Err(Error::Identification(format!("gap in reversal fields: [{last}, {h_sat}] A/m")));
    }
    for w in curves.windows(2) {
        if w[1].h_reversal - w[0].h_reversal > 2.0 * step + slack {
            return Err(Error::Identification(format!(
                "gap in reversal fields: [{}, {}] A/m exceeds two grid steps ({step} A/m each)",
                w[0].h_reversal, w[1].h_reversal
            )));
        }
    }
    for c in curves {
        if c.h_reversal < h_sat - step && c.top() < h_sat - step - slack {
            return Err(Error::Identification(format!(
                "curve {} stops at {} A/m, short of h_sat = {h_sat} A/m",
                c.h_reversal,
                c.top()
            )));
        }
        if let Some(w) = c.points.windows(2).find(|w| w[1].0 - w[0].0 > 2.0 * step + slack) {
            return Err(Error::Identification(format!(
                "curve {}: gap in field samples [{}, {}] A/m",
                c.h_reversal, w[0].0, w[1].0
            )));
        }
    }

    let reversals: Vec<f64> = curves.iter().map(|c| c.h_reversal).collect();
    let everett = |alpha: f64, beta: f64| -> f64 {
        let k = reversals.partition_point(|&r| r <= beta);
        if k == 0 {
            return curves[0].rise(alpha);
        }
        if k == curves.len() {
            return curves[k - 1].rise(alpha);
        }
        let (lo, hi) = (&curves[k - 1], &curves[k]);
        let w = (beta - lo.h_reversal) / (hi.h_reversal - lo.h_reversal);
        let e_hi = if alpha > hi.h_reversal { hi.rise(alpha) } else { 0.0 };
        (1.0 - w) * lo.rise(alpha) + w * e_hi
    };
    let mut grid = EverettTable::tabulate(h_sat, grid_n, everett)?;
    let changed = grid.enforce_monotone();
    let nodes = grid.values().len();
    let model = HysteresisModel::from_table(grid, 0.0)?;
    Ok(Identification { model, clip_fraction: changed as f64 / nodes as f64 })
}
