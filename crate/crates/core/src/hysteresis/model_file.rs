//! Model file: a TOML document holding either the analytic Preisach
//! parameters or an Everett table.
//!
//! ```toml
//! format_version = 1
//! h_clip = 5000000.0      # optional, A/m
//!
//! [analytic]
//! b_r_max = 1.0
//! b_sat = 1.2
//! h_sat = 500000.0
//! h_c = 120000.0
//! sigma_c = 60000.0
//! sigma_u = 60000.0
//! ```
//!
//! or a `[table]` block with `h_sat`, `grid_n`, `chi_rev` and the row-major
//! triangular `values` (row `i` holds E(a_i, a_0..=a_i)).

use serde::{Deserialize, Serialize};

use super::{Everett, EverettTable, HysteresisModel, PreisachParams};
use crate::error::toml_error;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableBlock {
    pub h_sat: f64,
    pub grid_n: usize,
    pub chi_rev: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<PreisachParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableBlock>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model document serialises")
    }

    pub fn build(&self) -> Result<HysteresisModel> {
        let model = match (&self.analytic, &self.table) {
            (Some(p), None) => HysteresisModel::analytic(*p)?,
            (None, Some(t)) => {
                let table = EverettTable::new(t.h_sat, t.grid_n, t.values.clone())?;
                HysteresisModel::from_table(table, t.chi_rev)?
            }
            _ => {
                return Err(Error::Config(
                    "model file needs exactly one of [analytic] or [table]".into(),
                ))
            }
        };
        match self.h_clip {
            Some(c) => model.with_h_clip(c),
            None => Ok(model),
        }
    }
}

impl HysteresisModel {
    pub fn to_document(&self) -> ModelDocument {
        let (analytic, table) = match self.everett() {
            Everett::Analytic(a) => (Some(*a.params()), None),
            Everett::Table(t) => (
                None,
                Some(TableBlock {
                    h_sat: t.h_sat(),
                    grid_n: t.grid_n(),
                    chi_rev: self.chi_rev(),
                    values: t.values().to_vec(),
                }),
            ),
        };
        ModelDocument { format_version: MODEL_FORMAT_VERSION, h_clip: Some(self.h_clip()), analytic, table }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        ModelDocument::parse(text)?.build()
    }

    pub fn to_toml(&self) -> String {
        self.to_document().to_toml()
    }
}
