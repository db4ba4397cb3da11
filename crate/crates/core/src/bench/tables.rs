// SPDX-License-Identifier: MIT OR Apache-2.0

//! Embedded reference tables and the detectors behind their rows.

use serde::{Deserialize, Serialize};

use crate::calibration::Correction;
use crate::detectors::{Baseline, DetectorSpec, Family, GridPreset};
use crate::error::{Error, Result};
use crate::process::BaselineKind;
use crate::PiecewiseIntensity;

/// Format tag of the reference data file.
pub const TABLES_FORMAT: &str = "reference-tables";
/// Supported version of the reference data file.
pub const TABLES_VERSION: u32 = 1;

const EMBEDDED: &str = include_str!("../../data/reference_tables.json");

/// What a table estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Rejection rate under the null.
    Size,
    /// Rejection rate under `λ₀ + δ·1_{(τ, 1]}`.
    Jump,
    /// Rejection rate under `λ₀ + δ·1_{(τ, τ+ℓ]}`.
    Bump,
}

/// One row of reference values: a single size or one value per `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowValues {
    Size(f64),
    Power(Vec<f64>),
}

impl RowValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Size(v) => vec![*v],
            Self::Power(v) => v.clone(),
        }
    }
}

/// A reference table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub id: String,
    pub kind: TableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    pub baseline: BaselineKind,
    pub caption: String,
    /// Replicates behind the reference values.
    pub reference_reps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    /// Row label to values, in display order.
    pub rows: serde_json::Map<String, serde_json::Value>,
}

impl ReferenceTable {
    /// Rows in display order.
    pub fn rows(&self) -> Result<Vec<(String, Vec<f64>)>> {
        self.rows
            .iter()
            .map(|(label, v)| {
                let values: RowValues = serde_json::from_value(v.clone())?;
                Ok((label.clone(), values.values()))
            })
            .collect()
    }

    /// Column keys: `δ` values, or a single `None` for size tables.
    pub fn columns(&self) -> Vec<Option<f64>> {
        match self.kind {
            TableKind::Size => vec![None],
            _ => self.deltas.iter().map(|&d| Some(d)).collect(),
        }
    }

    /// Intensity simulated for a column.
    pub fn intensity(&self, lambda0: f64, delta: Option<f64>) -> Result<PiecewiseIntensity> {
        let missing = || Error::Spec(format!("table {} lacks a change location", self.id));
        match (self.kind, delta) {
            (TableKind::Size, _) | (_, None) => PiecewiseIntensity::homogeneous(lambda0),
            (TableKind::Jump, Some(d)) => PiecewiseIntensity::jump(lambda0, d, self.tau.ok_or_else(missing)?),
            (TableKind::Bump, Some(d)) => {
                let ell = self.ell.ok_or_else(|| Error::Spec(format!("table {} lacks a bump length", self.id)))?;
                PiecewiseIntensity::bump(lambda0, d, self.tau.ok_or_else(missing)?, ell)
            }
        }
    }
}

/// The reference data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTables {
    pub format: String,
    pub version: u32,
    pub lambda0: f64,
    #[serde(rename = "L")]
    pub scale: f64,
    pub alpha: f64,
    pub tables: Vec<ReferenceTable>,
}

impl ReferenceTables {
    /// The tables shipped with the crate.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED).expect("embedded reference tables are valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tables: Self = serde_json::from_str(text)?;
        if tables.format != TABLES_FORMAT || tables.version != TABLES_VERSION {
            return Err(Error::Spec(format!(
                "unsupported reference file {} v{} (expected {TABLES_FORMAT} v{TABLES_VERSION})",
                tables.format, tables.version
            )));
        }
        for t in &tables.tables {
            let width = t.columns().len();
            for (label, values) in t.rows()? {
                if values.len() != width {
                    return Err(Error::Spec(format!("row {label} of table {} has {} values", t.id, values.len())));
                }
            }
        }
        Ok(tables)
    }

    /// Table ids in file order.
    pub fn ids(&self) -> Vec<&str> {
        self.tables.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Result<&ReferenceTable> {
        self.tables.iter().find(|t| t.id == id).ok_or_else(|| Error::UnknownTable(id.to_owned()))
    }
}

/// Detector of a table row, with min-p correction at level `α`.
///
/// Labels: `La`, `Z`, `CP1(grid)`/`CP2(grid)` (jump families, known baseline),
/// `CP1u(grid)`/`CP2u(grid)` (unknown baseline), `TC1`/`TC2` (full grid `Θ`) and
/// `TC1u`/`TC2u` (grids `Θ₁`, `Θ₂`).
pub fn row_detector(label: &str, lambda0: f64, alpha: f64) -> Result<DetectorSpec> {
    let known = Baseline::Known { lambda0 };
    let unknown = Baseline::Unknown { bound: None };
    let (family, baseline, grid) = match label {
        "La" => (Family::Laplace, unknown, GridPreset::Default),
        "Z" => (Family::Z, unknown, GridPreset::Default),
        "TC1" => (Family::Phi910LinKnown, known, GridPreset::Theta),
        "TC2" => (Family::Phi910QuadKnown, known, GridPreset::Theta),
        "TC1u" => (Family::Phi910LinCond, unknown, GridPreset::Theta1),
        "TC2u" => (Family::Phi910QuadCond, unknown, GridPreset::Theta2),
        other => {
            let (head, rest) = other.split_once('(').ok_or_else(|| Error::Spec(format!("unknown row label {other}")))?;
            let grid: GridPreset = rest.trim_end_matches(')').parse()?;
            match head {
                "CP1" => (Family::Phi8LinKnown, known, grid),
                "CP2" => (Family::Phi8QuadKnown, known, grid),
                "CP1u" => (Family::Phi8LinCond, unknown, grid),
                "CP2u" => (Family::Phi8QuadCond, unknown, grid),
                _ => return Err(Error::Spec(format!("unknown row label {other}"))),
            }
        }
    };
    let mut spec = DetectorSpec::new(family, baseline).with_alpha(alpha).with_grid(grid);
    if family.requirements().aggregated {
        spec = spec.with_correction(Correction::MinP);
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_tables_parse() {
        let t = ReferenceTables::embedded();
        assert_eq!(t.tables.len(), 23);
        assert_eq!(t.get("size_known").unwrap().rows().unwrap()[0], ("La".to_owned(), vec![0.051]));
        let cp = t.get("cp_star_0.5").unwrap();
        assert_eq!(cp.columns().len(), 8);
        assert!(matches!(t.get("nope"), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn every_row_has_a_detector() {
        let t = ReferenceTables::embedded();
        for table in &t.tables {
            for (label, _) in table.rows().unwrap() {
                let spec = row_detector(&label, 1.0, 0.05).unwrap();
                let expect_cond = label.ends_with('u') || label.contains("u(");
                assert_eq!(spec.family.is_conditional(), expect_cond, "{label}");
            }
        }
    }
}
