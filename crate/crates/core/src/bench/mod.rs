// SPDX-License-Identifier: MIT OR Apache-2.0

//! Size and power estimation and reproduction of the reference tables.
//!
//! Every replicate sample is drawn from an evaluation substream keyed by the alternative,
//! so all detectors of a table (and of tables sharing an alternative) see the same
//! samples. Thresholds are resolved for every observed `N₁` before the parallel
//! evaluation pass, and randomized decisions are realized with per-detector auxiliary
//! uniforms.

pub mod tables;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibrator;
use crate::detectors::{realize, Detector, DetectorSpec};
use crate::error::{invalid, Result};
use crate::process::simulate_with;
use crate::rng::{derive_key, keyed_substream, Purpose};
use crate::{EventSample, PiecewiseIntensity};

pub use tables::{row_detector, ReferenceTable, ReferenceTables, TableKind};

/// Smallest accepted replicate count of an estimate.
pub const MIN_REPS: usize = 100;
/// Slack added to the flag threshold for reference values rounded to two decimals.
pub const ROUNDING_SLACK: f64 = 0.005;
/// Flag threshold in pooled standard errors.
pub const FLAG_SIGMAS: f64 = 3.0;

/// Rejection rate with its Monte Carlo standard error `√(p̂(1−p̂)/reps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl Estimate {
    pub fn from_count(rejections: usize, reps: usize) -> Self {
        let p = rejections as f64 / reps as f64;
        Self { estimate: p, stderr: (p * (1.0 - p) / reps as f64).sqrt(), reps }
    }
}

/// Seed of the evaluation stream of an alternative.
pub fn alternative_key(intensity: &PiecewiseIntensity) -> u64 {
    derive_key(
        intensity.lambda0.to_bits(),
        &[intensity.delta.to_bits(), intensity.tau.to_bits(), intensity.end().to_bits()],
    )
}

/// Replicate samples of an alternative, drawn from the evaluation streams.
pub fn simulate_replicates(intensity: &PiecewiseIntensity, scale: f64, reps: usize, seed: u64) -> Result<Vec<EventSample>> {
    let key = alternative_key(intensity);
    (0..reps)
        .into_par_iter()
        .map(|r| simulate_with(intensity, scale, &mut keyed_substream(seed, Purpose::Evaluation, key, r as u64)))
        .collect()
}

/// Resolves every detector's thresholds for the sample sizes present in `samples`.
pub fn prepare_detectors(detectors: &[&Detector], cal: &Calibrator, samples: &[EventSample]) -> Result<()> {
    let sizes: BTreeSet<(u64, usize)> = samples.iter().map(|s| (s.scale().to_bits(), s.total())).collect();
    for d in detectors {
        if d.depends_on_count() {
            for &(scale, n) in &sizes {
                d.prepare(cal, f64::from_bits(scale), n)?;
            }
        } else if let Some(&(scale, n)) = sizes.iter().next() {
            d.prepare(cal, f64::from_bits(scale), n)?;
        }
    }
    Ok(())
}

/// Realized decisions `[detector][replicate]` on shared samples.
pub fn rejection_indicators(
    detectors: &[&Detector],
    cal: &Calibrator,
    samples: &[EventSample],
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    prepare_detectors(detectors, cal, samples)?;
    let by_sample: Vec<Vec<bool>> = samples
        .par_iter()
        .enumerate()
        .map(|(r, s)| {
            detectors
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let phi = d.rejection_probability(s, cal)?;
                    Ok(realize(phi, derive_key(seed, &[i as u64]), r as u64))
                })
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..detectors.len()).map(|i| by_sample.iter().map(|row| row[i]).collect()).collect())
}

/// Rejection rates of several detectors on common samples of an intensity.
pub fn estimate_rejections(
    detectors: &[&Detector],
    cal: &Calibrator,
    intensity: &PiecewiseIntensity,
    scale: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if reps < MIN_REPS {
        return Err(invalid(format!("at least {MIN_REPS} replicates are required, got {reps}")));
    }
    let samples = simulate_replicates(intensity, scale, reps, seed)?;
    let indicators = rejection_indicators(detectors, cal, &samples, seed)?;
    Ok(indicators.iter().map(|v| Estimate::from_count(v.iter().filter(|&&b| b).count(), reps)).collect())
}

/// Estimated size at a homogeneous intensity `λ₀`.
pub fn estimate_size(
    detector: &Detector,
    cal: &Calibrator,
    lambda0: f64,
    scale: f64,
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    let null = PiecewiseIntensity::homogeneous(lambda0)?;
    Ok(estimate_rejections(&[detector], cal, &null, scale, reps, seed)?[0])
}

/// Estimated power against an alternative intensity.
pub fn estimate_power(
    detector: &Detector,
    cal: &Calibrator,
    alternative: &PiecewiseIntensity,
    scale: f64,
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(estimate_rejections(&[detector], cal, alternative, scale, reps, seed)?[0])
}

/// Replication scale and seeds of a table reproduction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Table ids; empty means every table.
    pub tables: Vec<String>,
    /// Replicates of size tables.
    pub null_reps: usize,
    /// Replicates of power tables.
    pub alt_reps: usize,
    /// Master seed of the evaluation streams.
    pub seed: u64,
    /// Level of every detector.
    pub alpha: f64,
}

impl BenchConfig {
    /// Desk scale: 2,000 null and 500 alternative replicates.
    pub fn desk() -> Self {
        Self { tables: Vec::new(), null_reps: 2_000, alt_reps: 500, seed: 1, alpha: 0.05 }
    }

    /// Reference scale: 5,000 null and 1,000 alternative replicates.
    pub fn paper_scale() -> Self {
        Self { null_reps: 5_000, alt_reps: 1_000, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.null_reps < MIN_REPS || self.alt_reps < MIN_REPS {
            return Err(invalid(format!("at least {MIN_REPS} replicates are required")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("level α must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Calibration replicate count of the desk scale.
pub const DESK_CALIBRATION_REPLICATES: usize = 50_000;

/// One estimated cell with its comparison against the reference value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(flatten)]
    pub estimate: Estimate,
    pub reference: f64,
    pub diff: f64,
    /// Flag threshold `3·√(p̂(1−p̂)/n + p(1−p)/n_ref) + 0.005`.
    pub tolerance: f64,
    pub flagged: bool,
}

impl Cell {
    pub fn new(delta: Option<f64>, estimate: Estimate, reference: f64, reference_reps: usize) -> Self {
        let p = estimate.estimate;
        let pooled = (p * (1.0 - p) / estimate.reps as f64 + reference * (1.0 - reference) / reference_reps as f64).sqrt();
        let tolerance = FLAG_SIGMAS * pooled + ROUNDING_SLACK;
        let diff = p - reference;
        Self { delta, estimate, reference, diff, tolerance, flagged: diff.abs() > tolerance }
    }
}

/// Estimated row of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    pub detector: DetectorSpec,
    pub cells: Vec<Cell>,
}

/// Estimated table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub id: String,
    pub caption: String,
    pub kind: TableKind,
    pub reps: usize,
    pub reference_reps: usize,
    pub calibration_replicates: usize,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
}

type CellFormat = Box<dyn Fn(&Cell) -> String>;

impl ResultTable {
    /// Number of cells and of flagged cells.
    pub fn flag_count(&self) -> (usize, usize) {
        let cells = self.rows.iter().flat_map(|r| &r.cells);
        let total = cells.clone().count();
        (total, cells.filter(|c| c.flagged).count())
    }

    /// CSV with header `detector,metric,<δ…>` (or `size`) and one line per metric.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["detector".to_owned(), "metric".to_owned()];
        match self.rows.first() {
            Some(row) if self.kind != TableKind::Size => {
                header.extend(row.cells.iter().map(|c| format!("{}", c.delta.expect("power cell"))))
            }
            _ => header.push("size".to_owned()),
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let metrics: [(&str, CellFormat); 6] = [
                ("estimate", Box::new(|c: &Cell| format!("{}", c.estimate.estimate))),
                ("stderr", Box::new(|c: &Cell| format!("{:.6}", c.estimate.stderr))),
                ("reference", Box::new(|c: &Cell| format!("{}", c.reference))),
                ("diff", Box::new(|c: &Cell| format!("{:.6}", c.diff))),
                ("tolerance", Box::new(|c: &Cell| format!("{:.6}", c.tolerance))),
                ("flagged", Box::new(|c: &Cell| format!("{}", c.flagged))),
            ];
            for (name, f) in &metrics {
                let mut record = vec![row.label.clone(), (*name).to_owned()];
                record.extend(row.cells.iter().map(f));
                w.write_record(&record)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    /// Fixed-width summary with estimates and flags.
    pub fn render(&self) -> String {
        let mut out = format!("{} ({}; {} reps, B = {})\n", self.id, self.caption, self.reps, self.calibration_replicates);
        for row in &self.rows {
            out.push_str(&format!("{:<18}", row.label));
            for c in &row.cells {
                out.push_str(&format!(" {:>5.3}{}", c.estimate.estimate, if c.flagged { "*" } else { " " }));
            }
            out.push('\n');
            out.push_str(&format!("{:<18}", "  reference"));
            for c in &row.cells {
                out.push_str(&format!(" {:>5.3} ", c.reference));
            }
            out.push('\n');
        }
        let (total, flagged) = self.flag_count();
        out.push_str(&format!("{flagged} of {total} cells flagged\n"));
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }
}

/// Reproduces the selected reference tables.
///
/// Detectors are shared across tables so thresholds resolved for one table are reused by
/// the next; `progress` receives one line per estimated cell column.
pub fn reproduce_tables(
    config: &BenchConfig,
    cal: &Calibrator,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<Vec<ResultTable>> {
    config.validate()?;
    let reference = ReferenceTables::embedded();
    let ids: Vec<String> = if config.tables.is_empty() {
        reference.ids().into_iter().map(str::to_owned).collect()
    } else {
        config.tables.clone()
    };
    let selected = ids.iter().map(|id| reference.get(id)).collect::<Result<Vec<_>>>()?;
    let mut registry: Vec<(String, Detector)> = Vec::new();
    let mut out = Vec::with_capacity(selected.len());
    for table in selected {
        let rows = table.rows()?;
        let mut indices = Vec::with_capacity(rows.len());
        for (label, _) in &rows {
            let idx = match registry.iter().position(|(l, _)| l == label) {
                Some(i) => i,
                None => {
                    registry.push((label.clone(), Detector::new(row_detector(label, reference.lambda0, config.alpha)?)?));
                    registry.len() - 1
                }
            };
            indices.push(idx);
        }
        let detectors: Vec<&Detector> = indices.iter().map(|&i| &registry[i].1).collect();
        let reps = if table.kind == TableKind::Size { config.null_reps } else { config.alt_reps };
        let columns = table.columns();
        let mut estimates: Vec<Vec<Estimate>> = vec![Vec::with_capacity(columns.len()); rows.len()];
        for delta in &columns {
            progress(&format!(
                "{}: {} ({} reps)",
                table.id,
                delta.map_or("null".to_owned(), |d| format!("delta = {d}")),
                reps
            ));
            let intensity = table.intensity(reference.lambda0, *delta)?;
            let column = estimate_rejections(&detectors, cal, &intensity, reference.scale, reps, config.seed)?;
            for (row, e) in estimates.iter_mut().zip(column) {
                row.push(e);
            }
        }
        let result_rows = rows
            .iter()
            .zip(&estimates)
            .zip(&detectors)
            .map(|(((label, refs), est), d)| ResultRow {
                label: label.clone(),
                detector: d.spec().clone(),
                cells: columns
                    .iter()
                    .zip(est)
                    .zip(refs)
                    .map(|((delta, e), r)| Cell::new(*delta, *e, *r, table.reference_reps))
                    .collect(),
            })
            .collect();
        out.push(ResultTable {
            id: table.id.clone(),
            caption: table.caption.clone(),
            kind: table.kind,
            reps,
            reference_reps: table.reference_reps,
            calibration_replicates: cal.options().replicates,
            seed: config.seed,
            rows: result_rows,
        });
    }
    Ok(out)
}
