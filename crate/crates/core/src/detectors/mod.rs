// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detectors: window statistics paired with calibrated thresholds.
//!
//! A [`Detector`] resolves its thresholds once per regime (per scale, and per observed
//! `N₁` for unknown-baseline families) and caches them, so repeated runs on samples of
//! the same size only evaluate statistics. Every comparison is a strict exceedance.

pub mod grids;
pub mod reference;
pub mod spec;
pub mod umpu;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::calibration::laws::{randomized_quantile, RandomizedQuantile};
use crate::calibration::levels::dichotomy;
use crate::calibration::montecarlo::quantile_rank;
use crate::calibration::{bonferroni, Calibrator, Correction, FamilyLaws, Functional, GridStat, GridWindow, LevelCorrection, Regime};
use crate::error::{Error, Result};
use crate::process::{window_max_count, window_min_count};
use crate::rng::{substream, Purpose};
use crate::statistics::{sup_shifted_over_length, sup_shifted_over_location, ShiftKind};
use crate::EventSample;

pub use spec::{Baseline, CalibrationHandle, DetectorSpec, Family, GridPreset};
pub use umpu::{umpu_split, CountRegime, UmpuSplit};

/// Outcome of a test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
    /// Reject with the given probability (randomized families on a quantile atom).
    RandomizedReject { probability: f64 },
}

impl Decision {
    /// Decision of a test with rejection probability `phi`.
    pub fn from_probability(phi: f64) -> Self {
        if phi >= 1.0 {
            Self::Reject
        } else if phi <= 0.0 {
            Self::Accept
        } else {
            Self::RandomizedReject { probability: phi }
        }
    }

    pub fn probability(self) -> f64 {
        match self {
            Self::Reject => 1.0,
            Self::Accept => 0.0,
            Self::RandomizedReject { probability } => probability,
        }
    }

    /// Realizes the decision with one auxiliary uniform.
    pub fn realize(self, uniform: f64) -> bool {
        uniform < self.probability()
    }
}

/// Realizes a rejection probability with the auxiliary uniform of replicate `r`.
pub fn realize(probability: f64, seed: u64, r: u64) -> bool {
    use rand::Rng as _;
    if probability >= 1.0 {
        return true;
    }
    if probability <= 0.0 {
        return false;
    }
    substream(seed, Purpose::Randomization, r).random::<f64>() < probability
}

/// Side of a threshold comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Exceedance means `statistic > threshold`.
    Upper,
    /// Exceedance means `statistic < threshold`.
    Lower,
}

/// One comparison of the ledger. `margin > 0` exactly when the statistic exceeds its
/// threshold; `margin = 0` marks a quantile atom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub tau1: f64,
    pub tau2: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub tail: Tail,
    pub margin: f64,
}

impl WindowRecord {
    fn new(tau1: f64, tau2: f64, statistic: f64, threshold: f64, tail: Tail) -> Self {
        let margin = match tail {
            Tail::Upper => statistic - threshold,
            Tail::Lower => threshold - statistic,
        };
        Self { tau1, tau2, statistic, threshold, tail, margin }
    }
}

/// Seeds and pool size behind a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    /// Seed of the calibration substreams.
    pub calibration: u64,
    /// Calibration replicate count `B`.
    #[serde(rename = "B")]
    pub replicates: usize,
    /// Seed of the simulated sample, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<u64>,
}

/// Result of running a detector on one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub family: Family,
    pub decision: Decision,
    pub rejection_probability: f64,
    pub alpha: f64,
    /// Individual level of aggregated families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<LevelCorrection>,
    /// Number of events `N₁`.
    pub n: usize,
    pub scale: f64,
    pub windows: Vec<WindowRecord>,
    /// `d₂` distance of the simulated alternative, when the sample was simulated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    pub seeds: Seeds,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TestReport {
    /// Whether the decision is a sure rejection.
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }

    /// Plain-text summary with the exceeding windows first.
    pub fn render(&self) -> String {
        let mut out = format!(
            "family      {}\ndecision    {}\nprobability {}\nalpha       {}\nevents      {} (L = {})\n",
            self.family,
            match self.decision {
                Decision::Reject => "reject".to_owned(),
                Decision::Accept => "accept".to_owned(),
                Decision::RandomizedReject { probability } => format!("randomized reject (p = {probability:.6})"),
            },
            self.rejection_probability,
            self.alpha,
            self.n,
            self.scale
        );
        if let Some(level) = &self.level {
            out.push_str(&format!(
                "level       {:.6e} ({:?}; Bonferroni {:.6e}; {} tests; {})\n",
                level.level, level.correction, level.bonferroni, level.family_size, level.grid
            ));
        }
        if let Some(d2) = self.d2 {
            out.push_str(&format!("d2          {d2}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning     {w}\n"));
        }
        let mut rows: Vec<&WindowRecord> = self.windows.iter().collect();
        rows.sort_by(|a, b| b.margin.partial_cmp(&a.margin).expect("finite margins"));
        out.push_str(&format!("{:>10} {:>10} {:>14} {:>14} {:>6} {:>14}\n", "tau1", "tau2", "statistic", "threshold", "tail", "margin"));
        const SHOWN: usize = 20;
        for r in rows.iter().take(SHOWN) {
            out.push_str(&format!(
                "{:>10.6} {:>10.6} {:>14.6} {:>14.6} {:>6} {:>14.6}\n",
                r.tau1,
                r.tau2,
                r.statistic,
                r.threshold,
                match r.tail {
                    Tail::Upper => "upper",
                    Tail::Lower => "lower",
                },
                r.margin
            ));
        }
        if rows.len() > SHOWN {
            out.push_str(&format!("... {} more windows\n", rows.len() - SHOWN));
        }
        out
    }
}

/// Thresholds resolved for one regime.
#[derive(Debug)]
enum Prepared {
    Lower { window: GridWindow, q: RandomizedQuantile },
    Upper { window: GridWindow, q: RandomizedQuantile },
    Umpu { window: GridWindow, split: UmpuSplit },
    Exact { family: FamilyLaws, crits: Vec<f64>, level: Option<LevelCorrection> },
    Scan { ell: f64, lower: Option<f64>, upper: Option<f64>, level: Option<LevelCorrection> },
    SupLength { tau_star: f64, delta_star: f64, threshold: f64 },
    SupLocation { delta_star: f64, threshold: f64 },
    Laplace { lower: f64, upper: f64 },
    Z { lower: f64, upper: f64 },
    Accept,
}

type PreparedKey = (u64, Option<usize>);

/// A validated detector with its per-regime threshold cache.
#[derive(Debug)]
pub struct Detector {
    spec: DetectorSpec,
    prepared: Mutex<HashMap<PreparedKey, Arc<Prepared>>>,
}

impl Clone for Detector {
    fn clone(&self) -> Self {
        Self { spec: self.spec.clone(), prepared: Mutex::default() }
    }
}

impl Detector {
    pub fn new(spec: DetectorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, prepared: Mutex::default() })
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    /// Whether thresholds depend on the observed `N₁`.
    pub fn depends_on_count(&self) -> bool {
        self.spec.family.is_conditional() || self.spec.family.is_reference()
    }

    /// Regime under which thresholds are resolved for a sample of `n` events.
    pub fn regime(&self, scale: f64, n: usize) -> Regime {
        match (self.spec.lambda0(), self.depends_on_count()) {
            (Some(lambda0), false) => Regime::Known { lambda0, scale },
            _ => Regime::Conditional { n, scale },
        }
    }

    fn key(&self, scale: f64, n: usize) -> PreparedKey {
        (scale.to_bits(), self.depends_on_count().then_some(n))
    }

    /// Resolves (and caches) the thresholds for samples of `n` events at scale `L`.
    pub fn prepare(&self, cal: &Calibrator, scale: f64, n: usize) -> Result<()> {
        self.prepared(cal, scale, n).map(|_| ())
    }

    /// Drops cached thresholds.
    pub fn clear(&self) {
        self.prepared.lock().expect("detector cache").clear();
    }

    fn prepared(&self, cal: &Calibrator, scale: f64, n: usize) -> Result<Arc<Prepared>> {
        let key = self.key(scale, n);
        if let Some(p) = self.prepared.lock().expect("detector cache").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.build(cal, self.regime(scale, n))?);
        self.prepared.lock().expect("detector cache").insert(key, p.clone());
        Ok(p)
    }

    fn single_window(&self) -> GridWindow {
        let tau = self.spec.tau_star.expect("validated");
        let ell = self.spec.ell_star.expect("validated");
        GridWindow { tau1: tau, tau2: (tau + ell).min(1.0), rho: ell }
    }

    fn count_regime(&self, regime: &Regime) -> CountRegime {
        let ell_star = self.spec.ell_star.expect("validated");
        match *regime {
            Regime::Known { lambda0, scale } => CountRegime::Known { lambda0, ell_star, scale },
            Regime::Conditional { n, .. } => CountRegime::Conditional { n, ell_star },
        }
    }

    fn build(&self, cal: &Calibrator, regime: Regime) -> Result<Prepared> {
        use Family::*;
        let spec = &self.spec;
        let alpha = spec.alpha;
        let scale = regime.scale();
        let conditional = spec.family.is_conditional();
        Ok(match spec.family {
            Phi1MinusKnown | Phi1MinusCond => {
                let pmf = self.count_regime(&regime).pmf()?;
                Prepared::Lower { window: self.single_window(), q: randomized_quantile(&pmf, alpha) }
            }
            Phi1PlusKnown | Phi1PlusCond => {
                let pmf = self.count_regime(&regime).pmf()?;
                Prepared::Upper { window: self.single_window(), q: randomized_quantile(&pmf, 1.0 - alpha) }
            }
            Phi2LinKnown | Phi2LinCond => {
                let split = umpu_split(&self.count_regime(&regime), alpha)?;
                Prepared::Umpu { window: self.single_window(), split }
            }
            Phi2QuadKnown | Phi2QuadCond => self.exact(cal, GridStat::Quad, regime, vec![self.single_window()], false)?,
            Phi3MinusKnown | Phi3MinusCond | Phi3PlusKnown | Phi3PlusCond | Phi4LinKnown | Phi4LinCond => {
                self.scan(cal, regime)?
            }
            Phi34QuadKnown | Phi34QuadCond => {
                let ell = spec.ell_star.expect("validated");
                let m = if conditional { grids::scan_m_cond(ell) } else { grids::scan_m_known(ell) };
                self.exact(cal, GridStat::Quad, regime, grids::scan_grid(ell, m), true)?
            }
            Phi5Known | Phi5Cond => {
                let (tau_star, delta_star) = (spec.tau_star.expect("validated"), spec.delta_star.expect("validated"));
                let f = Functional::SupOverLength { tau_star, delta_star };
                Prepared::SupLength { tau_star, delta_star, threshold: cal.quantile(&f, &regime, 1.0 - alpha)? }
            }
            Phi7Known | Phi7Cond => {
                let delta_star = spec.delta_star.expect("validated");
                let f = Functional::SupOverLocation { delta_star };
                Prepared::SupLocation { delta_star, threshold: cal.quantile(&f, &regime, 1.0 - alpha)? }
            }
            Phi6LinKnown | Phi6LinCond | Phi6QuadKnown | Phi6QuadCond => {
                let stat = if matches!(spec.family, Phi6LinKnown | Phi6LinCond) { GridStat::AbsLin } else { GridStat::Quad };
                let windows = grids::dyadic_lengths(spec.tau_star.expect("validated"), scale)?;
                self.exact(cal, stat, regime, windows, true)?
            }
            Phi8LinKnown | Phi8LinCond | Phi8QuadKnown | Phi8QuadCond => {
                let stat = if matches!(spec.family, Phi8LinKnown | Phi8LinCond) { GridStat::AbsLin } else { GridStat::Quad };
                let windows = if conditional {
                    grids::jump_windows_cond(spec.grid, scale)?
                } else {
                    grids::jump_windows_known(spec.grid, scale)?
                };
                self.exact(cal, stat, regime, windows, true)?
            }
            Phi910LinKnown | Phi910LinCond => {
                self.exact(cal, GridStat::AbsLin, regime, grids::full_grid_windows(spec.grid, false, scale)?, true)?
            }
            Phi910QuadKnown | Phi910QuadCond => {
                let windows = grids::full_grid_windows(spec.grid, conditional, scale)?;
                self.exact(cal, GridStat::Quad, regime, windows, true)?
            }
            Laplace | Z => {
                let n = regime.n().expect("reference tests condition on N₁");
                if n == 0 {
                    Prepared::Accept
                } else if spec.family == Laplace {
                    let (lower, upper) = reference::laplace_thresholds(cal, n, scale, alpha)?;
                    Prepared::Laplace { lower, upper }
                } else {
                    let (lower, upper) = reference::z_thresholds(n, alpha)?;
                    Prepared::Z { lower, upper }
                }
            }
        })
    }

    fn exact(
        &self,
        cal: &Calibrator,
        stat: GridStat,
        regime: Regime,
        windows: Vec<GridWindow>,
        aggregated: bool,
    ) -> Result<Prepared> {
        let family = cal.family(stat, regime, windows)?;
        let (level, correction) = if aggregated {
            let bonf = bonferroni(self.spec.alpha, family.len())?;
            let level = match self.spec.correction {
                Correction::Bonferroni => bonf,
                Correction::MinP => {
                    cal.minp_level(&family, self.spec.alpha, &format!("{}/{}", self.spec.family, self.spec.grid.id()))?
                }
            };
            let grid = grids::describe(&family.windows);
            let lc = LevelCorrection {
                correction: self.spec.correction,
                level,
                bonferroni: bonf,
                family_size: family.len(),
                grid,
            };
            (level, Some(lc))
        } else {
            (self.spec.alpha, None)
        };
        let crits = (0..family.len()).map(|w| family.law(w).upper_critical(level)).collect();
        Ok(Prepared::Exact { family, crits, level: correction })
    }

    fn scan(&self, cal: &Calibrator, regime: Regime) -> Result<Prepared> {
        use Family::*;
        let alpha = self.spec.alpha;
        let ell_star = self.spec.ell_star.expect("validated");
        let ell = if regime.is_conditional() { ell_star.min(0.5) } else { ell_star };
        Ok(match self.spec.family {
            Phi3MinusKnown | Phi3MinusCond => Prepared::Scan {
                ell,
                lower: Some(scan_quantile(cal, ell, &regime, alpha, false)?),
                upper: None,
                level: None,
            },
            Phi3PlusKnown | Phi3PlusCond => Prepared::Scan {
                ell,
                lower: None,
                upper: Some(scan_quantile(cal, ell, &regime, 1.0 - alpha, true)?),
                level: None,
            },
            _ => {
                let bonf = alpha / 2.0;
                let u = match self.spec.correction {
                    Correction::Bonferroni => bonf,
                    Correction::MinP => scan_minp_level(cal, ell, &regime, alpha)?,
                };
                Prepared::Scan {
                    ell,
                    lower: Some(scan_quantile(cal, ell, &regime, u, false)?),
                    upper: Some(scan_quantile(cal, ell, &regime, 1.0 - u, true)?),
                    level: Some(LevelCorrection {
                        correction: self.spec.correction,
                        level: u,
                        bonferroni: bonf,
                        family_size: 2,
                        grid: format!("minimum and maximum counts over windows of length {ell}"),
                    }),
                }
            }
        })
    }

    /// Rejection probability and, when `ledger` is set, the per-window records.
    fn evaluate(
        &self,
        sample: &EventSample,
        cal: &Calibrator,
        ledger: bool,
    ) -> Result<(f64, Vec<WindowRecord>, Option<LevelCorrection>)> {
        let n = sample.total();
        let scale = sample.scale();
        let prepared = self.prepared(cal, scale, n)?;
        let mut records = Vec::new();
        let mut push = |r: WindowRecord| {
            if ledger {
                records.push(r);
            }
        };
        let count = |w: &GridWindow| sample.count_unchecked(w.tau1, w.tau2);
        let exceed = |b: bool| if b { 1.0 } else { 0.0 };
        let (phi, level) = match &*prepared {
            Prepared::Lower { window, q } => {
                let c = count(window);
                push(WindowRecord::new(window.tau1, window.tau2, c as f64, q.b as f64, Tail::Lower));
                (umpu::lower_phi(q, c), None)
            }
            Prepared::Upper { window, q } => {
                let c = count(window);
                push(WindowRecord::new(window.tau1, window.tau2, c as f64, q.b as f64, Tail::Upper));
                (umpu::upper_phi(q, c), None)
            }
            Prepared::Umpu { window, split } => {
                let c = count(window);
                push(WindowRecord::new(window.tau1, window.tau2, c as f64, split.upper.b as f64, Tail::Upper));
                push(WindowRecord::new(window.tau1, window.tau2, c as f64, split.lower.b as f64, Tail::Lower));
                (split.phi(c), None)
            }
            Prepared::Exact { family, crits, level } => {
                let mut reject = false;
                for (w, window) in family.windows.iter().enumerate() {
                    let stat = family.statistic(w, count(window));
                    reject |= stat > crits[w];
                    push(WindowRecord::new(window.tau1, window.tau2, stat, crits[w], Tail::Upper));
                    if reject && !ledger {
                        break;
                    }
                }
                (exceed(reject), level.clone())
            }
            Prepared::Scan { ell, lower, upper, level } => {
                let mut reject = false;
                if let Some(q) = *lower {
                    let min = window_min_count(sample, *ell)?;
                    reject |= (min.count as f64) < q;
                    push(WindowRecord::new(min.tau, min.tau + ell, min.count as f64, q, Tail::Lower));
                }
                if let Some(q) = *upper {
                    let max = window_max_count(sample, *ell)?;
                    reject |= max.count as f64 > q;
                    push(WindowRecord::new(max.tau, max.tau + ell, max.count as f64, q, Tail::Upper));
                }
                (exceed(reject), level.clone())
            }
            Prepared::SupLength { tau_star, delta_star, threshold } => {
                let sup = sup_shifted_over_length(sample, *tau_star, *delta_star, self.shift_kind())?;
                push(WindowRecord::new(*tau_star, tau_star + sup.argmax, sup.value, *threshold, Tail::Upper));
                (exceed(sup.value > *threshold), None)
            }
            Prepared::SupLocation { delta_star, threshold } => {
                let sup = sup_shifted_over_location(sample, *delta_star, self.shift_kind())?;
                push(WindowRecord::new(sup.argmax, 1.0, sup.value, *threshold, Tail::Upper));
                (exceed(sup.value > *threshold), None)
            }
            Prepared::Laplace { lower, upper } => {
                let v = reference::laplace_statistic(sample);
                push(WindowRecord::new(0.0, 1.0, v, *lower, Tail::Lower));
                push(WindowRecord::new(0.0, 1.0, v, *upper, Tail::Upper));
                (exceed(v < *lower || v > *upper), None)
            }
            Prepared::Z { lower, upper } => {
                let v = reference::z_statistic(sample)?;
                push(WindowRecord::new(0.0, 1.0, v, *lower, Tail::Lower));
                push(WindowRecord::new(0.0, 1.0, v, *upper, Tail::Upper));
                (exceed(v < *lower || v > *upper), None)
            }
            Prepared::Accept => {
                push(WindowRecord::new(0.0, 1.0, 0.0, 0.0, Tail::Upper));
                (0.0, None)
            }
        };
        Ok((phi, records, level))
    }

    fn shift_kind(&self) -> ShiftKind {
        match self.spec.lambda0() {
            Some(lambda0) if !self.spec.family.is_conditional() => ShiftKind::Known { lambda0 },
            _ => ShiftKind::Conditional,
        }
    }

    /// Rejection probability on a sample, without the ledger.
    pub fn rejection_probability(&self, sample: &EventSample, cal: &Calibrator) -> Result<f64> {
        Ok(self.evaluate(sample, cal, false)?.0)
    }

    /// Full report on a sample.
    pub fn run(&self, sample: &EventSample, cal: &Calibrator) -> Result<TestReport> {
        let (phi, windows, level) = self.evaluate(sample, cal, true)?;
        Ok(TestReport {
            family: self.spec.family,
            decision: Decision::from_probability(phi),
            rejection_probability: phi,
            alpha: self.spec.alpha,
            level,
            n: sample.total(),
            scale: sample.scale(),
            windows,
            d2: None,
            seeds: Seeds { calibration: cal.options().seed, replicates: cal.options().replicates, sample: None },
            warnings: cal.warnings(),
        })
    }
}

/// Runs a detector once; a calibration handle in the spec overrides the calibrator's
/// replicate count and seed.
pub fn run_detector(spec: &DetectorSpec, sample: &EventSample, cal: &Calibrator) -> Result<TestReport> {
    let detector = Detector::new(spec.clone())?;
    match spec.calibration {
        Some(h) if h.replicates != cal.options().replicates || h.seed != cal.options().seed => {
            detector.run(sample, &cal.derive(h.replicates, h.seed))
        }
        _ => detector.run(sample, cal),
    }
}

fn extreme_functional(ell: f64, upper: bool) -> Functional {
    if upper {
        Functional::MaxCount { ell }
    } else {
        Functional::MinCount { ell }
    }
}

fn sorted_marginal(pool: &[(usize, usize)], upper: bool) -> Vec<usize> {
    let mut v: Vec<usize> = pool.iter().map(|&(lo, hi)| if upper { hi } else { lo }).collect();
    v.sort_unstable();
    v
}

/// `u`-quantile of the maximum (`upper`) or minimum window count of length `ℓ`, read from
/// the shared extremes pool and stored under the same key as a direct quantile query.
fn scan_quantile(cal: &Calibrator, ell: f64, regime: &Regime, u: f64, upper: bool) -> Result<f64> {
    let f = extreme_functional(ell, upper);
    let key = cal.level_key(f.name(), f.descriptor(), regime, u);
    cal.cached_value(key, || {
        let pool = cal.extremes_pool(ell, regime)?;
        let marginal = sorted_marginal(&pool, upper);
        Ok(marginal[quantile_rank(u, marginal.len()) - 1] as f64)
    })
}

/// Min-p level of the two-sided scan: the largest `u ∈ [α/2, α]` whose joint rejection
/// frequency on the extremes pool stays at or below `α`.
fn scan_minp_level(cal: &Calibrator, ell: f64, regime: &Regime, alpha: f64) -> Result<f64> {
    let key = cal.level_key("scan_minp", format!("ell={ell:?}"), regime, alpha);
    cal.cached_value(key, || {
        let pool = cal.extremes_pool(ell, regime)?;
        let (mins, maxs) = (sorted_marginal(&pool, false), sorted_marginal(&pool, true));
        let b = pool.len();
        let fwer = |u: f64| {
            let lo = mins[quantile_rank(u, b) - 1];
            let hi = maxs[quantile_rank(1.0 - u, b) - 1];
            pool.iter().filter(|&&(mn, mx)| mn < lo || mx > hi).count() as f64 / b as f64
        };
        if fwer(alpha / 2.0) > alpha {
            return Err(Error::CalibrationFailure(format!(
                "two-sided scan rejects with frequency {} > {alpha} at its Bonferroni level",
                fwer(alpha / 2.0)
            )));
        }
        Ok(dichotomy(alpha / 2.0, alpha, alpha, fwer))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::CalibrationOptions;
    use crate::process::simulate;
    use crate::PiecewiseIntensity;

    fn cal() -> Calibrator {
        Calibrator::in_memory(CalibrationOptions { replicates: 2_000, seed: 3, ..Default::default() })
    }

    fn known() -> Baseline {
        Baseline::Known { lambda0: 1.0 }
    }

    fn unknown() -> Baseline {
        Baseline::Unknown { bound: None }
    }

    #[test]
    fn strong_upper_exceedance_rejects_surely() {
        let times: Vec<f64> = (0..80).map(|i| 0.2 + 0.4 * (i as f64 + 0.5) / 80.0).collect();
        let sample = EventSample::new(times, 100.0).unwrap();
        let spec = DetectorSpec::new(Family::Phi1PlusKnown, known()).with_tau(0.2).with_ell(0.4);
        let report = run_detector(&spec, &sample, &cal()).unwrap();
        assert_eq!(report.decision, Decision::Reject);
        assert_eq!(report.windows.len(), 1);
        assert!(report.windows[0].margin > 0.0);
    }

    #[test]
    fn empty_sample_is_accepted_by_conditional_jump_family() {
        let sample = EventSample::empty(100.0).unwrap();
        for family in [Family::Phi8LinCond, Family::Phi8QuadCond, Family::Laplace, Family::Z] {
            let spec = DetectorSpec::new(family, unknown());
            let report = run_detector(&spec, &sample, &cal()).unwrap();
            assert_eq!(report.decision, Decision::Accept, "{family}");
        }
    }

    #[test]
    fn margins_agree_with_decisions() {
        let c = cal();
        let alt = PiecewiseIntensity::bump(1.0, -0.8, 0.2, 0.4).unwrap();
        for seed in 0..5 {
            let sample = simulate(&alt, 100.0, seed).unwrap();
            for family in [Family::Phi910QuadKnown, Family::Phi8LinKnown, Family::Phi4LinKnown] {
                let report = run_detector(&DetectorSpec::new(family, known()).with_ell_if(family, 0.4), &sample, &c).unwrap();
                let any = report.windows.iter().any(|w| w.margin > 0.0);
                assert_eq!(any, report.rejected(), "{family}");
            }
        }
    }

    #[test]
    fn every_family_runs() {
        let c = cal();
        let sample = simulate(&PiecewiseIntensity::homogeneous(1.0).unwrap(), 50.0, 11).unwrap();
        for &family in Family::ALL {
            let baseline = if family.is_conditional() || family.is_reference() { unknown() } else { known() };
            let req = family.requirements();
            let mut spec = DetectorSpec::new(family, baseline);
            if req.tau_star {
                spec = spec.with_tau(0.3);
            }
            if req.ell_star {
                spec = spec.with_ell(0.4);
            }
            if req.delta_star {
                spec = spec.with_delta(0.5);
            }
            let report = run_detector(&spec, &sample, &c).unwrap();
            assert!(!report.windows.is_empty(), "{family}");
            let p = report.rejection_probability;
            assert!((0.0..=1.0).contains(&p));
            if !family.is_randomized() {
                assert!(p == 0.0 || p == 1.0, "{family}");
            }
        }
    }

    #[test]
    fn minp_level_dominates_bonferroni() {
        let c = cal();
        let sample = simulate(&PiecewiseIntensity::homogeneous(1.0).unwrap(), 100.0, 2).unwrap();
        let spec = DetectorSpec::new(Family::Phi8QuadKnown, known()).with_grid(GridPreset::ThetaR);
        let bonf = run_detector(&spec, &sample, &c).unwrap().level.unwrap();
        let minp = run_detector(&spec.with_correction(Correction::MinP), &sample, &c).unwrap().level.unwrap();
        assert_eq!(bonf.family_size, 9);
        assert!((bonf.level - 0.05 / 9.0).abs() < 1e-15);
        assert!(minp.level >= bonf.level && minp.level <= 0.05);
    }

    impl DetectorSpec {
        fn with_ell_if(self, family: Family, ell: f64) -> Self {
            if family.requirements().ell_star {
                self.with_ell(ell)
            } else {
                self
            }
        }
    }
}
