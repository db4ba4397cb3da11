// SPDX-License-Identifier: MIT OR Apache-2.0

//! Individual levels of aggregated tests: Bonferroni corrections and min-p levels.
//!
//! A window family aggregates `|S|` or `T` (or `|S′|`, `T′` in the conditional regime) over
//! a finite set of windows. Window `w` rejects at individual level `u` when its statistic
//! exceeds the exact `(1−u)`-quantile of its null law, which happens exactly when the
//! window's p-value is at most `u`. The min-p level is the largest `u` whose estimated
//! family-wise rejection probability stays at or below `α`.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::laws::{binomial_pmf, poisson_pmf, DiscreteLaw};
use super::montecarlo::Regime;
use crate::error::{invalid, Error, Result};
use crate::rng::{keyed_substream, Purpose};
use crate::statistics::{lin_cond_from_counts, lin_known_from_counts, quad_cond_from_counts, quad_known_from_counts};

/// Relative tolerance of the min-p dichotomy.
pub const DICHOTOMY_TOLERANCE: f64 = 1e-6;
/// Iteration cap of the min-p dichotomy.
pub const DICHOTOMY_MAX_ITER: usize = 40;

/// Statistic aggregated over a window family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStat {
    /// `|S|` (known baseline) or `|S′|` (conditional).
    AbsLin,
    /// `T` (known baseline) or `T′` (conditional).
    Quad,
}

impl GridStat {
    /// Statistic value for a window count `c` of a window of length `ρ`.
    pub fn of_count(self, regime: &Regime, rho: f64, c: usize) -> f64 {
        match (self, *regime) {
            (Self::AbsLin, Regime::Known { lambda0, scale }) => lin_known_from_counts(c, rho, lambda0, scale).abs(),
            (Self::Quad, Regime::Known { lambda0, scale }) => quad_known_from_counts(c, rho, lambda0, scale),
            (Self::AbsLin, Regime::Conditional { n, .. }) => lin_cond_from_counts(c, n, rho).abs(),
            (Self::Quad, Regime::Conditional { n, scale }) => quad_cond_from_counts(c, n, rho, scale),
        }
    }
}

/// Window `(τ₁, τ₂]` of an aggregated family with its length `ρ`.
///
/// Grid families set `ρ` from integer grid indices so that windows of equal nominal
/// length share one null law; statistics are always evaluated with this `ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWindow {
    pub tau1: f64,
    pub tau2: f64,
    pub rho: f64,
}

impl GridWindow {
    /// Window with `ρ = τ₂ − τ₁`.
    pub fn new(tau1: f64, tau2: f64) -> Self {
        Self { tau1, tau2, rho: tau2 - tau1 }
    }

    /// Window `(k/m, (k+k′)/m]` with `ρ = k′/m`.
    pub fn on_grid(k: usize, kp: usize, m: usize) -> Self {
        let m = m as f64;
        Self { tau1: k as f64 / m, tau2: ((k + kp) as f64 / m).min(1.0), rho: kp as f64 / m }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau1 && self.tau1 < self.tau2 && self.tau2 <= 1.0 && self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInterval { tau1: self.tau1, tau2: self.tau2 });
        }
        Ok(())
    }
}

/// Exact null law of a family statistic on a window of length `ρ`.
pub fn window_law(stat: GridStat, regime: &Regime, rho: f64) -> Result<DiscreteLaw> {
    regime.validate()?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("window length must lie in (0, 1], got {rho}")));
    }
    let pmf = match *regime {
        Regime::Known { lambda0, scale } => poisson_pmf(lambda0 * rho * scale)?,
        Regime::Conditional { n, .. } => {
            if stat == GridStat::Quad && rho >= 1.0 {
                return Err(Error::DegenerateWindow { tau1: 0.0, tau2: 1.0, reason: "window covers [0, 1]".into() });
            }
            binomial_pmf(n, rho)?
        }
    };
    Ok(DiscreteLaw::new(&pmf, |c| stat.of_count(regime, rho, c)))
}

/// Bonferroni-corrected individual level `α/K` for a family of `K` windows.
pub fn bonferroni(alpha: f64, family_size: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if family_size == 0 {
        return Err(invalid("empty window family"));
    }
    Ok(alpha / family_size as f64)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level α must lie in (0, 1), got {alpha}")))
    }
}

/// Kind of multiple-testing correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    MinP,
}

/// Resolved individual level of an aggregated test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCorrection {
    pub correction: Correction,
    /// Individual level actually used.
    pub level: f64,
    /// Bonferroni level of the same family.
    pub bonferroni: f64,
    /// Number of individual tests in the family.
    pub family_size: usize,
    /// Human-readable description of the family grid.
    pub grid: String,
}

/// Family of windows sharing a statistic and a null regime, with exact per-length laws.
#[derive(Clone, Debug)]
pub struct FamilyLaws {
    pub stat: GridStat,
    pub regime: Regime,
    pub windows: Vec<GridWindow>,
    law_of: Vec<usize>,
    laws: Vec<Arc<DiscreteLaw>>,
}

impl FamilyLaws {
    /// Builds the laws, fetching one per distinct length through `law` (typically a cache).
    pub fn new(
        stat: GridStat,
        regime: Regime,
        windows: Vec<GridWindow>,
        mut law: impl FnMut(GridStat, &Regime, f64) -> Result<Arc<DiscreteLaw>>,
    ) -> Result<Self> {
        if windows.is_empty() {
            return Err(invalid("empty window family"));
        }
        let mut rhos: Vec<u64> = Vec::new();
        let mut laws = Vec::new();
        let mut law_of = Vec::with_capacity(windows.len());
        for w in &windows {
            w.validate()?;
            let bits = w.rho.to_bits();
            let idx = match rhos.iter().position(|&b| b == bits) {
                Some(i) => i,
                None => {
                    rhos.push(bits);
                    laws.push(law(stat, &regime, w.rho)?);
                    rhos.len() - 1
                }
            };
            law_of.push(idx);
        }
        Ok(Self { stat, regime, windows, law_of, laws })
    }

    /// Number of windows.
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Exact null law of window `w`.
    pub fn law(&self, w: usize) -> &DiscreteLaw {
        &self.laws[self.law_of[w]]
    }

    /// Statistic of window `w` for a window count.
    pub fn statistic(&self, w: usize, count: usize) -> f64 {
        self.stat.of_count(&self.regime, self.windows[w].rho, count)
    }

    /// p-value of window `w` given its count.
    pub fn p_value(&self, w: usize, count: usize) -> f64 {
        let rho = self.windows[w].rho;
        self.law(w).p_value_of_count(count, |c| self.stat.of_count(&self.regime, rho, c))
    }

    /// Stable hash of the family, used to key pools.
    pub fn key(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(format!("{:?}|{}", self.stat, self.regime.descriptor()).as_bytes());
        for w in &self.windows {
            hasher.update(w.tau1.to_le_bytes());
            hasher.update(w.tau2.to_le_bytes());
            hasher.update(w.rho.to_le_bytes());
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Ascending pool of `B` null replicates of `min_w p_w`.
    ///
    /// Counts are simulated on the segments between consecutive window endpoints:
    /// independent Poisson counts for a known baseline, a multinomial split of `n` in the
    /// conditional regime.
    pub fn minp_pool(&self, replicates: usize, seed: u64) -> Result<Vec<f64>> {
        self.pool_with(replicates, seed, |groups, prefix| self.grouped_minp(groups, prefix))
    }

    /// Both family statistics are convex in the window count and p-values decrease in the
    /// statistic, so the smallest p-value among windows sharing a law is attained at the
    /// smallest or largest count of the group.
    fn grouped_minp(&self, groups: &[(usize, Vec<(usize, usize)>)], prefix: &[usize]) -> f64 {
        groups
            .iter()
            .map(|(rep, spans)| {
                let (mut lo, mut hi) = (usize::MAX, 0);
                for &(i, j) in spans {
                    let c = prefix[j] - prefix[i];
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
                self.p_value(*rep, lo).min(self.p_value(*rep, hi))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn pool_with(
        &self,
        replicates: usize,
        seed: u64,
        minp: impl Fn(&[(usize, Vec<(usize, usize)>)], &[usize]) -> f64 + Sync,
    ) -> Result<Vec<f64>> {
        let mut points: Vec<f64> = self.windows.iter().flat_map(|w| [w.tau1, w.tau2]).chain([0.0, 1.0]).collect();
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
        points.dedup();
        let index = |x: f64| points.partition_point(|&p| p < x);
        let mut groups: Vec<(usize, Vec<(usize, usize)>)> = self.laws.iter().map(|_| (usize::MAX, Vec::new())).collect();
        for (w, win) in self.windows.iter().enumerate() {
            let g = &mut groups[self.law_of[w]];
            g.0 = g.0.min(w);
            g.1.push((index(win.tau1), index(win.tau2)));
        }
        let lengths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        let key = self.regime.stream_key() ^ self.key();
        let sampler = SegmentSampler::new(&self.regime, &points, &lengths)?;
        let mut pool = (0..replicates)
            .into_par_iter()
            .map_init(
                || (vec![0usize; lengths.len()], vec![0usize; lengths.len() + 1]),
                |(counts, prefix), r| {
                    let mut rng = keyed_substream(seed, Purpose::Calibration, key, r as u64);
                    sampler.draw(&mut rng, counts);
                    for (i, c) in counts.iter().enumerate() {
                        prefix[i + 1] = prefix[i] + c;
                    }
                    minp(&groups, prefix)
                },
            )
            .collect::<Vec<f64>>();
        pool.sort_by(|a, b| a.partial_cmp(b).expect("finite p-values"));
        Ok(pool)
    }
}

enum SegmentSampler {
    Poisson(Vec<Option<Poisson<f64>>>),
    Multinomial { n: usize, lengths: Vec<f64> },
    /// `n` uniforms dropped into segments with the given right endpoints.
    Uniforms { n: usize, ends: Vec<f64> },
}

impl SegmentSampler {
    fn new(regime: &Regime, points: &[f64], lengths: &[f64]) -> Result<Self> {
        match *regime {
            Regime::Known { lambda0, scale } => {
                let dists = lengths
                    .iter()
                    .map(|&len| {
                        let mean = lambda0 * scale * len;
                        if mean > 0.0 {
                            Poisson::new(mean).map(Some).map_err(|e| Error::Numeric(e.to_string()))
                        } else {
                            Ok(None)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Poisson(dists))
            }
            // Bucketing n uniforms costs O(n log k) against k binomial draws.
            Regime::Conditional { n, .. } if n <= 4 * lengths.len() => {
                Ok(Self::Uniforms { n, ends: points[1..].to_vec() })
            }
            Regime::Conditional { n, .. } => Ok(Self::Multinomial { n, lengths: lengths.to_vec() }),
        }
    }

    fn draw(&self, rng: &mut crate::rng::Rng, counts: &mut [usize]) {
        match self {
            Self::Poisson(dists) => {
                for (c, d) in counts.iter_mut().zip(dists) {
                    *c = d.as_ref().map_or(0, |d| d.sample(rng) as usize);
                }
            }
            Self::Uniforms { n, ends } => {
                counts.iter_mut().for_each(|c| *c = 0);
                let last = ends.len() - 1;
                for _ in 0..*n {
                    let u: f64 = rng.random();
                    // Segments are right-closed, matching the half-open windows.
                    let i = ends.partition_point(|&e| e < u).min(last);
                    counts[i] += 1;
                }
            }
            Self::Multinomial { n, lengths } => {
                let mut remaining = *n;
                let mut mass = 1.0;
                let last = lengths.len() - 1;
                for (i, (c, &len)) in counts.iter_mut().zip(lengths).enumerate() {
                    if remaining == 0 {
                        *c = 0;
                        continue;
                    }
                    if i == last || len >= mass {
                        *c = remaining;
                        remaining = 0;
                        continue;
                    }
                    let p = (len / mass).clamp(0.0, 1.0);
                    let draw = Binomial::new(remaining as u64, p).expect("valid binomial").sample(rng) as usize;
                    *c = draw;
                    remaining -= draw;
                    mass -= len;
                }
            }
        }
    }
}

/// Fraction of an ascending min-p pool at or below `u`.
pub fn empirical_fwer(sorted_minp: &[f64], u: f64) -> f64 {
    sorted_minp.partition_point(|&p| p <= u) as f64 / sorted_minp.len() as f64
}

/// Largest `u ∈ [lo, hi]` with `fwer(u) ≤ α`, by dichotomy.
///
/// `fwer` must be nondecreasing. Returns `hi` when `fwer(hi) ≤ α` and `lo` when
/// `fwer(lo) > α`; otherwise bisects until the bracket is within a relative tolerance of
/// `1e-6` or 40 iterations, and returns the lower end.
pub fn dichotomy(lo: f64, hi: f64, alpha: f64, fwer: impl Fn(f64) -> f64) -> f64 {
    if fwer(hi) <= alpha {
        return hi;
    }
    if fwer(lo) > alpha {
        return lo;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..DICHOTOMY_MAX_ITER {
        if hi - lo <= DICHOTOMY_TOLERANCE * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if fwer(mid) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Min-p level from an ascending pool: the dichotomy on `[u_Bonf, α]`.
///
/// Fails when the family rejects with estimated probability above `α` even at the
/// smallest positive level.
pub fn minp_level_from_pool(sorted_minp: &[f64], alpha: f64, bonferroni: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted_minp.is_empty() {
        return Err(invalid("empty min-p pool"));
    }
    if empirical_fwer(sorted_minp, f64::MIN_POSITIVE) > alpha {
        return Err(Error::CalibrationFailure(format!(
            "family rejects with estimated probability {} > {alpha} at every positive level",
            empirical_fwer(sorted_minp, f64::MIN_POSITIVE)
        )));
    }
    Ok(dichotomy(bonferroni.min(alpha), alpha, alpha, |u| empirical_fwer(sorted_minp, u)))
}
