// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo null distributions of scan functionals.
//!
//! Replicate `r` of a pool is drawn from the calibration substream keyed by the null regime
//! and the seed, so every functional calibrated under the same regime and seed sees the
//! same null samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::process::{simulate_conditional, simulate_with, window_max_count, window_min_count, EventSample, PiecewiseIntensity};
use crate::rng::{keyed_substream, Purpose, Rng};
use crate::statistics::{sup_shifted_over_length, sup_shifted_over_location, ShiftKind, WindowStatKind};

/// Pools smaller than this carry a warning.
pub const MIN_RECOMMENDED_REPLICATES: usize = 10_000;

/// Null regime under which a functional is calibrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// Homogeneous process with known intensity `λ₀` and scale `L`.
    Known { lambda0: f64, scale: f64 },
    /// `n` i.i.d. uniform points with scale `L` (the law given `N₁ = n`).
    Conditional { n: usize, scale: f64 },
}

impl Regime {
    pub fn scale(&self) -> f64 {
        match *self {
            Self::Known { scale, .. } | Self::Conditional { scale, .. } => scale,
        }
    }

    /// Conditioning count, if any.
    pub fn n(&self) -> Option<usize> {
        match *self {
            Self::Known { .. } => None,
            Self::Conditional { n, .. } => Some(n),
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Self::Conditional { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.scale();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("scale L must be positive and finite, got {scale}")));
        }
        if let Self::Known { lambda0, .. } = *self {
            if !(lambda0.is_finite() && lambda0 > 0.0) {
                return Err(invalid(format!("baseline must be positive, got {lambda0}")));
            }
        }
        Ok(())
    }

    /// Canonical description without the conditioning count.
    pub fn descriptor(&self) -> String {
        match *self {
            Self::Known { lambda0, scale } => format!("known(lambda0={lambda0:?},L={scale:?})"),
            Self::Conditional { scale, .. } => format!("conditional(L={scale:?})"),
        }
    }

    /// Key selecting the replicate substreams of this regime.
    pub fn stream_key(&self) -> u64 {
        let text = match self.n() {
            Some(n) => format!("{}|n={n}", self.descriptor()),
            None => self.descriptor(),
        };
        let digest = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    /// Draws a null sample.
    pub fn simulate(&self, rng: &mut Rng) -> Result<EventSample<f64>> {
        match *self {
            Self::Known { lambda0, scale } => {
                simulate_with(&PiecewiseIntensity::homogeneous(lambda0)?, scale, rng)
            }
            Self::Conditional { n, scale } => simulate_conditional(n, scale, rng),
        }
    }

    /// Generator for replicate `r` of a pool with the given seed.
    pub fn replicate_rng(&self, seed: u64, r: usize) -> Rng {
        keyed_substream(seed, Purpose::Calibration, self.stream_key(), r as u64)
    }
}

/// Scalar functional of a sample whose null law is calibrated by simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    /// A window statistic on `(τ₁, τ₂]`, optionally in absolute value.
    WindowStat { stat: WindowStatKind, tau1: f64, tau2: f64, absolute: bool },
    /// `max_{τ ∈ [0, 1−ℓ]} N(τ, τ+ℓ]`.
    MaxCount { ell: f64 },
    /// `min_{τ ∈ [0, 1−ℓ]} N(τ, τ+ℓ]`.
    MinCount { ell: f64 },
    /// `sup_ℓ` of the shifted statistic on `(τ*, τ*+ℓ]`.
    SupOverLength { tau_star: f64, delta_star: f64 },
    /// `sup_τ` of the shifted statistic on `(τ, 1]`.
    SupOverLocation { delta_star: f64 },
    /// Sum of the event times.
    UniformSum,
}

impl Functional {
    /// Short name used as the store family.
    pub fn name(&self) -> &'static str {
        match self {
            Self::WindowStat { .. } => "window_stat",
            Self::MaxCount { .. } => "max_count",
            Self::MinCount { .. } => "min_count",
            Self::SupOverLength { .. } => "sup_over_length",
            Self::SupOverLocation { .. } => "sup_over_location",
            Self::UniformSum => "uniform_sum",
        }
    }

    /// Canonical encoding of the functional's parameters.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("functionals serialize")
    }

    /// Checks the parameters against the regime.
    pub fn validate(&self, regime: &Regime) -> Result<()> {
        regime.validate()?;
        let length = |ell: f64| {
            if ell > 0.0 && ell <= 1.0 {
                Ok(())
            } else {
                Err(invalid(format!("window length must lie in (0, 1], got {ell}")))
            }
        };
        match *self {
            Self::WindowStat { stat, tau1, tau2, .. } => {
                stat.validate()?;
                if stat.is_conditional() != regime.is_conditional() {
                    return Err(Error::Spec(format!(
                        "statistic {stat:?} does not match regime {}",
                        regime.descriptor()
                    )));
                }
                if !(0.0 <= tau1 && tau1 < tau2 && tau2 <= 1.0) {
                    return Err(Error::InvalidInterval { tau1, tau2 });
                }
                Ok(())
            }
            Self::MaxCount { ell } | Self::MinCount { ell } => length(ell),
            Self::SupOverLength { tau_star, delta_star } => {
                if !(tau_star > 0.0 && tau_star < 1.0) {
                    return Err(invalid(format!("τ* must lie in (0, 1), got {tau_star}")));
                }
                nonzero(delta_star)
            }
            Self::SupOverLocation { delta_star } => nonzero(delta_star),
            Self::UniformSum => Ok(()),
        }
    }

    /// Evaluates the functional on a sample.
    pub fn evaluate(&self, sample: &EventSample<f64>, regime: &Regime) -> Result<f64> {
        let shift = match *regime {
            Regime::Known { lambda0, .. } => ShiftKind::Known { lambda0 },
            Regime::Conditional { .. } => ShiftKind::Conditional,
        };
        Ok(match *self {
            Self::WindowStat { stat, tau1, tau2, absolute } => {
                let v = stat.evaluate(sample, tau1, tau2)?;
                if absolute {
                    v.abs()
                } else {
                    v
                }
            }
            Self::MaxCount { ell } => window_max_count(sample, ell)?.count as f64,
            Self::MinCount { ell } => window_min_count(sample, ell)?.count as f64,
            Self::SupOverLength { tau_star, delta_star } => {
                sup_shifted_over_length(sample, tau_star, delta_star, shift)?.value
            }
            Self::SupOverLocation { delta_star } => sup_shifted_over_location(sample, delta_star, shift)?.value,
            Self::UniformSum => sample.times().iter().sum(),
        })
    }
}

fn nonzero(delta: f64) -> Result<()> {
    if delta != 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid("shifted statistics require a nonzero finite δ*"))
    }
}

/// Monte Carlo quantile request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileQuery {
    pub functional: Functional,
    pub regime: Regime,
    /// Quantile order in `(0, 1)`.
    pub u: f64,
    /// Number of replicates `B`.
    pub replicates: usize,
    pub seed: u64,
}

impl QuantileQuery {
    pub fn validate(&self) -> Result<()> {
        self.functional.validate(&self.regime)?;
        if !(self.u > 0.0 && self.u < 1.0) {
            return Err(invalid(format!("quantile order must lie in (0, 1), got {}", self.u)));
        }
        if self.replicates == 0 {
            return Err(invalid("replicate count must be positive"));
        }
        Ok(())
    }
}

/// Monte Carlo quantile with an optional warning about the pool size.
#[derive(Clone, Debug, PartialEq)]
pub struct McQuantile {
    pub value: f64,
    pub warning: Option<String>,
}

/// Warning attached to pools below the recommended size.
pub fn pool_warning(replicates: usize) -> Option<String> {
    (replicates < MIN_RECOMMENDED_REPLICATES).then(|| {
        format!("{replicates} replicates is below the recommended {MIN_RECOMMENDED_REPLICATES}")
    })
}

/// Rank `⌈uB⌉` (1-based, clamped to `[1, B]`).
pub fn quantile_rank(u: f64, replicates: usize) -> usize {
    let raw = u * replicates as f64;
    // Absorb rounding in the product so that uB = k exactly selects rank k.
    let rank = (raw - raw.abs() * 1e-12).ceil();
    (rank.max(1.0) as usize).min(replicates)
}

/// Order statistic of rank `⌈uB⌉` of an ascending pool.
pub fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    sorted[quantile_rank(u, sorted.len()) - 1]
}

/// Checks the conditional simulation budget `n·B`.
pub fn check_budget(regime: &Regime, replicates: usize, budget: u64) -> Result<()> {
    if let Some(n) = regime.n() {
        let cost = (n as u128) * (replicates as u128);
        if cost > budget as u128 {
            return Err(Error::BudgetExceeded(format!(
                "conditional pool with n = {n} and B = {replicates} needs {cost} draws, budget is {budget}"
            )));
        }
    }
    Ok(())
}

/// Ascending pool of `B` null values of a functional.
pub fn simulate_pool(functional: &Functional, regime: &Regime, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    functional.validate(regime)?;
    let mut pool = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = regime.replicate_rng(seed, r);
            let sample = regime.simulate(&mut rng)?;
            functional.evaluate(&sample, regime)
        })
        .collect::<Result<Vec<f64>>>()?;
    pool.sort_by(|a, b| a.partial_cmp(b).expect("finite functional values"));
    Ok(pool)
}

/// `(min, max)` window counts of length `ℓ` per replicate, on the same replicates as
/// [`simulate_pool`].
pub fn simulate_extremes_pool(ell: f64, regime: &Regime, replicates: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    Functional::MaxCount { ell }.validate(regime)?;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = regime.replicate_rng(seed, r);
            let sample = regime.simulate(&mut rng)?;
            Ok((window_min_count(&sample, ell)?.count, window_max_count(&sample, ell)?.count))
        })
        .collect()
}

/// Uncached Monte Carlo quantile.
pub fn mc_quantile(query: &QuantileQuery) -> Result<McQuantile> {
    query.validate()?;
    let pool = simulate_pool(&query.functional, &query.regime, query.replicates, query.seed)?;
    Ok(McQuantile { value: empirical_quantile(&pool, query.u), warning: pool_warning(query.replicates) })
}
