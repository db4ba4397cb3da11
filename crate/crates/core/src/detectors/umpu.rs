// SPDX-License-Identifier: MIT OR Apache-2.0

//! Randomized single-window count tests and the UMPU level split.

use serde::{Deserialize, Serialize};

use crate::calibration::laws::{binomial_pmf, poisson_pmf, randomized_quantile, CountPmf, RandomizedQuantile};
use crate::calibration::levels::check_alpha;
use crate::error::{invalid, Error, Result};

/// Tolerance on the unbiasedness residual `E[Nφ] − αE[N]`.
pub const UMPU_TOLERANCE: f64 = 1e-10;

/// Null law of the window count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum CountRegime {
    /// `Poisson(λ₀ℓ*L)`.
    Known { lambda0: f64, ell_star: f64, scale: f64 },
    /// `Bin(n, ℓ*)`.
    Conditional { n: usize, ell_star: f64 },
}

impl CountRegime {
    /// Count pmf.
    pub fn pmf(&self) -> Result<CountPmf> {
        match *self {
            Self::Known { lambda0, ell_star, scale } => poisson_pmf(lambda0 * ell_star * scale),
            Self::Conditional { n, ell_star } => {
                if !(ell_star > 0.0 && ell_star <= 1.0) {
                    return Err(invalid(format!("ℓ* must lie in (0, 1], got {ell_star}")));
                }
                binomial_pmf(n, ell_star)
            }
        }
    }
}

/// Rejection probability of the lower test `1{N < b} + γ⁻1{N = b}` with `b` the quantile at `u`.
pub fn lower_phi(q: &RandomizedQuantile, count: usize) -> f64 {
    if count < q.b {
        1.0
    } else if count == q.b {
        q.gamma_minus
    } else {
        0.0
    }
}

/// Rejection probability of the upper test `1{N > b} + γ⁺1{N = b}` with `b` the quantile at `1 − u`.
pub fn upper_phi(q: &RandomizedQuantile, count: usize) -> f64 {
    if count > q.b {
        1.0
    } else if count == q.b {
        q.gamma_plus
    } else {
        0.0
    }
}

/// Two-sided randomized test with upper level `α₁` and lower level `α₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmpuSplit {
    /// Level of the upper tail.
    pub alpha1: f64,
    /// Level of the lower tail.
    pub alpha2: f64,
    /// Quantile at `1 − α₁` and its weights.
    pub upper: RandomizedQuantile,
    /// Quantile at `α₂` and its weights.
    pub lower: RandomizedQuantile,
}

impl UmpuSplit {
    fn at(pmf: &CountPmf, alpha: f64, alpha1: f64) -> Self {
        let alpha2 = alpha - alpha1;
        Self {
            alpha1,
            alpha2,
            upper: randomized_quantile(pmf, 1.0 - alpha1),
            lower: randomized_quantile(pmf, alpha2),
        }
    }

    /// Rejection probability for an observed count.
    pub fn phi(&self, count: usize) -> f64 {
        (upper_phi(&self.upper, count) + lower_phi(&self.lower, count)).min(1.0)
    }
}

/// `E[φ]` and `E[Nφ]` under a pmf.
pub fn size_and_moment(pmf: &CountPmf, phi: impl Fn(usize) -> f64) -> (f64, f64) {
    let size = pmf.expect(&phi);
    let moment = pmf.expect(|k| k as f64 * phi(k));
    (size, moment)
}

/// Solves `α₁ + α₂ = α` and `E[Nφ] = αE[N]` by bisection on `α₁ ∈ (0, α)`.
pub fn umpu_split(regime: &CountRegime, alpha: f64) -> Result<UmpuSplit> {
    umpu_split_pmf(&regime.pmf()?, alpha)
}

/// [`umpu_split`] for an explicit count pmf.
pub fn umpu_split_pmf(pmf: &CountPmf, alpha: f64) -> Result<UmpuSplit> {
    check_alpha(alpha)?;
    let mean = pmf.mean();
    let residual = |a1: f64| {
        let split = UmpuSplit::at(pmf, alpha, a1);
        pmf.expect(|k| k as f64 * split.phi(k)) - alpha * mean
    };
    if pmf.probs.len() == 1 || mean == 0.0 {
        return Ok(UmpuSplit::at(pmf, alpha, alpha / 2.0));
    }
    let (mut lo, mut hi) = (0.0, alpha);
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo > UMPU_TOLERANCE || r_hi < -UMPU_TOLERANCE {
        return Err(Error::Numeric(format!(
            "unbiasedness residual does not change sign on (0, α): {r_lo} and {r_hi}"
        )));
    }
    let mut mid = 0.5 * alpha;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() <= UMPU_TOLERANCE || hi - lo <= f64::EPSILON * alpha {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(UmpuSplit::at(pmf, alpha, mid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sums_to_alpha_and_is_unbiased() {
        for regime in [
            CountRegime::Known { lambda0: 1.0, ell_star: 0.4, scale: 100.0 },
            CountRegime::Known { lambda0: 5.0, ell_star: 0.1, scale: 50.0 },
            CountRegime::Conditional { n: 20, ell_star: 0.3 },
        ] {
            let pmf = regime.pmf().unwrap();
            let split = umpu_split(&regime, 0.05).unwrap();
            assert!((split.alpha1 + split.alpha2 - 0.05).abs() < 1e-12);
            let (size, moment) = size_and_moment(&pmf, |k| split.phi(k));
            assert!((size - 0.05).abs() < 1e-8, "{regime:?}: size {size}");
            assert!((moment - 0.05 * pmf.mean()).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_conditional_sample_splits_evenly() {
        let split = umpu_split(&CountRegime::Conditional { n: 0, ell_star: 0.4 }, 0.05).unwrap();
        assert_eq!(split.alpha1, 0.025);
        assert!((split.phi(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn one_sided_tests_have_exact_size() {
        let pmf = poisson_pmf(40.0).unwrap();
        let up = randomized_quantile(&pmf, 0.95);
        let down = randomized_quantile(&pmf, 0.05);
        assert!((pmf.expect(|k| upper_phi(&up, k)) - 0.05).abs() < 1e-10);
        assert!((pmf.expect(|k| lower_phi(&down, k)) - 0.05).abs() < 1e-10);
    }
}
