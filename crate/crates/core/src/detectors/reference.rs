// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quantiles and statistics of the Laplace and Z reference tests.

use statrs::function::gamma::gamma_lr;

use crate::calibration::{Calibrator, Functional, Regime};
use crate::error::{invalid, Error, Result};
use crate::EventSample;

/// Relative tolerance of the chi-square quantile bisection.
pub const CHI_SQUARE_TOLERANCE: f64 = 1e-10;

/// `p`-quantile of the chi-square law with `dof` degrees of freedom, by bisection on the
/// regularized lower incomplete gamma function.
pub fn chi_square_quantile(dof: f64, p: f64) -> Result<f64> {
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(invalid(format!("degrees of freedom must be positive, got {dof}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile order must lie in (0, 1), got {p}")));
    }
    let cdf = |x: f64| gamma_lr(0.5 * dof, 0.5 * x);
    let mut hi = dof.max(1.0);
    while cdf(hi) < p {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numeric(format!("chi-square quantile at {p} does not bracket")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= CHI_SQUARE_TOLERANCE * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Laplace statistic: the sum of the event times.
pub fn laplace_statistic(sample: &EventSample) -> f64 {
    sample.times().iter().sum()
}

/// Z statistic `−2 Σ log Xᵢ`; fails on an event at 0.
pub fn z_statistic(sample: &EventSample) -> Result<f64> {
    sample.times().iter().try_fold(0.0, |acc, &t| {
        if t > 0.0 {
            Ok(acc - 2.0 * t.ln())
        } else {
            Err(invalid("the Z statistic is undefined for an event at time 0"))
        }
    })
}

/// Two-sided Laplace thresholds `(q_n(α/2), q_n(1−α/2))` for `n ≥ 1` events.
pub fn laplace_thresholds(cal: &Calibrator, n: usize, scale: f64, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    if n == 1 {
        return Ok((alpha / 2.0, 1.0 - alpha / 2.0));
    }
    let regime = Regime::Conditional { n, scale };
    let lo = cal.quantile(&Functional::UniformSum, &regime, alpha / 2.0)?;
    let hi = cal.quantile(&Functional::UniformSum, &regime, 1.0 - alpha / 2.0)?;
    Ok((lo, hi))
}

/// Two-sided Z thresholds: chi-square quantiles with `2n` degrees of freedom.
pub fn z_thresholds(n: usize, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let dof = 2.0 * n as f64;
    Ok((chi_square_quantile(dof, alpha / 2.0)?, chi_square_quantile(dof, 1.0 - alpha / 2.0)?))
}
