// SPDX-License-Identifier: MIT OR Apache-2.0

//! Closed-form quantile bounds used to cross-check calibrated values.
//!
//! With `g(x) = (1+x)log(1+x) − x`, the bounds below replace `g⁻¹` by the majorant
//! `g⁻¹(x) ≤ 2x/3 + √(2x)`. Each `*_bound(v, ..)` bounds the `(1−v)`-quantile.

use serde::{Deserialize, Serialize};

use super::montecarlo::{Functional, QuantileQuery, Regime};
use crate::statistics::WindowStatKind;

/// Majorant `2x/3 + √(2x)` of `g⁻¹(x)`.
pub fn g_inv_upper(x: f64) -> f64 {
    2.0 * x / 3.0 + (2.0 * x).sqrt()
}

/// `g(x) = (1+x)log(1+x) − x`.
pub fn g(x: f64) -> f64 {
    (1.0 + x) * x.ln_1p() - x
}

/// Bound on the `(1−v)`-quantile of `T` on a window of length `ρ`:
/// `2λ₀²ρ·g⁻¹(log(3/v)/(λ₀Lρ))²`.
pub fn quad_known_bound(v: f64, lambda0: f64, rho: f64, scale: f64) -> f64 {
    let x = (3.0 / v).ln() / (lambda0 * scale * rho);
    2.0 * lambda0 * lambda0 * rho * g_inv_upper(x).powi(2)
}

/// Bound on the `(1−v)`-quantile of `|S|` on a window of length `ρ`:
/// `λ₀Lρ·g⁻¹(log(2/v)/(λ₀Lρ))`.
pub fn abs_lin_known_bound(v: f64, lambda0: f64, rho: f64, scale: f64) -> f64 {
    let mean = lambda0 * scale * rho;
    mean * g_inv_upper((2.0 / v).ln() / mean)
}

/// Bound on the `(1−v)`-quantile of `|S′|` given `N₁ = n`:
/// `(2/3)log(2/v) + √(nρ(1−ρ))·√(2log(2/v))`.
pub fn abs_lin_cond_bound(v: f64, n: usize, rho: f64) -> f64 {
    let log = (2.0 / v).ln();
    2.0 / 3.0 * log + (n as f64 * rho * (1.0 - rho)).sqrt() * (2.0 * log).sqrt()
}

/// Interval `[ξ − √(ξ/u), ξ + √(ξ/(1−u))]` containing the Poisson `u`-quantile.
pub fn poisson_sandwich(xi: f64, u: f64) -> (f64, f64) {
    (xi - (xi / u).sqrt(), xi + (xi / (1.0 - u)).sqrt())
}

/// Outcome of comparing a calibrated quantile with its closed-form bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BoundCheck {
    /// The query is covered; `slack = bound − value`.
    Covered { bound: f64, slack: f64, pass: bool },
    /// No closed-form bound applies to this query.
    NotCovered,
}

/// Compares `value`, the calibrated `u`-quantile of `query`, with the applicable bound.
pub fn bound_check(query: &QuantileQuery, value: f64) -> BoundCheck {
    let v = 1.0 - query.u;
    let Functional::WindowStat { stat, tau1, tau2, absolute } = query.functional else {
        return BoundCheck::NotCovered;
    };
    let rho = tau2 - tau1;
    let bound = match (stat, absolute, query.regime) {
        (WindowStatKind::QuadKnown { lambda0 }, false, Regime::Known { scale, .. }) => {
            quad_known_bound(v, lambda0, rho, scale)
        }
        (WindowStatKind::LinKnown { lambda0 }, true, Regime::Known { scale, .. }) => {
            abs_lin_known_bound(v, lambda0, rho, scale)
        }
        (WindowStatKind::LinCond, true, Regime::Conditional { n, .. }) => abs_lin_cond_bound(v, n, rho),
        _ => return BoundCheck::NotCovered,
    };
    let slack = bound - value;
    BoundCheck::Covered { bound, slack, pass: slack >= 0.0 }
}
