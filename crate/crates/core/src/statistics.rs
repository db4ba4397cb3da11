// SPDX-License-Identifier: MIT OR Apache-2.0

//! Window statistics, exact suprema over continuous window parameters and closed-form
//! moments.
//!
//! For a window `(τ₁, τ₂]` of length `ρ = τ₂ − τ₁` with count `N = N(τ₁, τ₂]`:
//!
//! | statistic | formula |
//! |---|---|
//! | `S` | `N − λ₀ρL` |
//! | `S_δ` | `sgn(δ)(N − λ₀ρL) − |δ|ρL/2` |
//! | `T` | `(N² − N)/(L²ρ) − 2λ₀N/L + λ₀²ρ` |
//! | `S′` | `N − ρN₁` |
//! | `S′_δ` | `sgn(δ)(N − ρN₁) − |δ|Lρ(1−ρ)/2` |
//! | `T′` | `[r(A² − A) + (N² − N)/r − 2AN]/L²` with `A = N₁ − N`, `r = ρ/(1−ρ)` |
//!
//! The `*_from_counts` functions evaluate each statistic from counts; the calibration
//! module builds exact null laws from the same functions so thresholds and observed
//! values agree to the last bit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::{check_interval, EventSample};
use crate::scalar::{sgn, Scalar};

/// Window statistic with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowStatKind<F = f64> {
    /// `S = N − λ₀ρL`.
    LinKnown { lambda0: F },
    /// `S_δ* = sgn(δ*)(N − λ₀ρL) − |δ*|ρL/2`.
    ShiftedKnown { lambda0: F, delta_star: F },
    /// Quadratic statistic `T`.
    QuadKnown { lambda0: F },
    /// `S′ = N − ρN₁`.
    LinCond,
    /// `S′_δ* = sgn(δ*)(N − ρN₁) − |δ*|Lρ(1−ρ)/2`.
    ShiftedCond { delta_star: F },
    /// Conditional quadratic statistic `T′`.
    QuadCond,
}

impl<F: Scalar> WindowStatKind<F> {
    /// Checks the parameter constraints.
    pub fn validate(&self) -> Result<()> {
        let positive = |l: F| {
            if l > F::zero() && l.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("baseline must be positive, got {:?}", l)))
            }
        };
        let nonzero = |d: F| {
            if d != F::zero() && d.is_finite() {
                Ok(())
            } else {
                Err(invalid("shifted statistics require a nonzero finite δ*"))
            }
        };
        match *self {
            Self::LinKnown { lambda0 } | Self::QuadKnown { lambda0 } => positive(lambda0),
            Self::ShiftedKnown { lambda0, delta_star } => {
                positive(lambda0)?;
                nonzero(delta_star)
            }
            Self::ShiftedCond { delta_star } => nonzero(delta_star),
            Self::LinCond | Self::QuadCond => Ok(()),
        }
    }

    /// Whether the statistic is a conditional (`N₁`-based) one.
    pub fn is_conditional(&self) -> bool {
        matches!(self, Self::LinCond | Self::ShiftedCond { .. } | Self::QuadCond)
    }

    /// Evaluates the statistic from the window count, the total count and the length.
    pub fn from_counts(&self, window: usize, total: usize, rho: F, scale: F) -> F {
        match *self {
            Self::LinKnown { lambda0 } => lin_known_from_counts(window, rho, lambda0, scale),
            Self::ShiftedKnown { lambda0, delta_star } => {
                shifted_known_from_counts(window, rho, lambda0, delta_star, scale)
            }
            Self::QuadKnown { lambda0 } => quad_known_from_counts(window, rho, lambda0, scale),
            Self::LinCond => lin_cond_from_counts(window, total, rho),
            Self::ShiftedCond { delta_star } => {
                shifted_cond_from_counts(window, total, rho, delta_star, scale)
            }
            Self::QuadCond => quad_cond_from_counts(window, total, rho, scale),
        }
    }

    /// Evaluates the statistic on `(τ₁, τ₂]`.
    pub fn evaluate(&self, sample: &EventSample<F>, tau1: F, tau2: F) -> Result<F> {
        self.validate()?;
        check_interval(tau1, tau2)?;
        let rho = tau2 - tau1;
        if rho <= F::zero() {
            return Err(degenerate(tau1, tau2, "zero-length window"));
        }
        if matches!(self, Self::QuadCond) && rho >= F::one() {
            return Err(degenerate(tau1, tau2, "window covers [0, 1]"));
        }
        let window = sample.count_unchecked(tau1, tau2);
        Ok(self.from_counts(window, sample.total(), rho, sample.scale()))
    }
}

fn degenerate<F: Scalar>(tau1: F, tau2: F, reason: &str) -> Error {
    Error::DegenerateWindow { tau1: tau1.f64(), tau2: tau2.f64(), reason: reason.into() }
}

/// `N − λ₀ρL`.
pub fn lin_known_from_counts<F: Scalar>(window: usize, rho: F, lambda0: F, scale: F) -> F {
    F::of_count(window) - lambda0 * rho * scale
}

/// `sgn(δ)(N − λ₀ρL) − |δ|ρL/2`.
pub fn shifted_known_from_counts<F: Scalar>(
    window: usize,
    rho: F,
    lambda0: F,
    delta_star: F,
    scale: F,
) -> F {
    sgn(delta_star) * (F::of_count(window) - lambda0 * scale * rho)
        - delta_star.abs() * scale * rho / F::of(2.0)
}

/// `(N² − N)/(L²ρ) − 2λ₀N/L + λ₀²ρ`.
pub fn quad_known_from_counts<F: Scalar>(window: usize, rho: F, lambda0: F, scale: F) -> F {
    let n = F::of_count(window);
    (n * n - n) / (scale * scale * rho) - F::of(2.0) * lambda0 * n / scale + lambda0 * lambda0 * rho
}

/// `N − ρN₁`.
pub fn lin_cond_from_counts<F: Scalar>(window: usize, total: usize, rho: F) -> F {
    F::of_count(window) - rho * F::of_count(total)
}

/// `sgn(δ)(N − ρN₁) − |δ|Lρ(1−ρ)/2`.
pub fn shifted_cond_from_counts<F: Scalar>(
    window: usize,
    total: usize,
    rho: F,
    delta_star: F,
    scale: F,
) -> F {
    sgn(delta_star) * (F::of_count(window) - rho * F::of_count(total))
        - delta_star.abs() * scale * rho * (F::one() - rho) / F::of(2.0)
}

/// `[r(A² − A) + (N² − N)/r − 2AN]/L²` with `A = N₁ − N` and `r = ρ/(1−ρ)`; requires
/// `0 < ρ < 1`.
pub fn quad_cond_from_counts<F: Scalar>(window: usize, total: usize, rho: F, scale: F) -> F {
    let b = F::of_count(window);
    let a = F::of_count(total - window);
    let r = rho / (F::one() - rho);
    (r * (a * a - a) + (b * b - b) / r - F::of(2.0) * a * b) / (scale * scale)
}

/// `S_{τ₁,τ₂} = N(τ₁, τ₂] − λ₀(τ₂ − τ₁)L`.
pub fn lin_stat_known<F: Scalar>(sample: &EventSample<F>, tau1: F, tau2: F, lambda0: F) -> Result<F> {
    WindowStatKind::LinKnown { lambda0 }.evaluate(sample, tau1, tau2)
}

/// `S_{δ*,τ₁,τ₂}`.
pub fn shifted_stat_known<F: Scalar>(
    sample: &EventSample<F>,
    tau1: F,
    tau2: F,
    lambda0: F,
    delta_star: F,
) -> Result<F> {
    WindowStatKind::ShiftedKnown { lambda0, delta_star }.evaluate(sample, tau1, tau2)
}

/// Quadratic statistic `T_{τ₁,τ₂}`.
pub fn quad_stat_known<F: Scalar>(sample: &EventSample<F>, tau1: F, tau2: F, lambda0: F) -> Result<F> {
    WindowStatKind::QuadKnown { lambda0 }.evaluate(sample, tau1, tau2)
}

/// `S′_{τ₁,τ₂} = N(τ₁, τ₂] − (τ₂ − τ₁)N₁`.
pub fn lin_stat_cond<F: Scalar>(sample: &EventSample<F>, tau1: F, tau2: F) -> Result<F> {
    WindowStatKind::LinCond.evaluate(sample, tau1, tau2)
}

/// `S′_{δ*,τ₁,τ₂}`.
pub fn shifted_stat_cond<F: Scalar>(
    sample: &EventSample<F>,
    tau1: F,
    tau2: F,
    delta_star: F,
) -> Result<F> {
    WindowStatKind::ShiftedCond { delta_star }.evaluate(sample, tau1, tau2)
}

/// Conditional quadratic statistic `T′_{τ₁,τ₂}`; `τ₁ = 0` is accepted as long as the window
/// does not cover `[0, 1]`.
pub fn quad_stat_cond<F: Scalar>(sample: &EventSample<F>, tau1: F, tau2: F) -> Result<F> {
    WindowStatKind::QuadCond.evaluate(sample, tau1, tau2)
}

/// Regime of a shifted-statistic supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftKind<F = f64> {
    /// Known baseline `λ₀`: statistic `S_δ*`.
    Known { lambda0: F },
    /// Unknown baseline: statistic `S′_δ*`.
    Conditional,
}

/// Value of a supremum over an open parameter range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupValue<F = f64> {
    /// The supremum.
    pub value: F,
    /// Parameter at which the supremum is attained or approached.
    pub argmax: F,
    /// `false` when the supremum is a one-sided limit that no parameter attains.
    pub attained: bool,
}

fn shift_value<F: Scalar>(kind: ShiftKind<F>, count: usize, total: usize, rho: F, delta: F, l: F) -> F {
    match kind {
        ShiftKind::Known { lambda0 } => shifted_known_from_counts(count, rho, lambda0, delta, l),
        ShiftKind::Conditional => shifted_cond_from_counts(count, total, rho, delta, l),
    }
}

fn check_shift<F: Scalar>(kind: ShiftKind<F>, delta_star: F) -> Result<()> {
    if !(delta_star != F::zero() && delta_star.is_finite()) {
        return Err(invalid("shifted statistics require a nonzero finite δ*"));
    }
    if let ShiftKind::Known { lambda0 } = kind {
        if !(lambda0 > F::zero() && lambda0.is_finite()) {
            return Err(invalid(format!("baseline must be positive, got {:?}", lambda0)));
        }
    }
    Ok(())
}

struct Best<F> {
    sup: Option<SupValue<F>>,
}

impl<F: Scalar> Best<F> {
    fn offer(&mut self, value: F, argmax: F, attained: bool) {
        let better = match self.sup {
            None => true,
            Some(s) => value > s.value,
        };
        if better {
            self.sup = Some(SupValue { value, argmax, attained });
        }
    }
}

/// Exact `sup_{ℓ ∈ (0, 1−τ*)} S_{δ*,τ*,τ*+ℓ}` (or its conditional counterpart).
///
/// Between consecutive events the statistic is linear (known baseline) or convex quadratic
/// (conditional) in `ℓ`, so the supremum is reached at an event entering the window, at
/// the left limit just before it enters, or at one of the two boundary limits. Ties resolve
/// to the smallest `ℓ`.
pub fn sup_shifted_over_length<F: Scalar>(
    sample: &EventSample<F>,
    tau_star: F,
    delta_star: F,
    kind: ShiftKind<F>,
) -> Result<SupValue<F>> {
    check_shift(kind, delta_star)?;
    if !(tau_star > F::zero() && tau_star < F::one()) {
        return Err(invalid(format!("τ* must lie in (0, 1), got {:?}", tau_star)));
    }
    let l = sample.scale();
    let n = sample.total();
    let x = sample.times();
    let mut best = Best { sup: None };
    best.offer(shift_value(kind, 0, n, F::zero(), delta_star, l), F::zero(), false);
    let start = sample.count_le(tau_star);
    let mut i = start;
    while i < x.len() && x[i] < F::one() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let ell = x[i] - tau_star;
        let before = i - start;
        let after = j + 1 - start;
        best.offer(shift_value(kind, before, n, ell, delta_star, l), ell, false);
        best.offer(shift_value(kind, after, n, ell, delta_star, l), ell, true);
        i = j + 1;
    }
    let last = F::one() - tau_star;
    let inside = x.partition_point(|&t| t < F::one()) - start.min(x.len());
    best.offer(shift_value(kind, inside, n, last, delta_star, l), last, false);
    Ok(best.sup.expect("at least one candidate"))
}

/// Exact `sup_{τ ∈ (0, 1)} S_{δ*,τ,1}` (or its conditional counterpart).
///
/// Candidates are each event location (attained), the left limit just below it, and the
/// limits `τ → 0⁺` and `τ → 1⁻`. Ties resolve to the smallest `τ`.
pub fn sup_shifted_over_location<F: Scalar>(
    sample: &EventSample<F>,
    delta_star: F,
    kind: ShiftKind<F>,
) -> Result<SupValue<F>> {
    check_shift(kind, delta_star)?;
    let l = sample.scale();
    let n = sample.total();
    let x = sample.times();
    let mut best = Best { sup: None };
    let positive = n - sample.count_le(F::zero());
    best.offer(shift_value(kind, positive, n, F::one(), delta_star, l), F::zero(), false);
    let mut i = n - positive;
    while i < x.len() && x[i] < F::one() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let tau = x[i];
        let rho = F::one() - tau;
        best.offer(shift_value(kind, n - i, n, rho, delta_star, l), tau, false);
        best.offer(shift_value(kind, n - (j + 1), n, rho, delta_star, l), tau, true);
        i = j + 1;
    }
    let at_one = n - x.partition_point(|&t| t < F::one());
    best.offer(shift_value(kind, at_one, n, F::zero(), delta_star, l), F::one(), false);
    Ok(best.sup.expect("at least one candidate"))
}

/// Mean and variance of a statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments<F = f64> {
    pub mean: F,
    pub variance: F,
}

/// Mean and variance of `T_{τ₁,τ₂}` when `N(τ₁, τ₂]` is Poisson with mean `Lx`.
pub fn moments_t<F: Scalar>(x: F, tau1: F, tau2: F, lambda0: F, scale: F) -> Moments<F> {
    let rho = tau2 - tau1;
    let root = rho.sqrt();
    let mean = (x / root - lambda0 * root).powi(2);
    let variance = F::of(4.0) * x * (x / rho - lambda0).powi(2) / scale
        + F::of(2.0) * x * x / (scale * scale * rho * rho);
    Moments { mean, variance }
}

/// Mean and variance of `T′_{τ₁,τ₂}` when `N(0, τ₁]`, `N(τ₁, τ₂]` and `N(τ₂, 1]` are
/// independent Poisson with means `Lx`, `Ly` and `Lz`. Zero segment means are handled by
/// continuity.
pub fn moments_tprime<F: Scalar>(x: F, y: F, z: F, tau1: F, tau2: F, scale: F) -> Moments<F> {
    let rho = tau2 - tau1;
    let r = rho / (F::one() - rho);
    let out = x + z;
    let mean = (r.sqrt() * out - y / r.sqrt()).powi(2);
    let two = F::of(2.0);
    let variance = two / (scale * scale) * (r * out + y / r).powi(2)
        + F::of(4.0) / scale * (F::one() / r).powi(2) * (y - r * out).powi(2) * (r * r * out + y);
    Moments { mean, variance }
}
