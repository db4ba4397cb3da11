// SPDX-License-Identifier: MIT OR Apache-2.0

//! Poisson event samples on `[0, 1]`: representation, exact simulation, exact counting,
//! window extrema and event-file input/output.
//!
//! Intervals are half-open `(τ₁, τ₂]` everywhere: an event exactly at `τ₁` is excluded
//! and an event exactly at `τ₂` is included. The same convention decides to which regime
//! an event exactly at the change location belongs during simulation.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Rng};
use crate::scalar::Scalar;

/// Sorted event times in `[0, 1]` together with the scale `L` of the measure `L·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSample<F = f64> {
    times: Vec<F>,
    scale: F,
}

impl<F: Scalar> EventSample<F> {
    /// Builds a sample from nondecreasing times in `[0, 1]`.
    pub fn new(times: Vec<F>, scale: F) -> Result<Self> {
        check_scale(scale)?;
        for (i, &t) in times.iter().enumerate() {
            if !(t >= F::zero() && t <= F::one()) {
                return Err(invalid(format!("event time {:?} at index {i} outside [0, 1]", t)));
            }
            if i > 0 && t < times[i - 1] {
                return Err(invalid(format!("event times not sorted at index {i}")));
            }
        }
        Ok(Self { times, scale })
    }

    /// Builds a sample from times in `[0, 1]` given in any order.
    pub fn from_unsorted(mut times: Vec<F>, scale: F) -> Result<Self> {
        if let Some(t) = times.iter().find(|t| !(**t >= F::zero() && **t <= F::one())) {
            return Err(invalid(format!("event time {:?} outside [0, 1]", t)));
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        Self::new(times, scale)
    }

    /// Empty sample.
    pub fn empty(scale: F) -> Result<Self> {
        Self::new(Vec::new(), scale)
    }

    /// Event times, sorted nondecreasing.
    pub fn times(&self) -> &[F] {
        &self.times
    }

    /// The scale `L`.
    pub fn scale(&self) -> F {
        self.scale
    }

    /// Total count `N₁ = N(0, 1]`.
    pub fn total(&self) -> usize {
        self.times.len()
    }

    /// Number of events `t ≤ x`.
    pub fn count_le(&self, x: F) -> usize {
        self.times.partition_point(|&t| t <= x)
    }

    /// `N(τ₁, τ₂]`, the number of events `t` with `τ₁ < t ≤ τ₂`.
    pub fn count(&self, tau1: F, tau2: F) -> Result<usize> {
        check_interval(tau1, tau2)?;
        Ok(self.count_unchecked(tau1, tau2))
    }

    /// `N(τ₁, τ₂]` without validating the interval; returns 0 when `τ₁ ≥ τ₂`.
    pub fn count_unchecked(&self, tau1: F, tau2: F) -> usize {
        if tau1 >= tau2 {
            return 0;
        }
        self.count_le(tau2) - self.count_le(tau1)
    }

    /// Converts to another scalar type.
    pub fn cast<G: Scalar>(&self) -> EventSample<G> {
        EventSample {
            times: self.times.iter().map(|t| G::of(t.f64())).collect(),
            scale: G::of(self.scale.f64()),
        }
    }

    /// Smallest gap between consecutive events, `+∞` for fewer than two events.
    pub fn min_gap(&self) -> F {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(F::infinity(), F::min)
    }
}

fn check_scale<F: Scalar>(scale: F) -> Result<()> {
    if !(scale.is_finite() && scale > F::zero()) {
        return Err(invalid(format!("scale L must be finite and positive, got {:?}", scale)));
    }
    Ok(())
}

pub(crate) fn check_interval<F: Scalar>(tau1: F, tau2: F) -> Result<()> {
    if !(tau1 >= F::zero() && tau2 <= F::one() && tau1 <= tau2) {
        return Err(Error::InvalidInterval { tau1: tau1.f64(), tau2: tau2.f64() });
    }
    Ok(())
}

/// Intensity `λ(t) = λ₀ + δ·1_{(τ, τ+ℓ]}(t)` with respect to `L·dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseIntensity<F = f64> {
    pub lambda0: F,
    pub delta: F,
    pub tau: F,
    pub ell: F,
}

impl<F: Scalar> PiecewiseIntensity<F> {
    /// Validated intensity.
    pub fn new(lambda0: F, delta: F, tau: F, ell: F) -> Result<Self> {
        let s = Self { lambda0, delta, tau, ell };
        s.validate()?;
        Ok(s)
    }

    /// Constant intensity `λ₀`.
    pub fn homogeneous(lambda0: F) -> Result<Self> {
        Self::new(lambda0, F::zero(), F::of(0.5), F::of(0.5))
    }

    /// Persistent change of height `δ` on `(τ, 1]`.
    pub fn jump(lambda0: F, delta: F, tau: F) -> Result<Self> {
        Self::new(lambda0, delta, tau, F::one() - tau)
    }

    /// Transitory change of height `δ` on `(τ, τ+ℓ]`.
    pub fn bump(lambda0: F, delta: F, tau: F, ell: F) -> Result<Self> {
        Self::new(lambda0, delta, tau, ell)
    }

    /// Checks the domain constraints.
    pub fn validate(&self) -> Result<()> {
        let Self { lambda0, delta, tau, ell } = *self;
        let finite = [lambda0, delta, tau, ell].iter().all(|v| v.is_finite());
        if !finite || lambda0 <= F::zero() {
            return Err(invalid(format!("baseline must be positive and finite, got {:?}", lambda0)));
        }
        if lambda0 + delta <= F::zero() {
            return Err(invalid(format!("λ₀ + δ must be positive, got {:?}", lambda0 + delta)));
        }
        if delta != F::zero() {
            let eps = F::of(1e-12);
            if !(tau > F::zero() && tau < F::one()) {
                return Err(invalid(format!("change location must lie in (0, 1), got {:?}", tau)));
            }
            if !(ell > F::zero() && ell <= F::one() - tau + eps) {
                return Err(invalid(format!("change length must lie in (0, 1 - τ], got {:?}", ell)));
            }
        }
        Ok(())
    }

    /// `λ(t)`.
    pub fn value(&self, t: F) -> F {
        if self.delta != F::zero() && t > self.tau && t <= self.end() {
            self.lambda0 + self.delta
        } else {
            self.lambda0
        }
    }

    /// Right end `min(τ + ℓ, 1)` of the change window.
    pub fn end(&self) -> F {
        (self.tau + self.ell).min(F::one())
    }

    /// `∫₀¹ λ(t) dt`.
    pub fn integral(&self) -> F {
        if self.delta == F::zero() {
            self.lambda0
        } else {
            self.lambda0 + self.delta * (self.end() - self.tau)
        }
    }

    /// `∫_{τ₁}^{τ₂} λ(t) dt`.
    pub fn integral_over(&self, tau1: F, tau2: F) -> F {
        let base = self.lambda0 * (tau2 - tau1);
        if self.delta == F::zero() {
            return base;
        }
        let lo = tau1.max(self.tau);
        let hi = tau2.min(self.end());
        base + self.delta * (hi - lo).max(F::zero())
    }
}

/// Regime used for the `d₂` separation summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Known constant baseline `λ₀`.
    Known,
    /// Unknown constant baseline, handled by conditioning on `N₁`.
    Unknown,
}

/// `L₂` distance from the intensity to the null set: `|δ|√ℓ` for a known baseline and
/// `|δ|√(ℓ(1−ℓ))` for an unknown one.
pub fn d2_distance<F: Scalar>(intensity: &PiecewiseIntensity<F>, kind: BaselineKind) -> F {
    if intensity.delta == F::zero() {
        return F::zero();
    }
    let ell = intensity.end() - intensity.tau;
    let factor = match kind {
        BaselineKind::Known => ell,
        BaselineKind::Unknown => ell * (F::one() - ell),
    };
    intensity.delta.abs() * factor.max(F::zero()).sqrt()
}

/// Draws a sample with the given intensity and scale, deterministic in `seed`.
pub fn simulate<F: Scalar>(
    intensity: &PiecewiseIntensity<F>,
    scale: F,
    seed: u64,
) -> Result<EventSample<F>> {
    simulate_with(intensity, scale, &mut rng::from_seed(seed))
}

/// Draws a sample using the supplied generator.
///
/// The total count is Poisson with mean `L·∫λ`; each point is then placed independently by
/// inverting the cumulative intensity.
pub fn simulate_with<F: Scalar>(
    intensity: &PiecewiseIntensity<F>,
    scale: F,
    rng: &mut Rng,
) -> Result<EventSample<F>> {
    check_scale(scale)?;
    intensity.validate()?;
    let l = scale.f64();
    let lambda0 = intensity.lambda0.f64();
    let delta = intensity.delta.f64();
    let (a, b) = if delta == 0.0 {
        (0.0, 0.0)
    } else {
        (intensity.tau.f64(), intensity.end().f64())
    };
    let m1 = lambda0 * a;
    let m2 = (lambda0 + delta) * (b - a);
    let m3 = lambda0 * (1.0 - b);
    let total_mass = m1 + m2 + m3;
    let n = draw_poisson(rng, l * total_mass)?;
    let mut times: Vec<F> = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total_mass;
            let t = if u < m1 {
                u / lambda0
            } else if u < m1 + m2 {
                a + (u - m1) / (lambda0 + delta)
            } else {
                b + (u - m1 - m2) / lambda0
            };
            F::of(t.clamp(0.0, 1.0))
        })
        .collect();
    times.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    Ok(EventSample { times, scale })
}

/// Draws `n` i.i.d. uniform event times on `[0, 1]`: the law of a homogeneous sample given
/// `N₁ = n`.
pub fn simulate_conditional<F: Scalar>(n: usize, scale: F, rng: &mut Rng) -> Result<EventSample<F>> {
    check_scale(scale)?;
    let mut times: Vec<F> = (0..n).map(|_| F::of(rng.random::<f64>())).collect();
    times.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    Ok(EventSample { times, scale })
}

/// Poisson draw with mean `mean ≥ 0`.
pub fn draw_poisson(rng: &mut Rng, mean: f64) -> Result<usize> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(invalid(format!("Poisson mean must be finite and nonnegative, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// Extremal window count and the smallest location achieving it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowExtremum<F = f64> {
    pub count: usize,
    pub tau: F,
}

fn check_length<F: Scalar>(ell: F) -> Result<()> {
    if !(ell > F::zero() && ell <= F::one()) {
        return Err(invalid(format!("window length must lie in (0, 1], got {:?}", ell)));
    }
    Ok(())
}

/// Exact `max_{τ ∈ [0, 1−ℓ]} N(τ, τ+ℓ]`.
///
/// The count is right-continuous in `τ` and only increases when the right end reaches an
/// event, so the maximum is attained at `τ = 0` or at `τ = xᵢ − ℓ` for some event `xᵢ ≥ ℓ`.
pub fn window_max_count<F: Scalar>(sample: &EventSample<F>, ell: F) -> Result<WindowExtremum<F>> {
    check_length(ell)?;
    let x = sample.times();
    let mut best = WindowExtremum { count: sample.count_unchecked(F::zero(), ell), tau: F::zero() };
    let mut lo = 0usize;
    let mut i = 0usize;
    while i < x.len() {
        // Last index of the tie group at x[i].
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        if x[i] >= ell {
            let tau = x[i] - ell;
            while lo < x.len() && x[lo] <= tau {
                lo += 1;
            }
            let c = j + 1 - lo;
            if c > best.count {
                best = WindowExtremum { count: c, tau };
            }
        }
        i = j + 1;
    }
    Ok(best)
}

/// Exact `min_{τ ∈ [0, 1−ℓ]} N(τ, τ+ℓ]`.
///
/// The count only decreases when the left end passes an event, so the minimum is attained
/// at `τ = 0` or at `τ = xᵢ` for some event `xᵢ ≤ 1 − ℓ`.
pub fn window_min_count<F: Scalar>(sample: &EventSample<F>, ell: F) -> Result<WindowExtremum<F>> {
    check_length(ell)?;
    let x = sample.times();
    let last = F::one() - ell;
    let mut best = WindowExtremum { count: sample.count_unchecked(F::zero(), ell), tau: F::zero() };
    let mut hi = 0usize;
    let mut i = 0usize;
    while i < x.len() && best.count > 0 {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        if x[i] > last {
            break;
        }
        let right = x[i] + ell;
        while hi < x.len() && x[hi] <= right {
            hi += 1;
        }
        let c = hi - (j + 1);
        if c < best.count {
            best = WindowExtremum { count: c, tau: x[i] };
        }
        i = j + 1;
    }
    let boundary = sample.count_unchecked(last, F::one());
    if boundary < best.count {
        best = WindowExtremum { count: boundary, tau: last };
    }
    Ok(best)
}

#[derive(Serialize, Deserialize)]
struct JsonEvents {
    #[serde(rename = "L")]
    scale: f64,
    times: Vec<f64>,
}

/// Parses an event document: either a `L=<value>` header followed by one time per line, or
/// the JSON form `{"L": <real>, "times": [...]}`.
pub fn parse_events<F: Scalar>(text: &str) -> Result<EventSample<F>> {
    if text.trim_start().starts_with('{') {
        let doc: JsonEvents = serde_json::from_str(text)?;
        let times = doc.times.iter().map(|&t| F::of(t)).collect();
        return EventSample::from_unsorted(times, F::of(doc.scale));
    }
    let mut scale = None;
    let mut times = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        if scale.is_none() {
            let value = line
                .strip_prefix("L=")
                .ok_or_else(|| parse_err(format!("expected header `L=<value>`, found `{line}`")))?;
            let l: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("invalid scale `{value}`")))?;
            if !(l.is_finite() && l > 0.0) {
                return Err(parse_err(format!("scale must be positive, got {l}")));
            }
            scale = Some(l);
            continue;
        }
        let t: f64 = line.parse().map_err(|_| parse_err(format!("invalid event time `{line}`")))?;
        if !(0.0..=1.0).contains(&t) {
            return Err(parse_err(format!("event time {t} outside [0, 1]")));
        }
        times.push(F::of(t));
    }
    let scale = scale.ok_or(Error::Parse { line: 1, message: "missing header `L=<value>`".into() })?;
    EventSample::from_unsorted(times, F::of(scale))
}

/// Renders the plaintext event format with 17 significant digits per time.
pub fn format_events<F: Scalar>(sample: &EventSample<F>) -> String {
    let mut out = String::with_capacity(24 * (sample.total() + 1));
    let _ = writeln!(out, "L={}", sample.scale().f64());
    for t in sample.times() {
        let _ = writeln!(out, "{:.16e}", t.f64());
    }
    out
}

/// Renders the JSON event format.
pub fn format_events_json<F: Scalar>(sample: &EventSample<F>) -> Result<String> {
    let doc = JsonEvents {
        scale: sample.scale().f64(),
        times: sample.times().iter().map(|t| t.f64()).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

/// Reads an event file in either format.
pub fn read_events<F: Scalar>(path: &Path) -> Result<EventSample<F>> {
    let file = std::fs::File::open(path)?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_events(&text)
}

/// Writes the plaintext event format.
pub fn write_events<F: Scalar>(sample: &EventSample<F>, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(format_events(sample).as_bytes())?;
    Ok(())
}
