// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact Poisson and binomial laws, their quantiles and randomization weights, and exact
//! null laws of window statistics that are functions of a single count.

use crate::error::{invalid, Error, Result};

/// Tail cutoff, relative to the modal probability, below which pmf terms are dropped.
const PMF_CUTOFF: f64 = 1e-17;
/// Largest Poisson mean handled by the pmf recursion.
const MAX_POISSON_MEAN: f64 = 1e9;

/// Probabilities `P(X = k)` for `k ∈ [offset, offset + probs.len())`, normalized to sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct CountPmf {
    pub offset: usize,
    pub probs: Vec<f64>,
}

impl CountPmf {
    /// `P(X = k)`.
    pub fn prob(&self, k: usize) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        self.probs.get(k - self.offset).copied().unwrap_or(0.0)
    }

    /// Largest count with nonzero stored probability.
    pub fn max_count(&self) -> usize {
        self.offset + self.probs.len().saturating_sub(1)
    }

    /// `P(X ≤ k)`, summed from the lower end.
    pub fn cdf(&self, k: usize) -> f64 {
        if k < self.offset {
            return 0.0;
        }
        let end = (k - self.offset + 1).min(self.probs.len());
        self.probs[..end].iter().sum()
    }

    /// Smallest `k` with `P(X ≤ k) ≥ u`.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if acc >= u {
                return self.offset + i;
            }
        }
        self.max_count()
    }

    /// `E[X]`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (self.offset + i) as f64 * p).sum()
    }

    /// `E[X·1{X = k}]`-weighted sum `Σ g(k)P(X = k)`.
    pub fn expect(&self, g: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| g(self.offset + i) * p).sum()
    }
}

/// Builds a pmf from its mode outward with the ratio `p(k+1)/p(k) = ratio(k)`, truncating
/// where terms fall below the cutoff.
fn pmf_from_mode(mode: usize, max: Option<usize>, ratio: impl Fn(usize) -> f64) -> CountPmf {
    let mut up = vec![1.0];
    let mut k = mode;
    loop {
        if max.is_some_and(|m| k >= m) {
            break;
        }
        let next = up.last().copied().unwrap_or(0.0) * ratio(k);
        if next.is_nan() || next <= PMF_CUTOFF {
            break;
        }
        up.push(next);
        k += 1;
    }
    let mut down = Vec::new();
    let mut k = mode;
    let mut cur = 1.0;
    while k > 0 {
        let r = ratio(k - 1);
        let prev = if r > 0.0 { cur / r } else { 0.0 };
        if prev.is_nan() || prev <= PMF_CUTOFF || !prev.is_finite() {
            break;
        }
        down.push(prev);
        cur = prev;
        k -= 1;
    }
    let offset = mode - down.len();
    down.reverse();
    down.extend(up);
    // Sum from the smallest terms for accuracy.
    let mut sorted: Vec<f64> = down.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite pmf"));
    let total: f64 = sorted.iter().sum();
    let probs = down.into_iter().map(|p| p / total).collect();
    CountPmf { offset, probs }
}

/// Poisson pmf with mean `xi ≥ 0`, truncated where terms drop below `1e-17` of the mode.
pub fn poisson_pmf(xi: f64) -> Result<CountPmf> {
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(invalid(format!("Poisson mean must be finite and nonnegative, got {xi}")));
    }
    if xi > MAX_POISSON_MEAN {
        return Err(Error::Unsupported(format!("Poisson mean {xi} exceeds {MAX_POISSON_MEAN}")));
    }
    if xi == 0.0 {
        return Ok(CountPmf { offset: 0, probs: vec![1.0] });
    }
    let mode = xi.floor() as usize;
    Ok(pmf_from_mode(mode, None, |k| xi / (k as f64 + 1.0)))
}

/// Binomial pmf with `n` trials and success probability `p ∈ [0, 1]`.
pub fn binomial_pmf(n: usize, p: f64) -> Result<CountPmf> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("binomial probability must lie in [0, 1], got {p}")));
    }
    if n == 0 || p == 0.0 {
        return Ok(CountPmf { offset: 0, probs: vec![1.0] });
    }
    if p == 1.0 {
        return Ok(CountPmf { offset: n, probs: vec![1.0] });
    }
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
    let odds = p / (1.0 - p);
    Ok(pmf_from_mode(mode, Some(n), |k| (n - k) as f64 / (k as f64 + 1.0) * odds))
}

fn check_level(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("level must lie in (0, 1), got {u}")));
    }
    Ok(())
}

/// Smallest `k` with `P(Poisson(ξ) ≤ k) ≥ u`.
pub fn poisson_quantile(xi: f64, u: f64) -> Result<usize> {
    check_level(u)?;
    if xi.is_nan() || xi <= 0.0 {
        return Err(invalid(format!("Poisson mean must be positive, got {xi}")));
    }
    Ok(poisson_pmf(xi)?.quantile(u))
}

/// Quantile of a discrete count law together with its randomization weights.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RandomizedQuantile {
    /// Smallest `b` with `P(X ≤ b) ≥ u`.
    pub b: usize,
    /// `(u − P(X < b)) / P(X = b)`, clipped to `[0, 1]`.
    pub gamma_minus: f64,
    /// `1 − γ⁻`.
    pub gamma_plus: f64,
}

/// Quantile and randomization weights of a count law at level `u`.
pub fn randomized_quantile(pmf: &CountPmf, u: f64) -> RandomizedQuantile {
    let b = pmf.quantile(u);
    let below = if b == 0 { 0.0 } else { pmf.cdf(b - 1) };
    let atom = pmf.prob(b);
    let gamma_minus = if atom > 0.0 { ((u - below) / atom).clamp(0.0, 1.0) } else { 0.0 };
    RandomizedQuantile { b, gamma_minus, gamma_plus: 1.0 - gamma_minus }
}

/// Binomial quantile `b_{n,p}(u)` with its randomization weights.
pub fn binomial_quantile(n: usize, p: f64, u: f64) -> Result<RandomizedQuantile> {
    check_level(u)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("binomial probability must lie in (0, 1), got {p}")));
    }
    Ok(randomized_quantile(&binomial_pmf(n, p)?, u))
}

/// Poisson quantile `p_ξ(u)` with its randomization weights.
pub fn poisson_randomized_quantile(xi: f64, u: f64) -> Result<RandomizedQuantile> {
    check_level(u)?;
    Ok(randomized_quantile(&poisson_pmf(xi)?, u))
}

/// Exact law of `f(X)` for a count `X` with a known pmf.
///
/// Stores the distinct values of `f` over the support in increasing order and the suffix
/// sums `P(f(X) ≥ vⱼ)`. The upper critical value at level `u` is the smallest `vⱼ` with
/// `P(f(X) > vⱼ) ≤ u`, and for every `v`, `v > upper_critical(u)` holds exactly when
/// `p_value(v) ≤ u`.
#[derive(Clone, Debug)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    suffix: Vec<f64>,
    by_count: Vec<f64>,
}

impl DiscreteLaw {
    /// Law of `f(X)`; `f` must be the same function used on observed counts.
    pub fn new(pmf: &CountPmf, f: impl Fn(usize) -> f64) -> Self {
        let mut pairs: Vec<(f64, f64)> = pmf
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (f(pmf.offset + i), p))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite statistic"));
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            if values.last() == Some(&v) {
                *masses.last_mut().expect("nonempty") += p;
            } else {
                values.push(v);
                masses.push(p);
            }
        }
        let mut suffix = vec![0.0; values.len() + 1];
        for j in (0..values.len()).rev() {
            suffix[j] = suffix[j + 1] + masses[j];
        }
        let mut law = Self { values, suffix, by_count: Vec::new() };
        let table_len = pmf.max_count() + 1;
        law.by_count = (0..table_len).map(|c| law.p_value(f(c))).collect();
        law
    }

    /// Distinct support values in increasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P(f(X) ≥ v)`.
    pub fn p_value(&self, v: f64) -> f64 {
        let j = self.values.partition_point(|&x| x < v);
        self.suffix[j]
    }

    /// `P(f(X) ≥ f(c))`, read from a per-count table when `c` lies in the stored support.
    pub fn p_value_of_count(&self, c: usize, f: impl Fn(usize) -> f64) -> f64 {
        match self.by_count.get(c) {
            Some(&p) => p,
            None => self.p_value(f(c)),
        }
    }

    /// `P(f(X) > vⱼ)` for the support value `vⱼ`.
    fn tail_gt(&self, j: usize) -> f64 {
        self.suffix[j + 1]
    }

    /// Upper critical value: smallest support value `v` with `P(f(X) > v) ≤ u`.
    pub fn upper_critical(&self, u: f64) -> f64 {
        let j = (0..self.values.len()).find(|&j| self.tail_gt(j) <= u).unwrap_or(self.values.len() - 1);
        self.values[j]
    }

    /// Smallest support value `v` with `P(f(X) ≤ v) ≥ level`.
    pub fn quantile(&self, level: f64) -> f64 {
        let mut acc = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            acc += self.suffix[j] - self.suffix[j + 1];
            if acc >= level {
                return *v;
            }
        }
        *self.values.last().expect("nonempty law")
    }

    /// Total stored mass (1 up to truncation).
    pub fn total_mass(&self) -> f64 {
        self.suffix[0]
    }
}
