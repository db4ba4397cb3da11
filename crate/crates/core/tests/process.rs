// SPDX-License-Identifier: MIT OR Apache-2.0

use poisson_scan::process::{self, window_max_count, window_min_count};
use poisson_scan::rng::{self, Purpose};
use poisson_scan::{EventSample, PiecewiseIntensity};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

/// Brute-force window count maximum and minimum over `τ = k·step`, `k = 0..=⌊(1−ℓ)/step⌋`.
fn grid_extrema(times: &[f64], ell: f64, step: f64) -> (usize, usize) {
    let count = |a: f64, b: f64| times.iter().filter(|&&t| t > a && t <= b).count();
    let steps = ((1.0 - ell) / step + 1e-9).floor() as usize;
    let mut hi = 0;
    let mut lo = usize::MAX;
    for k in 0..=steps {
        let tau = k as f64 * step;
        let c = count(tau, tau + ell);
        hi = hi.max(c);
        lo = lo.min(c);
    }
    (lo, hi)
}

fn sample(times: Vec<f64>) -> EventSample {
    EventSample::from_unsorted(times, 100.0).unwrap()
}

#[test]
fn window_extrema_match_fine_grid() {
    // Frozen values of the 10⁵-point grid oracle.
    let s = sample(vec![0.1, 0.15, 0.5]);
    assert_eq!(grid_extrema(s.times(), 0.1, 1e-5), (0, 2));
    assert_eq!(window_max_count(&s, 0.1).unwrap().count, 2);
    assert_eq!(window_min_count(&s, 0.1).unwrap().count, 0);

    let spaced = sample((1..10).map(|k| k as f64 / 10.0).collect());
    assert_eq!(grid_extrema(spaced.times(), 0.35, 1e-5).0, 3);
    assert_eq!(window_min_count(&spaced, 0.35).unwrap().count, 3);
}

#[test]
fn bump_window_mean_count() {
    // E[N(0.2, 0.6]] = L·(λ₀+δ)·ℓ = 100·0.2·0.4 = 8.
    let intensity = PiecewiseIntensity::bump(1.0, -0.8, 0.2, 0.4).unwrap();
    let reps = 10_000;
    let total: usize = (0..reps)
        .map(|r| {
            let mut g = rng::substream(21, Purpose::Evaluation, r);
            process::simulate_with(&intensity, 100.0, &mut g).unwrap().count(0.2, 0.6).unwrap()
        })
        .sum();
    let mean = total as f64 / reps as f64;
    let se = (8.0 / reps as f64).sqrt();
    assert!((mean - 8.0).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn homogeneous_total_is_poisson() {
    let xi = 100.0;
    let reps = 10_000u64;
    let intensity = PiecewiseIntensity::homogeneous(1.0).unwrap();
    let counts: Vec<usize> = (0..reps)
        .map(|r| process::simulate_with(&intensity, xi, &mut rng::substream(4, Purpose::Evaluation, r)).unwrap().total())
        .collect();
    // Bins [0, 80), [80, 81), ..., [119, 120), [120, ∞).
    let law = Poisson::new(xi).unwrap();
    let mut edges: Vec<u64> = (80..=120).collect();
    edges.insert(0, 0);
    let mut chi2 = 0.0;
    let mut bins = 0;
    for w in 0..edges.len() {
        let (a, b) = (edges[w], edges.get(w + 1).copied().unwrap_or(u64::MAX));
        let p: f64 = if b == u64::MAX {
            1.0 - (0..a).map(|k| law.pmf(k)).sum::<f64>()
        } else {
            (a..b).map(|k| law.pmf(k)).sum()
        };
        let observed = counts.iter().filter(|&&c| (c as u64) >= a && (c as u64) < b).count() as f64;
        let expected = p * reps as f64;
        chi2 += (observed - expected).powi(2) / expected;
        bins += 1;
    }
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 {chi2} on {bins} bins, p = {p_value}");
}

#[test]
fn conditional_times_are_uniform() {
    let mut pooled: Vec<f64> = (0..1_000u64)
        .flat_map(|r| {
            let mut g = rng::substream(9, Purpose::Evaluation, r);
            process::simulate_conditional::<f64>(25, 100.0, &mut g).unwrap().times().to_vec()
        })
        .collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pooled.len() as f64;
    let d = pooled
        .iter()
        .enumerate()
        .map(|(i, &t)| (t - i as f64 / n).max((i + 1) as f64 / n - t))
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at level 10⁻³.
    assert!(d * n.sqrt() < 1.949, "KS statistic {}", d * n.sqrt());
}

fn times_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 0..60)
}

proptest! {
    #[test]
    fn count_is_additive(times in times_strategy(), mut cuts in prop::array::uniform3(0.0..=1.0f64)) {
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = sample(times);
        let [a, b, c] = cuts;
        prop_assert_eq!(s.count(a, b).unwrap() + s.count(b, c).unwrap(), s.count(a, c).unwrap());
    }

    #[test]
    fn exact_extrema_bound_grid_extrema(times in times_strategy(), ell in 0.01..=1.0f64) {
        let s = sample(times);
        let (lo, hi) = grid_extrema(s.times(), ell, 1e-3);
        prop_assert!(window_max_count(&s, ell).unwrap().count >= hi);
        prop_assert!(window_min_count(&s, ell).unwrap().count <= lo);
    }

    #[test]
    fn extrema_are_attained_at_reported_location(times in times_strategy(), ell in 0.01..=1.0f64) {
        let s = sample(times);
        let max = window_max_count(&s, ell).unwrap();
        let min = window_min_count(&s, ell).unwrap();
        // The right end of the maximizing window is an event; allow for rounding in τ + ℓ.
        prop_assert_eq!(s.count_unchecked(max.tau, max.tau + ell + 1e-12), max.count);
        prop_assert_eq!(s.count_unchecked(min.tau, (min.tau + ell).min(1.0)), min.count);
    }

    #[test]
    fn event_text_round_trips(times in times_strategy(), scale in 0.5..500.0f64) {
        let s = EventSample::from_unsorted(times, scale).unwrap();
        let back: EventSample = process::parse_events(&process::format_events(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}
