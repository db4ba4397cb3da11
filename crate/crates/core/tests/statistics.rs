// SPDX-License-Identifier: MIT OR Apache-2.0

use poisson_scan::process::{self, window_max_count};
use poisson_scan::rng::{self, Purpose};
use poisson_scan::statistics::{
    lin_stat_cond, lin_stat_known, moments_t, moments_tprime, quad_stat_cond, quad_stat_known, shifted_stat_cond,
    shifted_stat_known, sup_shifted_over_length, sup_shifted_over_location, ShiftKind,
};
use poisson_scan::{EventSample, PiecewiseIntensity};
use proptest::prelude::*;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Asserts mean and variance of `xs` against closed forms within 4 Monte Carlo standard
/// errors; the variance error uses the sample fourth central moment.
fn assert_moments(xs: &[f64], mean: f64, variance: f64, what: &str) {
    let n = xs.len() as f64;
    let (m, v) = mean_var(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_mean = (v / n).sqrt();
    let se_var = ((m4 - v * v) / n).sqrt();
    assert!((m - mean).abs() < 4.0 * se_mean, "{what}: mean {m} vs {mean} (se {se_mean})");
    assert!((v - variance).abs() < 4.0 * se_var, "{what}: variance {v} vs {variance} (se {se_var})");
}

fn draws(intensity: &PiecewiseIntensity, scale: f64, reps: u64, seed: u64, f: impl Fn(&EventSample) -> f64) -> Vec<f64> {
    (0..reps)
        .map(|r| f(&process::simulate_with(intensity, scale, &mut rng::substream(seed, Purpose::Evaluation, r)).unwrap()))
        .collect()
}

#[test]
fn quadratic_known_moments_match_simulation() {
    let (l, lambda0) = (100.0, 1.0);
    for (delta, tau, ell, seed) in [(0.0, 0.2, 0.4, 1), (-0.8, 0.2, 0.4, 2), (0.6, 0.5, 0.3, 3)] {
        let intensity = PiecewiseIntensity::bump(lambda0, delta, tau, ell).unwrap();
        let xs = draws(&intensity, l, 100_000, seed, |s| quad_stat_known(s, tau, tau + ell, lambda0).unwrap());
        let m = moments_t((lambda0 + delta) * ell, tau, tau + ell, lambda0, l);
        assert_moments(&xs, m.mean, m.variance, &format!("T at δ = {delta}"));
    }
}

#[test]
fn quadratic_conditional_moments_match_simulation() {
    let l = 100.0;
    // (λ₀, δ, τ, ℓ) of the simulated bump and the statistic window (τ₁, τ₂].
    let cases = [
        (1.0, 0.0, 0.3, 0.2, 0.3, 0.5),
        (1.0, 0.8, 0.3, 0.2, 0.3, 0.5),
        (2.0, -0.8, 0.1, 0.5, 0.2, 0.4),
        (0.5, 1.0, 0.6, 0.3, 0.5, 0.9),
        (1.0, 0.5, 0.2, 0.4, 0.2, 0.6),
    ];
    for (i, &(lambda0, delta, tau, ell, t1, t2)) in cases.iter().enumerate() {
        let intensity = PiecewiseIntensity::bump(lambda0, delta, tau, ell).unwrap();
        let xs = draws(&intensity, l, 100_000, 10 + i as u64, |s| quad_stat_cond(s, t1, t2).unwrap());
        let y = intensity.integral_over(t1, t2);
        let out = intensity.integral() - y;
        // Only x + z enters the moments; split the outside mass arbitrarily.
        let m = moments_tprime(out / 2.0, y, out / 2.0, t1, t2, l);
        assert_moments(&xs, m.mean, m.variance, &format!("T′ case {i}"));
    }
}

#[test]
fn conditional_linear_statistic_is_centered() {
    let reps = 100_000u64;
    let xs: Vec<f64> = (0..reps)
        .map(|r| {
            let mut g = rng::substream(31, Purpose::Evaluation, r);
            let s = process::simulate_conditional::<f64>(10, 100.0, &mut g).unwrap();
            lin_stat_cond(&s, 0.25, 0.75).unwrap()
        })
        .collect();
    let (m, v) = mean_var(&xs);
    // Var = nρ(1−ρ) = 2.5.
    assert!(m.abs() < 4.0 * (v / reps as f64).sqrt(), "mean {m}");
    assert!((v - 2.5).abs() < 0.05, "variance {v}");
}

/// Maximum of `f` over `k·step`, `k = 1..⌈span/step⌉−1`, in the open interval `(0, span)`.
fn dense_max(span: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
    let steps = (span / step).ceil() as usize;
    (1..steps).map(|k| f(k as f64 * step)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn sup_over_length_matches_dense_grid() {
    // One event at τ* + 0.3, λ₀ = 1, L = 10.
    let tau_star = 0.2;
    let s = EventSample::new(vec![0.5], 10.0).unwrap();
    for delta_star in [0.5, 1.0, -1.0] {
        let kind = ShiftKind::Known { lambda0: 1.0 };
        let exact = sup_shifted_over_length(&s, tau_star, delta_star, kind).unwrap();
        let grid = dense_max(1.0 - tau_star, 1e-6, |ell| {
            shifted_stat_known(&s, tau_star, tau_star + ell, 1.0, delta_star).unwrap()
        });
        assert!(exact.value >= grid - 1e-12);
        assert!(exact.value - grid < 1e-4, "δ* = {delta_star}: exact {} grid {grid}", exact.value);
    }
    // Conditional kind, negative δ*, no events.
    let empty = EventSample::empty(10.0).unwrap();
    let exact = sup_shifted_over_length(&empty, 0.3, -0.7, ShiftKind::Conditional).unwrap();
    let grid = dense_max(0.7, 1e-6, |ell| shifted_stat_cond(&empty, 0.3, 0.3 + ell, -0.7).unwrap());
    assert!((exact.value - grid).abs() < 1e-4, "exact {} grid {grid}", exact.value);
}

#[test]
fn sup_over_location_matches_dense_grid() {
    let s = EventSample::new(vec![0.5], 10.0).unwrap();
    let exact = sup_shifted_over_location(&s, 1.0, ShiftKind::Known { lambda0: 1.0 }).unwrap();
    let grid = dense_max(1.0, 1e-6, |tau| shifted_stat_known(&s, tau, 1.0, 1.0, 1.0).unwrap());
    assert!(exact.value >= grid - 1e-12);
    assert!(exact.value - grid < 1e-4, "exact {} grid {grid}", exact.value);

    let intensity = PiecewiseIntensity::homogeneous(3.0).unwrap();
    let dense = process::simulate(&intensity, 100.0, 5).unwrap();
    for kind in [ShiftKind::Known { lambda0: 3.0 }, ShiftKind::Conditional] {
        let exact = sup_shifted_over_location(&dense, -0.5, kind).unwrap();
        let grid = dense_max(1.0, 1e-6, |tau| match kind {
            ShiftKind::Known { lambda0 } => shifted_stat_known(&dense, tau, 1.0, lambda0, -0.5).unwrap(),
            ShiftKind::Conditional => shifted_stat_cond(&dense, tau, 1.0, -0.5).unwrap(),
        });
        assert!(exact.value >= grid - 1e-9);
        assert!(exact.value - grid < 1e-3, "{kind:?}: exact {} grid {grid}", exact.value);
    }
}

fn sample_strategy() -> impl Strategy<Value = EventSample> {
    (prop::collection::vec(0.0..=1.0f64, 0..40), 1.0..200.0f64)
        .prop_map(|(t, l)| EventSample::from_unsorted(t, l).unwrap())
}

proptest! {
    #[test]
    fn scan_of_linear_statistic_matches_max_count(s in sample_strategy(), ell in 0.05..=1.0f64, lambda0 in 0.1..5.0f64) {
        let l = s.scale();
        // Candidate windows (0, ℓ] and (x − ℓ, x] for events x ≥ ℓ.
        let mut windows = vec![(0.0, ell)];
        windows.extend(s.times().iter().filter(|&&x| x >= ell).map(|&x| (x - ell, x)));
        let best = windows
            .iter()
            .map(|&(t1, t2)| lin_stat_known(&s, t1, t2, lambda0).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let max = window_max_count(&s, ell).unwrap().count as f64;
        prop_assert!((best - (max - lambda0 * ell * l)).abs() < 1e-9 * (1.0 + l));
    }

    #[test]
    fn conditional_statistics_vanish_on_unit_interval(s in sample_strategy(), delta_star in -2.0..2.0f64) {
        prop_assume!(delta_star != 0.0);
        // (0, 1] holds every event unless some sit exactly at 0.
        prop_assume!(s.count_le(0.0) == 0);
        prop_assert_eq!(lin_stat_cond(&s, 0.0, 1.0).unwrap(), 0.0);
        prop_assert_eq!(shifted_stat_cond(&s, 0.0, 1.0, delta_star).unwrap(), 0.0);
        prop_assert!(quad_stat_cond(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn exact_sups_dominate_grid_points(
        s in sample_strategy(),
        tau_star in 0.05..0.95f64,
        delta_star in prop::sample::select(vec![-1.0, -0.3, 0.4, 1.5]),
        known in any::<bool>(),
    ) {
        let kind = if known { ShiftKind::Known { lambda0: 1.0 } } else { ShiftKind::Conditional };
        let eval = |t1: f64, t2: f64| match kind {
            ShiftKind::Known { lambda0 } => shifted_stat_known(&s, t1, t2, lambda0, delta_star).unwrap(),
            ShiftKind::Conditional => shifted_stat_cond(&s, t1, t2, delta_star).unwrap(),
        };
        let by_length = sup_shifted_over_length(&s, tau_star, delta_star, kind).unwrap().value;
        let by_location = sup_shifted_over_location(&s, delta_star, kind).unwrap().value;
        for k in 1..1000 {
            let g = k as f64 / 1000.0;
            let ell = g * (1.0 - tau_star);
            prop_assert!(by_length >= eval(tau_star, tau_star + ell) - 1e-9);
            prop_assert!(by_location >= eval(g, 1.0) - 1e-9);
        }
    }
}
