// SPDX-License-Identifier: MIT OR Apache-2.0

use poisson_scan::bench::simulate_replicates;
use poisson_scan::calibration::{CalibrationOptions, Calibrator, Correction};
use poisson_scan::detectors::{Baseline, Detector, DetectorSpec, Family, GridPreset};
use poisson_scan::{EventSample, PiecewiseIntensity};
use statrs::distribution::{Binomial, Discrete, Poisson};

fn cal(replicates: usize) -> Calibrator {
    Calibrator::in_memory(CalibrationOptions { replicates, seed: 7, ..CalibrationOptions::default() })
}

/// Sample with `inside` events evenly spread in `(τ*, τ*+ℓ*]` and `outside` events in
/// `(τ*+ℓ*, 1]`, or in `(0, τ*]` when the window reaches 1.
fn sample_with(tau: f64, ell: f64, inside: usize, outside: usize, scale: f64) -> EventSample {
    let spread = |a: f64, b: f64, k: usize| (0..k).map(move |i| a + (b - a) * (i as f64 + 0.5) / k as f64);
    let end = tau + ell;
    let mut times: Vec<f64> = spread(tau, end, inside).collect();
    if end < 1.0 {
        times.extend(spread(end, 1.0, outside));
    } else {
        times.extend(spread(0.0, tau, outside));
    }
    EventSample::from_unsorted(times, scale).unwrap()
}

/// `Σₖ P(N = k)·φ(k)` and `Σₖ k·P(N = k)·φ(k)` for a window count law given by `pmf`.
fn exact_moments(pmf: impl Fn(u64) -> f64, max: u64, phi: impl Fn(usize) -> f64) -> (f64, f64) {
    (0..=max).fold((0.0, 0.0), |(s, m), k| {
        let w = pmf(k) * phi(k as usize);
        (s + w, m + k as f64 * w)
    })
}

#[test]
fn randomized_known_tests_have_exact_size() {
    let c = cal(1_000);
    for &(lambda0, tau, ell, scale) in &[(1.0, 0.3, 0.4, 100.0), (5.0, 0.5, 0.1, 50.0), (0.5, 0.05, 0.9, 30.0)] {
        let xi = lambda0 * ell * scale;
        let law = Poisson::new(xi).unwrap();
        let max = (xi + 20.0 * xi.sqrt() + 40.0) as u64;
        for family in [Family::Phi1PlusKnown, Family::Phi1MinusKnown, Family::Phi2LinKnown] {
            let spec = DetectorSpec::new(family, Baseline::Known { lambda0 }).with_tau(tau).with_ell(ell);
            let d = Detector::new(spec).unwrap();
            let phi = |k: usize| d.rejection_probability(&sample_with(tau, ell, k, 0, scale), &c).unwrap();
            let (size, moment) = exact_moments(|k| law.pmf(k), max, phi);
            assert!((size - 0.05).abs() < 1e-8, "{family} at ξ = {xi}: size {size}");
            if family == Family::Phi2LinKnown {
                assert!((moment - 0.05 * xi).abs() < 1e-8 * xi.max(1.0), "{family}: E[Nφ] = {moment}");
            }
        }
    }
}

#[test]
fn randomized_conditional_tests_have_exact_size() {
    let c = cal(1_000);
    let (tau, ell) = (0.2, 0.3);
    for n in [1u64, 5, 20, 100] {
        let law = Binomial::new(ell, n).unwrap();
        for family in [Family::Phi1PlusCond, Family::Phi1MinusCond, Family::Phi2LinCond] {
            let spec = DetectorSpec::new(family, Baseline::Unknown { bound: None }).with_tau(tau).with_ell(ell);
            let d = Detector::new(spec).unwrap();
            let phi = |k: usize| d.rejection_probability(&sample_with(tau, ell, k, n as usize - k, 100.0), &c).unwrap();
            let (size, moment) = exact_moments(|k| law.pmf(k), n, phi);
            assert!((size - 0.05).abs() < 1e-8, "{family} at n = {n}: size {size}");
            if family == Family::Phi2LinCond {
                assert!((moment - 0.05 * n as f64 * ell).abs() < 1e-8 * n as f64, "{family}: E[Nφ] = {moment}");
            }
        }
    }
}

#[test]
fn quadratic_single_window_power_grows_with_signal() {
    let c = cal(1_000);
    let (tau, ell, scale) = (0.3, 0.4, 100.0);
    let spec = DetectorSpec::new(Family::Phi2QuadKnown, Baseline::Known { lambda0: 1.0 }).with_tau(tau).with_ell(ell);
    let d = Detector::new(spec).unwrap();
    let phi: Vec<f64> =
        (0..=200).map(|k| d.rejection_probability(&sample_with(tau, ell, k, 0, scale), &c).unwrap()).collect();
    let power = |delta: f64| {
        let law = Poisson::new((1.0 + delta) * ell * scale).unwrap();
        exact_moments(|k| law.pmf(k), 200, |k| phi[k]).0
    };
    let size = power(0.0);
    assert!(size <= 0.05 + 1e-12, "size {size}");
    for sign in [-1.0, 1.0] {
        let curve: Vec<f64> = [0.2, 0.4, 0.6, 0.8].iter().map(|d| power(sign * d)).collect();
        assert!(curve.windows(2).all(|w| w[0] <= w[1]), "{curve:?}");
        assert!(curve[0] >= size);
    }
}

#[test]
fn minp_rejections_contain_bonferroni_rejections() {
    let c = cal(5_000);
    let known = Baseline::Known { lambda0: 1.0 };
    let unknown = Baseline::Unknown { bound: None };
    let specs = [
        DetectorSpec::new(Family::Phi4LinKnown, known).with_ell(0.2),
        DetectorSpec::new(Family::Phi34QuadKnown, known).with_ell(0.2),
        DetectorSpec::new(Family::Phi6QuadKnown, known).with_tau(0.3),
        DetectorSpec::new(Family::Phi8LinKnown, known).with_grid(GridPreset::ThetaR),
        DetectorSpec::new(Family::Phi910QuadKnown, known).with_grid(GridPreset::Theta2),
        DetectorSpec::new(Family::Phi8QuadCond, unknown).with_grid(GridPreset::ThetaDU),
        DetectorSpec::new(Family::Phi910LinCond, unknown).with_grid(GridPreset::Theta2),
    ];
    let mut samples = simulate_replicates(&PiecewiseIntensity::homogeneous(1.0).unwrap(), 100.0, 150, 1).unwrap();
    samples.extend(simulate_replicates(&PiecewiseIntensity::bump(1.0, 0.6, 0.4, 0.3).unwrap(), 100.0, 150, 2).unwrap());
    for spec in specs {
        let bonf = Detector::new(spec.clone()).unwrap();
        let minp = Detector::new(spec.clone().with_correction(Correction::MinP)).unwrap();
        let mut rejected = (0, 0);
        for s in &samples {
            let b = bonf.rejection_probability(s, &c).unwrap() == 1.0;
            let m = minp.rejection_probability(s, &c).unwrap() == 1.0;
            assert!(!b || m, "{}: Bonferroni rejects a sample min-p accepts", spec.family);
            rejected.0 += usize::from(b);
            rejected.1 += usize::from(m);
        }
        assert!(rejected.1 >= rejected.0);
    }
}

#[test]
fn strong_bump_is_detected_by_full_grid_quadratic() {
    let c = cal(20_000);
    let spec = DetectorSpec::new(Family::Phi910QuadKnown, Baseline::Known { lambda0: 1.0 })
        .with_grid(GridPreset::Theta)
        .with_correction(Correction::MinP);
    let d = Detector::new(spec).unwrap();
    let samples = simulate_replicates(&PiecewiseIntensity::bump(1.0, -0.8, 0.2, 0.4).unwrap(), 100.0, 100, 3).unwrap();
    let rejected = samples.iter().filter(|s| d.rejection_probability(s, &c).unwrap() == 1.0).count();
    assert!(rejected >= 97, "{rejected} of 100");
}
