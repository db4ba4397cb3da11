// SPDX-License-Identifier: MIT OR Apache-2.0

use poisson_scan::bench::{self, estimate_power, row_detector, BenchConfig};
use poisson_scan::calibration::{CalibrationOptions, Calibrator};
use poisson_scan::detectors::Detector;
use poisson_scan::PiecewiseIntensity;

fn cal(replicates: usize) -> Calibrator {
    Calibrator::in_memory(CalibrationOptions { replicates, seed: 1, ..CalibrationOptions::default() })
}

fn config(tables: &[&str], reps: usize, seed: u64) -> BenchConfig {
    BenchConfig {
        tables: tables.iter().map(|t| t.to_string()).collect(),
        null_reps: reps,
        alt_reps: reps,
        seed,
        ..BenchConfig::desk()
    }
}

#[test]
fn tables_are_reproducible_byte_for_byte() {
    let run = || {
        let tables = bench::reproduce_tables(&config(&["size_unknown", "cp_0.95"], 100, 5), &cal(3_000), &|_| {}).unwrap();
        tables.iter().map(|t| t.to_csv().unwrap()).collect::<Vec<_>>().join("\n")
    };
    let first = run();
    assert!(first.starts_with("detector,metric,size"));
    assert_eq!(first, run());
}

#[test]
fn reported_stderr_is_binomial() {
    let tables = bench::reproduce_tables(&config(&["cp_star_0.8"], 150, 2), &cal(3_000), &|_| {}).unwrap();
    for row in &tables[0].rows {
        for cell in &row.cells {
            let p = cell.estimate.estimate;
            assert_eq!(cell.estimate.reps, 150);
            assert_eq!(cell.estimate.stderr, (p * (1.0 - p) / 150.0).sqrt());
        }
    }
}

#[test]
fn decreasing_bump_is_easier_to_detect() {
    let c = cal(20_000);
    let d = Detector::new(row_detector("TC2", 1.0, 0.05).unwrap()).unwrap();
    let power = |delta: f64| {
        let alt = PiecewiseIntensity::bump(1.0, delta, 0.5, 0.4).unwrap();
        estimate_power(&d, &c, &alt, 100.0, 400, 8).unwrap().estimate
    };
    let (down, up) = (power(-0.8), power(0.8));
    assert!(down >= up, "power {down} at δ = −0.8 vs {up} at δ = 0.8");
}
