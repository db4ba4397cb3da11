// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use poisson_scan::detectors::Family;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_poisson-scan"));
    cmd.env_remove("POISSON_SCAN_STORE");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate_to(path: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--L", "100", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn help_lists_every_family() {
    let top = stdout(&run(&["--help"]));
    let test = stdout(&run(&["test", "--help"]));
    for f in Family::ALL {
        assert!(top.contains(f.id()), "top-level help lacks {}", f.id());
        assert!(test.contains(f.id()), "test help lacks {}", f.id());
    }
}

#[test]
fn simulate_writes_header_and_is_deterministic() {
    let o = run(&["simulate", "--lambda0", "1", "--L", "100", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("L=100"));
    assert_eq!(text, stdout(&run(&["simulate", "--lambda0", "1", "--L", "100", "--seed", "7"])));
    assert_ne!(text, stdout(&run(&["simulate", "--lambda0", "1", "--L", "100", "--seed", "8"])));
}

#[test]
fn simulate_bump_gives_sorted_times() {
    let o = run(&["simulate", "--lambda0", "1", "--delta", "0.8", "--tau", "0.5", "--ell", "0.4", "--L", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let times: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert!(!times.is_empty());
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(times.iter().all(|t| (0.0..=1.0).contains(t)));
}

#[test]
fn simulate_rejects_invalid_parameters() {
    let o = run(&["simulate", "--lambda0", "-1", "--L", "100"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["simulate", "--lambda0", "1", "--delta", "0.5", "--L", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strong_bump_is_rejected_by_full_grid_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("bump.txt");
    simulate_to(&events, &["--lambda0", "1", "--delta", "-0.8", "--tau", "0.2", "--ell", "0.4", "--seed", "3"]);
    let o = run(&[
        "test",
        "--events",
        events.to_str().unwrap(),
        "--family",
        "phi9_10_quad_known",
        "--lambda0",
        "1",
        "--grid",
        "theta",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("decision    reject"));
}

#[test]
fn null_samples_are_mostly_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"family": "phi3_plus_known", "baseline": {"kind": "known", "lambda0": 1}, "ell_star": 0.2}"#)
        .unwrap();
    let mut accepted = 0;
    let runs = 50;
    for seed in 0..runs {
        let events = dir.path().join(format!("null{seed}.txt"));
        simulate_to(&events, &["--lambda0", "1", "--seed", &seed.to_string()]);
        let o = run(&[
            "test",
            "--events",
            events.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--store",
            store.to_str().unwrap(),
            "--B",
            "20000",
        ]);
        let code = o.status.code().unwrap();
        assert!(code == 0 || code == 1, "{}", stderr(&o));
        accepted += usize::from(code == 0);
    }
    assert!(accepted * 100 >= 94 * runs, "{accepted} of {runs} accepted");
}

#[test]
fn malformed_event_file_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("bad.txt");
    std::fs::write(&events, "L=100\n0.1\n0.2\nbanana\n").unwrap();
    let o = run(&["test", "--events", events.to_str().unwrap(), "--family", "phi3_plus_known", "--lambda0", "1", "--ell-star", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn no_calibrate_surfaces_missing_values() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("null.txt");
    simulate_to(&events, &["--lambda0", "1"]);
    let o = run(&[
        "test",
        "--events",
        events.to_str().unwrap(),
        "--family",
        "phi5_known",
        "--lambda0",
        "1",
        "--tau-star",
        "0.3",
        "--delta-star",
        "0.5",
        "--no-calibrate",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("calibration required"), "{}", stderr(&o));
}

#[test]
fn calibrate_twice_hits_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let args = [
        "calibrate",
        "--family",
        "phi3_plus_cond",
        "--ell-star",
        "0.3",
        "--L",
        "100",
        "--n",
        "90..92",
        "--B",
        "5000",
        "--store",
        store.to_str().unwrap(),
    ];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(stdout(&first).contains("computed 3 entries"), "{}", stdout(&first));
    let second = bin().args(&args[..args.len() - 2]).env("POISSON_SCAN_STORE", &store).output().unwrap();
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    assert!(stdout(&second).contains("store hit"), "{}", stdout(&second));
}

#[test]
fn test_report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("null.txt");
    let report = dir.path().join("report.json");
    simulate_to(&events, &["--lambda0", "2", "--seed", "11"]);
    let o = run(&[
        "test",
        "--events",
        events.to_str().unwrap(),
        "--family",
        "phi2_lin_known",
        "--lambda0",
        "2",
        "--tau-star",
        "0.1",
        "--ell-star",
        "0.5",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(doc["family"], "phi2_lin_known");
    let windows = doc["windows"].as_array().unwrap();
    assert_eq!(windows.len(), 2);
    assert!(windows.iter().all(|w| w["tau1"] == 0.1 && w["tau2"] == 0.6));
}

#[test]
fn bench_csv_stderr_matches_binomial_formula() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "bench",
        "--table",
        "cp_star_0.5",
        "--reps",
        "500",
        "--B",
        "5000",
        "--quiet",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(dir.path().join("cp_star_0.5.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "detector");
    assert_eq!(header.len(), 2 + 8);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for pair in records.chunks(6) {
        assert_eq!(&pair[0][1], "estimate");
        assert_eq!(&pair[1][1], "stderr");
        for (estimate, stderr) in pair[0].iter().zip(pair[1].iter()).skip(2) {
            let p: f64 = estimate.parse().unwrap();
            let se: f64 = stderr.parse().unwrap();
            assert!((se - (p * (1.0 - p) / 500.0).sqrt()).abs() < 1e-6);
            if (p - 0.5).abs() < 0.05 {
                assert!((se - 0.022).abs() < 0.001);
            }
        }
    }
}

#[test]
fn bench_rejects_unknown_table() {
    let o = run(&["bench", "--table", "nope", "--reps", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown table id"));
}
