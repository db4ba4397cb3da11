// SPDX-License-Identifier: MIT OR Apache-2.0

//! `poisson-scan`: simulate event samples, calibrate critical values, run detectors and
//! reproduce the reference tables.
//!
//! Exit codes: 0 when the detector accepts (or a non-test command succeeds), 1 when it
//! rejects (or `bench --check` finds too many flagged cells), 2 on any error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use poisson_scan::bench::{self, BenchConfig, ReferenceTables, ResultTable};
use poisson_scan::calibration::{
    CalibrationOptions, Calibrator, Correction, CriticalValueStore, DEFAULT_BUDGET, DEFAULT_REPLICATES,
};
use poisson_scan::detectors::{self, Baseline, Detector, DetectorSpec, Family, GridPreset};
use poisson_scan::process::{self, BaselineKind};
use poisson_scan::{EventSample, PiecewiseIntensity};

/// Environment variable naming the critical-value store.
const STORE_ENV: &str = "POISSON_SCAN_STORE";

#[derive(Parser, Debug)]
#[command(name = "poisson-scan", version, about = "Detect a bump or jump in the intensity of a Poisson process on [0, 1]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a sample with intensity λ₀ + δ·1_(τ, τ+ℓ] and write it as an event file.
    Simulate(SimulateArgs),
    /// Populate the critical-value store for a set of detectors.
    Calibrate(CalibrateArgs),
    /// Run one detector on an event file.
    Test(TestArgs),
    /// Reproduce the reference size and power tables.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Baseline intensity λ₀.
    #[arg(long)]
    lambda0: f64,
    /// Height δ of the change; omit for a homogeneous sample.
    #[arg(long, allow_hyphen_values = true, requires = "tau")]
    delta: Option<f64>,
    /// Change location τ.
    #[arg(long)]
    tau: Option<f64>,
    /// Bump length ℓ; omit for a jump (ℓ = 1 − τ).
    #[arg(long)]
    ell: Option<f64>,
    /// Scale L of the observation measure.
    #[arg(long = "L", value_name = "L")]
    scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write JSON instead of the plaintext format.
    #[arg(long)]
    json: bool,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CorrectionArg {
    Bonferroni,
    MinP,
}

impl From<CorrectionArg> for Correction {
    fn from(c: CorrectionArg) -> Self {
        match c {
            CorrectionArg::Bonferroni => Correction::Bonferroni,
            CorrectionArg::MinP => Correction::MinP,
        }
    }
}

/// Detector given inline; the baseline is known when `--lambda0` is present.
#[derive(Args, Debug)]
struct SpecArgs {
    /// Detector family id (listed below).
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    /// Known baseline λ₀; omit for an unknown baseline.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Upper bound R on an unknown baseline.
    #[arg(long, conflicts_with = "lambda0")]
    bound: Option<f64>,
    /// Family-wise level α.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Assumed change location τ*.
    #[arg(long)]
    tau_star: Option<f64>,
    /// Assumed window length ℓ*.
    #[arg(long)]
    ell_star: Option<f64>,
    /// Assumed change size δ* of the shifted statistics.
    #[arg(long, allow_hyphen_values = true)]
    delta_star: Option<f64>,
    /// Multiple-testing correction of aggregated detectors [default: bonferroni].
    #[arg(long, value_enum)]
    correction: Option<CorrectionArg>,
    /// Window grid: default, theta_d, theta_r, theta_d_u, theta_r_u, theta, theta_1, theta_2.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<GridPreset>,
}

impl SpecArgs {
    fn spec(&self) -> anyhow::Result<Option<DetectorSpec>> {
        let Some(family) = self.family else {
            return Ok(None);
        };
        let baseline = match self.lambda0 {
            Some(lambda0) => Baseline::Known { lambda0 },
            None => Baseline::Unknown { bound: self.bound },
        };
        let mut spec = DetectorSpec::new(family, baseline).with_alpha(self.alpha);
        spec.tau_star = self.tau_star;
        spec.ell_star = self.ell_star;
        spec.delta_star = self.delta_star;
        if let Some(c) = self.correction {
            spec.correction = c.into();
        }
        if let Some(g) = self.grid {
            spec.grid = g;
        }
        spec.validate()?;
        Ok(Some(spec))
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: poisson_scan::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridPreset, String> {
    s.parse().map_err(|e: poisson_scan::Error| e.to_string())
}

/// Calibration flags shared by `calibrate` and `test`.
#[derive(Args, Debug)]
struct CalibrationArgs {
    /// Critical-value store file.
    #[arg(long, env = STORE_ENV)]
    store: Option<PathBuf>,
    /// Monte Carlo replicates B of calibration pools.
    #[arg(long = "B", value_name = "B", default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Seed of the calibration pools.
    #[arg(long, default_value_t = 1)]
    calibration_seed: u64,
    /// Fail instead of computing values missing from the store.
    #[arg(long)]
    no_calibrate: bool,
}

impl CalibrationArgs {
    fn calibrator(&self) -> anyhow::Result<Calibrator> {
        let options = CalibrationOptions {
            replicates: self.replicates,
            seed: self.calibration_seed,
            autocalibrate: !self.no_calibrate,
            budget: DEFAULT_BUDGET,
        };
        Ok(Calibrator::new(options, Arc::new(open_store(self.store.as_deref())?)))
    }
}

fn open_store(path: Option<&Path>) -> anyhow::Result<CriticalValueStore> {
    match path {
        Some(p) => CriticalValueStore::open(p).with_context(|| format!("opening store {}", p.display())),
        None => Ok(CriticalValueStore::in_memory()),
    }
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Spec documents: one JSON spec or an array of specs per file.
    #[arg(long)]
    spec: Vec<PathBuf>,
    #[command(flatten)]
    inline: SpecArgs,
    /// Scale L.
    #[arg(long = "L", value_name = "L")]
    scale: f64,
    /// Event counts to calibrate count-dependent detectors for, as a list (`80,100`) or an
    /// inclusive range (`80..120`).
    #[arg(long, value_parser = parse_counts)]
    n: Option<Counts>,
    #[command(flatten)]
    calibration: CalibrationArgs,
}

#[derive(Clone, Debug)]
struct Counts(Vec<usize>);

fn parse_counts(s: &str) -> Result<Counts, String> {
    let bad = |_| format!("invalid count list `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a > b {
            return Err(format!("empty count range `{s}`"));
        }
        return Ok(Counts((a..=b).collect()));
    }
    s.split(',').map(|p| p.trim().parse().map_err(bad)).collect::<Result<_, _>>().map(Counts)
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Event file (plaintext or JSON).
    #[arg(long)]
    events: PathBuf,
    /// Spec document; alternative to the inline flags.
    #[arg(long, conflicts_with = "family")]
    spec: Option<PathBuf>,
    #[command(flatten)]
    inline: SpecArgs,
    #[command(flatten)]
    calibration: CalibrationArgs,
    /// Write the JSON report to this path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
    /// Realize a randomized decision with this seed; without it only sure rejections exit 1.
    #[arg(long)]
    realize_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Table id; repeat for several, omit for all.
    #[arg(long)]
    table: Vec<String>,
    /// Reference scale: 5,000 null and 1,000 alternative replicates with B = 200,000.
    #[arg(long)]
    paper_scale: bool,
    /// Replicates of every table, overriding the scale.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    null_reps: Option<usize>,
    #[arg(long)]
    alt_reps: Option<usize>,
    /// Calibration replicates, overriding the scale.
    #[arg(long = "B", value_name = "B")]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    calibration_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = STORE_ENV)]
    store: Option<PathBuf>,
    /// Directory receiving one CSV per table.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write all tables as one JSON document.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Exit 1 when the flagged fraction of cells exceeds `--max-flagged`.
    #[arg(long)]
    check: bool,
    /// Tolerated fraction of flagged cells in `--check` mode.
    #[arg(long, default_value_t = 0.0)]
    max_flagged: f64,
    /// List table ids and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    quiet: bool,
}

fn family_listing() -> String {
    let mut out = String::from("Detector families:\n");
    for f in Family::ALL {
        out.push_str(&format!("  {:<22} {}\n", f.id(), f.description()));
    }
    out
}

fn command() -> clap::Command {
    let listing = family_listing();
    let mut cmd = Cli::command().after_help(listing.clone());
    for name in ["calibrate", "test"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_help(listing.clone()));
    }
    cmd
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Test(a) => test(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<u8> {
    let intensity = match (a.delta, a.tau) {
        (None, _) => PiecewiseIntensity::homogeneous(a.lambda0)?,
        (Some(delta), Some(tau)) => match a.ell {
            Some(ell) => PiecewiseIntensity::bump(a.lambda0, delta, tau, ell)?,
            None => PiecewiseIntensity::jump(a.lambda0, delta, tau)?,
        },
        (Some(_), None) => bail!("--delta requires --tau"),
    };
    let sample: EventSample = process::simulate(&intensity, a.scale, a.seed)?;
    let text = if a.json { process::format_events_json(&sample)? + "\n" } else { process::format_events(&sample) };
    match a.out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => write!(std::io::stdout(), "{text}")?,
    }
    if a.delta.is_some() {
        eprintln!(
            "{} events; d2 = {} (known), {} (unknown)",
            sample.total(),
            process::d2_distance(&intensity, BaselineKind::Known),
            process::d2_distance(&intensity, BaselineKind::Unknown)
        );
    }
    Ok(0)
}

fn read_specs(path: &Path) -> anyhow::Result<Vec<DetectorSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing spec document {}", path.display()))?;
    let docs = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    docs.into_iter()
        .map(|v| DetectorSpec::from_json(&v.to_string()).with_context(|| format!("in {}", path.display())))
        .collect()
}

fn calibrate(a: CalibrateArgs) -> anyhow::Result<u8> {
    let mut specs = Vec::new();
    for path in &a.spec {
        specs.extend(read_specs(path)?);
    }
    specs.extend(a.inline.spec()?);
    if specs.is_empty() {
        bail!("no detectors given: pass --spec or --family");
    }
    let cal = a.calibration.calibrator()?;
    let before = cal.store().len();
    for spec in specs {
        let detector = Detector::new(spec.clone())?;
        let counts = if detector.depends_on_count() {
            match &a.n {
                Some(Counts(list)) => list.clone(),
                None => bail!("family {} depends on the event count: pass --n", spec.family),
            }
        } else {
            vec![0]
        };
        let cal = match spec.calibration {
            Some(h) => cal.derive(h.replicates, h.seed),
            None => cal.derive(cal.options().replicates, cal.options().seed),
        };
        for n in counts {
            detector.prepare(&cal, a.scale, n).with_context(|| format!("calibrating {} at n = {n}", spec.family))?;
        }
        for w in cal.warnings() {
            eprintln!("warning: {w}");
        }
    }
    let added = cal.store().len() - before;
    cal.save()?;
    if added == 0 {
        writeln!(std::io::stdout(), "store hit: nothing to compute ({} entries)", cal.store().len())?;
    } else {
        writeln!(std::io::stdout(), "computed {added} entries ({} in store)", cal.store().len())?;
    }
    Ok(0)
}

fn test(a: TestArgs) -> anyhow::Result<u8> {
    let spec = match (&a.spec, a.inline.spec()?) {
        (Some(path), None) => {
            let mut specs = read_specs(path)?;
            if specs.len() != 1 {
                bail!("{} holds {} specs; `test` takes one", path.display(), specs.len());
            }
            specs.remove(0)
        }
        (None, Some(spec)) => spec,
        _ => bail!("pass either --spec or --family"),
    };
    let sample: EventSample =
        process::read_events(&a.events).with_context(|| format!("reading events {}", a.events.display()))?;
    let cal = a.calibration.calibrator()?;
    let report = detectors::run_detector(&spec, &sample, &cal)?;
    cal.save()?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &a.report {
        std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.json {
        writeln!(std::io::stdout(), "{json}")?;
    } else {
        write!(std::io::stdout(), "{}", report.render())?;
    }
    let rejected = match a.realize_seed {
        Some(seed) => detectors::realize(report.rejection_probability, seed, 0),
        None => report.rejected(),
    };
    Ok(u8::from(rejected))
}

fn run_bench(a: BenchArgs) -> anyhow::Result<u8> {
    if a.list {
        for t in &ReferenceTables::embedded().tables {
            writeln!(std::io::stdout(), "{:<18} {}", t.id, t.caption)?;
        }
        return Ok(0);
    }
    let mut config = if a.paper_scale { BenchConfig::paper_scale() } else { BenchConfig::desk() };
    config.tables = a.table.clone();
    config.seed = a.seed;
    config.alpha = a.alpha;
    if let Some(r) = a.reps {
        config.null_reps = r;
        config.alt_reps = r;
    }
    config.null_reps = a.null_reps.unwrap_or(config.null_reps);
    config.alt_reps = a.alt_reps.unwrap_or(config.alt_reps);
    let default_b = if a.paper_scale { DEFAULT_REPLICATES } else { bench::DESK_CALIBRATION_REPLICATES };
    let options = CalibrationOptions {
        replicates: a.replicates.unwrap_or(default_b),
        seed: a.calibration_seed,
        autocalibrate: true,
        budget: DEFAULT_BUDGET,
    };
    let cal = Calibrator::new(options, Arc::new(open_store(a.store.as_deref())?));
    let quiet = a.quiet;
    let progress = move |line: &str| {
        if !quiet {
            eprintln!("{line}");
        }
    };
    let tables = bench::reproduce_tables(&config, &cal, &progress)?;
    cal.save()?;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &tables {
            t.write_csv(&dir.join(format!("{}.csv", t.id)))?;
        }
    }
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&tables)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for t in &tables {
        writeln!(std::io::stdout(), "{}", t.render())?;
    }
    if a.out_dir.is_none() && a.json.is_none() && tables.len() == 1 {
        write!(std::io::stdout(), "{}", tables[0].to_csv()?)?;
    }
    let (total, flagged) = flag_totals(&tables);
    writeln!(std::io::stdout(), "{flagged} of {total} cells flagged overall")?;
    if a.check && flagged as f64 > a.max_flagged * total as f64 {
        eprintln!("check failed: {flagged} of {total} cells flagged (tolerated fraction {})", a.max_flagged);
        return Ok(1);
    }
    Ok(0)
}

fn flag_totals(tables: &[ResultTable]) -> (usize, usize) {
    tables.iter().map(ResultTable::flag_count).fold((0, 0), |(t, f), (a, b)| (t + a, f + b))
}
