//! Command-line front end for the two-channel MIMO passive radar simulator:
//! scenario loading, threshold calibration, false-alarm and detection curves,
//! optional SVG plots, and a self-test command running the built-in identity
//! campaigns.

mod svg;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pasrad_core::detectors::{self, DetectorKind};
use pasrad_core::montecarlo::{
    self, calibrate, curve_to_csv, fap_curve, mnr_curve, pd_curve, CurvePoint, McError,
    ThresholdTable,
};
use pasrad_core::oracle;
use pasrad_core::scenario::Scenario;
use pasrad_core::signal::DelayDopplerPlan;
use pasrad_core::{CVector, C64};

#[derive(Parser)]
#[command(
    name = "pasrad",
    version,
    about = "Two-channel distributed MIMO passive radar detection simulator"
)]
struct Cli {
    /// Cap the number of Monte-Carlo worker threads (results do not depend
    /// on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate detection thresholds from null-hypothesis trials.
    Calibrate(CalibrateArgs),
    /// Empirical false-alarm probability vs reference-channel DNR.
    FapCurve(CurveArgs),
    /// Detection probability vs surveillance-channel SNR.
    PdCurve(CurveArgs),
    /// False-alarm probability vs reference-channel multipath MNR.
    MnrCurve(CurveArgs),
    /// Run the built-in identity and oracle campaigns.
    Selftest(SelftestArgs),
    /// Write the bundled reference scenario configuration.
    EmitDefaultConfig(EmitArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Scenario JSON config; its dnr_avg_db is the calibration DNR.
    #[arg(long)]
    config: PathBuf,
    /// Desired false-alarm probability.
    #[arg(long)]
    pfa: f64,
    /// Number of null-hypothesis trials.
    #[arg(long)]
    trials: u64,
    /// Master seed (PASRAD_SEED overrides).
    #[arg(long)]
    seed: u64,
    /// Output directory for thresholds.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated detector list (default: all).
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorKind>>,
}

#[derive(Args)]
struct CurveArgs {
    /// Scenario JSON config.
    #[arg(long)]
    config: PathBuf,
    /// thresholds.json from a calibrate run.
    #[arg(long)]
    thresholds: PathBuf,
    /// Sweep "start:stop:step" in dB, inclusive endpoints.
    #[arg(long, allow_hyphen_values = true)]
    sweep: String,
    /// Trials per sweep point.
    #[arg(long)]
    trials: u64,
    /// Master seed (PASRAD_SEED overrides).
    #[arg(long)]
    seed: u64,
    /// Output directory for the CSV and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Also render a static SVG plot next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SelftestArgs {
    /// Master seed (PASRAD_SEED overrides).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cases per identity campaign.
    #[arg(long, default_value_t = 200)]
    cases: u64,
    /// Test hook: perturb one identity to exercise the failure path.
    #[arg(long, hide = true)]
    perturb: bool,
}

#[derive(Args)]
struct EmitArgs {
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Reproducibility record written next to every artifact.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_path: String,
    seed: u64,
    n_trials: u64,
    detector_list: Vec<DetectorKind>,
    output_dir: String,
    timestamp: String,
}

enum CliError {
    /// Invalid configuration, thresholds, sweep, or I/O problem: exit 2.
    Usage(String),
    /// Quantile estimability guard violation: exit 3.
    Guard(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Guard(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Guard(_) => ExitCode::from(3),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::GuardViolation { .. } => CliError::Guard(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Build the global pool once; campaign results are thread-count
        // independent either way.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match cli.command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::FapCurve(args) => cmd_curve(args, CurveKind::Fap),
        Command::PdCurve(args) => cmd_curve(args, CurveKind::Pd),
        Command::MnrCurve(args) => cmd_curve(args, CurveKind::Mnr),
        Command::Selftest(args) => return cmd_selftest(args),
        Command::EmitDefaultConfig(args) => cmd_emit_default_config(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// PASRAD_SEED overrides the --seed flag when set.
fn resolve_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("PASRAD_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("PASRAD_SEED is not a valid u64: '{raw}'"))),
        Err(_) => Ok(flag),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let scenario = Scenario::from_json_str(&raw)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    for warning in scenario
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?
    {
        eprintln!("warning: {warning}");
    }
    Ok(scenario)
}

fn load_thresholds(path: &Path) -> Result<ThresholdTable, CliError> {
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read thresholds {}: {e}", path.display())))?;
    ThresholdTable::from_json_str(&raw)
        .map_err(|e| CliError::Usage(format!("invalid thresholds {}: {e}", path.display())))
}

/// Parses "start:stop:step" in dB, inclusive endpoints.
fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("sweep must be start:stop:step in dB, got '{spec}'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !start.is_finite() || !stop.is_finite() || !step.is_finite() {
        return Err(bad());
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if step == 0.0 || (stop - start).signum() != step.signum() {
        return Err(bad());
    }
    let mut values = Vec::new();
    let mut i = 0i64;
    loop {
        let v = start + step * i as f64;
        if (step > 0.0 && v > stop + 1e-9) || (step < 0.0 && v < stop - 1e-9) {
            break;
        }
        values.push(v);
        i += 1;
    }
    Ok(values)
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_path: &Path,
    seed: u64,
    n_trials: u64,
    detector_list: Vec<DetectorKind>,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: command.to_string(),
        config_path: config_path.display().to_string(),
        seed,
        n_trials,
        detector_list,
        output_dir: out_dir.display().to_string(),
        timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let scenario = load_scenario(&args.config)?;
    let detectors = args.detectors.unwrap_or_else(|| DetectorKind::ALL.to_vec());
    let table = calibrate(&scenario, &detectors, args.pfa, args.trials, seed)?;
    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("thresholds.json"),
        table.to_json_pretty() + "\n",
    )?;
    write_manifest(
        &args.out,
        "calibrate",
        &args.config,
        seed,
        args.trials,
        detectors,
    )?;
    println!(
        "calibrated {} detector(s) at DNR_eta = {} dB, pfa = {}: {}",
        table.thresholds.len(),
        table.dnr_eta_db,
        table.pfa,
        args.out.join("thresholds.json").display()
    );
    Ok(())
}

enum CurveKind {
    Fap,
    Pd,
    Mnr,
}

impl CurveKind {
    fn name(&self) -> &'static str {
        match self {
            CurveKind::Fap => "fap-curve",
            CurveKind::Pd => "pd-curve",
            CurveKind::Mnr => "mnr-curve",
        }
    }

    fn stem(&self) -> &'static str {
        match self {
            CurveKind::Fap => "fap_curve",
            CurveKind::Pd => "pd_curve",
            CurveKind::Mnr => "mnr_curve",
        }
    }

    fn run(
        &self,
        scenario: &Scenario,
        table: &ThresholdTable,
        sweep: &[f64],
        trials: u64,
        seed: u64,
    ) -> Result<Vec<CurvePoint>, McError> {
        match self {
            CurveKind::Fap => fap_curve(scenario, table, sweep, trials, seed),
            CurveKind::Pd => pd_curve(scenario, table, sweep, trials, seed),
            CurveKind::Mnr => mnr_curve(scenario, table, sweep, trials, seed),
        }
    }
}

fn cmd_curve(args: CurveArgs, kind: CurveKind) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let scenario = load_scenario(&args.config)?;
    let table = load_thresholds(&args.thresholds)?;
    let sweep = parse_sweep(&args.sweep)?;
    let points = kind.run(&scenario, &table, &sweep, args.trials, seed)?;
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(format!("{}.csv", kind.stem()));
    fs::write(&csv_path, curve_to_csv(&points))?;
    if args.svg {
        let log_y = !matches!(kind, CurveKind::Pd);
        let title = match kind {
            CurveKind::Fap => "False-alarm probability vs DNR_avg (dB)",
            CurveKind::Pd => "Detection probability vs SNR_avg (dB)",
            CurveKind::Mnr => "False-alarm probability vs MNR_avg (dB)",
        };
        let svg_path = args.out.join(format!("{}.svg", kind.stem()));
        fs::write(&svg_path, svg::render_curve_svg(&points, title, log_y))?;
    }
    write_manifest(
        &args.out,
        kind.name(),
        &args.config,
        seed,
        args.trials,
        table.detectors(),
    )?;
    println!(
        "{}: {} sweep point(s) x {} detector(s) -> {}",
        kind.name(),
        sweep.len(),
        table.detectors().len(),
        csv_path.display()
    );
    Ok(())
}

fn cmd_emit_default_config(args: EmitArgs) -> Result<(), CliError> {
    let json = Scenario::reference_network().to_json_pretty() + "\n";
    match args.out {
        Some(path) => {
            fs::write(&path, json)?;
            println!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

struct CheckOutcome {
    name: &'static str,
    worst: f64,
    limit: f64,
}

impl CheckOutcome {
    fn passed(&self) -> bool {
        self.worst <= self.limit
    }
}

fn cmd_selftest(args: SelftestArgs) -> ExitCode {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let seed = match resolve_seed(args.seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cases = args.cases.max(1);
    let mut outcomes = Vec::new();

    // Scaling-group invariance on synthesized data.
    let mut scenario = Scenario::reference_network();
    scenario.n_samples = 256;
    let invariance = montecarlo::invariance_campaign(&scenario, cases, seed)
        .expect("invariance campaign runs on the reference network");
    outcomes.push(CheckOutcome {
        name: "scaling-group invariance",
        worst: invariance,
        limit: 1e-10,
    });

    // Durbin == Rao and usual-Wald == 0 on random datasets.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e1f);
    let mut worst_durbin = 0.0f64;
    let mut worst_wald = 0.0f64;
    for i in 0..cases {
        let aligned = oracle::random_aligned(64, 2, 3, &mut rng);
        let rd = detectors::unified_statistic(&aligned, DetectorKind::RaoDurbin).unwrap();
        let mut durbin = detectors::durbin_statistic_independent(&aligned).unwrap();
        if args.perturb && i == cases / 2 {
            durbin += 1e-6;
        }
        worst_durbin = worst_durbin.max((durbin - rd).abs() / rd.abs().max(f64::MIN_POSITIVE));
        worst_wald = worst_wald.max(detectors::wald_usual_check(&aligned).unwrap().abs());
    }
    outcomes.push(CheckOutcome {
        name: "Durbin equals Rao",
        worst: worst_durbin,
        limit: 1e-10,
    });
    outcomes.push(CheckOutcome {
        name: "usual Wald is null",
        worst: worst_wald,
        limit: 1e-8,
    });

    // Dense-oracle equivalence at L = 6.
    let mut worst_dense = 0.0f64;
    for case in 0..cases {
        let nr = 1 + (case % 3) as usize;
        let aligned = oracle::random_aligned(6, 2, nr, &mut rng);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        worst_dense = worst_dense.max(rel(
            detectors::lrt_statistic(&aligned).unwrap(),
            oracle::dense_lrt(&aligned),
        ));
        for kind in [
            DetectorKind::AltWald,
            DetectorKind::UsualGradient,
            DetectorKind::AltGradient,
            DetectorKind::RaoDurbin,
        ] {
            worst_dense = worst_dense.max(rel(
                detectors::unified_statistic(&aligned, kind).unwrap(),
                oracle::dense_unified(&aligned, kind),
            ));
        }
    }
    outcomes.push(CheckOutcome {
        name: "dense-oracle equivalence (L=6)",
        worst: worst_dense,
        limit: 1e-10,
    });

    // Operator unitarity and adjoint inversion.
    let plan = DelayDopplerPlan::new(128);
    let mut worst_unit = 0.0f64;
    let mut worst_adj = 0.0f64;
    for _ in 0..cases.clamp(10, 100) {
        let v = CVector::from_fn(128, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let delay = rng.random::<f64>() * 1e-4;
        let doppler = (rng.random::<f64>() - 0.5) * 2e4;
        let out = plan.apply(&v, delay, doppler, 10e6);
        worst_unit = worst_unit.max((out.norm() - v.norm()).abs() / v.norm());
        let round = plan.apply_adjoint(&out, delay, doppler, 10e6);
        worst_adj = worst_adj.max((&round - &v).camax());
    }
    outcomes.push(CheckOutcome {
        name: "operator unitarity",
        worst: worst_unit,
        limit: 1e-12,
    });
    outcomes.push(CheckOutcome {
        name: "adjoint inversion",
        worst: worst_adj,
        limit: 1e-10,
    });

    let mut all_pass = true;
    println!(
        "{:<34} {:>12} {:>10} {:>6}",
        "check", "worst", "limit", "status"
    );
    for o in &outcomes {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        all_pass &= o.passed();
        println!(
            "{:<34} {:>12.3e} {:>10.0e} {:>6}",
            o.name, o.worst, o.limit, status
        );
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
