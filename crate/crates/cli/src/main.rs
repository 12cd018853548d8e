//! `creve` command-line driver.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O or data format,
//! 5 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use creve::io::{read_estimates, write_aligned, write_estimates, write_report, DatasetSummary};
use creve::runner::{AttitudeSource, SkipCounts};
use creve::{
    evaluate, generate, load_config, load_dataset, run_estimator, save_dataset, AlignmentMode, Dataset, ErrorKind,
    Method, RunConfig, TimingStats,
};
use serde::Serialize;

const MANIFEST_FILE: &str = "manifest.json";
const ESTIMATES_FILE: &str = "estimates.csv";
const REPORT_FILE: &str = "report.json";
const ALIGNED_FILE: &str = "aligned.csv";

#[derive(Parser)]
#[command(name = "creve", version, about = "Radar ego-velocity estimation with an inertial box constraint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic radar/IMU dataset.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run an estimator over a dataset and write per-scan velocities.
    Estimate {
        /// Dataset directory.
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Creve)]
        method: MethodArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score estimates against a dataset's ground truth.
    Evaluate {
        /// Estimates CSV written by `estimate`.
        estimates: PathBuf,
        /// Dataset directory.
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = AlignmentArg::PosYaw)]
        alignment: AlignmentArg,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed (simulate) or the RANSAC seed (estimate).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Reve,
    Creve,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Reve => Method::Reve,
            MethodArg::Creve => Method::Creve,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignmentArg {
    None,
    Se3,
    PosYaw,
}

impl From<AlignmentArg> for AlignmentMode {
    fn from(a: AlignmentArg) -> Self {
        match a {
            AlignmentArg::None => AlignmentMode::None,
            AlignmentArg::Se3 => AlignmentMode::Se3,
            AlignmentArg::PosYaw => AlignmentMode::PosYaw,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    config_path: Option<&'a Path>,
    config: &'a RunConfig,
    dataset: Option<&'a Path>,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alignment: Option<AlignmentMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<TimingStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RunSummary>,
    summary: DatasetSummary,
    outputs: Vec<&'static str>,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct RunSummary {
    estimates: usize,
    skipped: SkipCounts,
    attitude_source: AttitudeSource,
    constrained: usize,
    zero_velocity: usize,
    degenerate: usize,
    bias_gyro: [f64; 3],
    initial_bias_accel: [f64; 3],
    final_bias_accel: Option<[f64; 3]>,
}

fn config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    match &common.config {
        Some(path) => Ok(load_config(path)?),
        None => Ok(RunConfig::default()),
    }
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> anyhow::Result<()> {
    Ok(write_report(manifest, dir.join(MANIFEST_FILE))?)
}

fn simulate(common: &CommonArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let mut cfg = config(common)?;
    if let Some(seed) = common.seed {
        cfg.scenario.rng_seed = seed;
    }
    let scenario = generate(&cfg.scenario)?;
    let dataset = Dataset::from_scenario(&scenario, "simulation");
    prepare_out(&common.out)?;
    save_dataset(&dataset, &common.out)?;
    let summary = dataset.summary();
    write_manifest(
        &common.out,
        &Manifest {
            command: "simulate",
            version: env!("CARGO_PKG_VERSION"),
            config_path: common.config.as_deref(),
            config: &cfg,
            dataset: Some(&common.out),
            seed: Some(cfg.scenario.rng_seed),
            method: None,
            alignment: None,
            timing: None,
            run: None,
            summary,
            outputs: vec![
                creve::io::RADAR_FILE,
                creve::io::IMU_FILE,
                creve::io::TRUTH_FILE,
                creve::io::TRUTH_VELOCITY_FILE,
                creve::io::CALIB_FILE,
            ],
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "simulated {} scans, {} IMU samples -> {}",
        summary.scans,
        summary.imu_rows,
        common.out.display()
    );
    Ok(())
}

fn estimate(dataset_dir: &Path, method: Method, common: &CommonArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let mut cfg = config(common)?;
    if let Some(seed) = common.seed {
        cfg.ransac.rng_seed = seed;
    }
    let dataset = load_dataset(dataset_dir)?;
    let output = run_estimator(&dataset, &cfg, method)?;
    let records = output.records();
    prepare_out(&common.out)?;
    write_estimates(&records, common.out.join(ESTIMATES_FILE))?;
    let timing = TimingStats::from_seconds(&output.step_seconds);
    let count = |f: fn(&creve::VelocityEstimate) -> bool| output.estimates.iter().filter(|e| f(e)).count();
    let run = RunSummary {
        estimates: records.len(),
        skipped: output.skipped,
        attitude_source: output.attitude_source,
        constrained: count(|e| e.constrained),
        zero_velocity: count(|e| e.zero_velocity),
        degenerate: count(|e| e.degenerate),
        bias_gyro: output.alignment.bias_gyro.into(),
        initial_bias_accel: output.alignment.bias_accel.into(),
        final_bias_accel: output.estimates.last().map(|e| e.bias_accel.into()),
    };
    write_manifest(
        &common.out,
        &Manifest {
            command: "estimate",
            version: env!("CARGO_PKG_VERSION"),
            config_path: common.config.as_deref(),
            config: &cfg,
            dataset: Some(dataset_dir),
            seed: Some(cfg.ransac.rng_seed),
            method: Some(method),
            alignment: None,
            timing: Some(timing),
            run: Some(run),
            summary: dataset.summary(),
            outputs: vec![ESTIMATES_FILE],
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    println!(
        "{method}: {} estimates, step mean {:.3} ms, p95 {:.3} ms -> {}",
        records.len(),
        timing.mean_ms,
        timing.p95_ms,
        common.out.display()
    );
    Ok(())
}

fn evaluate_cmd(estimates: &Path, dataset_dir: &Path, alignment: AlignmentMode, common: &CommonArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = config(common)?;
    let records = read_estimates(estimates)?;
    let dataset = load_dataset(dataset_dir)?;
    let (report, pairs) = evaluate(&records, &dataset, alignment, cfg.evaluation.max_dt)?;
    prepare_out(&common.out)?;
    write_report(&report, common.out.join(REPORT_FILE))?;
    let mut outputs = vec![REPORT_FILE];
    if !pairs.is_empty() {
        write_aligned(&pairs, common.out.join(ALIGNED_FILE))?;
        outputs.push(ALIGNED_FILE);
    }
    write_manifest(
        &common.out,
        &Manifest {
            command: "evaluate",
            version: env!("CARGO_PKG_VERSION"),
            config_path: common.config.as_deref(),
            config: &cfg,
            dataset: Some(dataset_dir),
            seed: None,
            method: None,
            alignment: Some(alignment),
            timing: None,
            run: None,
            summary: dataset.summary(),
            outputs,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    if let Some(rmse) = report.rmse_velocity_radar {
        println!("velocity RMSE (radar frame): {:.4} {:.4} {:.4} m/s", rmse[0], rmse[1], rmse[2]);
    }
    if let Some(ate) = &report.ate {
        println!("ATE ({alignment}): rmse {:.4} m, max {:.4} m", ate.rmse, ate.max);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<creve::Error>() {
            return match e.kind() {
                ErrorKind::Config => 3,
                ErrorKind::Io => 4,
                ErrorKind::Numerical => 5,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => simulate(common),
        Command::Estimate { dataset, method, common } => estimate(dataset, (*method).into(), common),
        Command::Evaluate {
            estimates,
            dataset,
            alignment,
            common,
        } => evaluate_cmd(estimates, dataset, (*alignment).into(), common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
