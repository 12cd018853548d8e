//! Drives the estimator over a whole dataset and evaluates the result.

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimator::{coarse_align, step, Alignment, Method, PipelineState, VelocityEstimate};
use crate::frames::{interpolate_attitude, interpolate_position, ImuSample, Rotation, Stamped, Vec3};
use crate::io::{Dataset, EstimateRecord};
use crate::metrics::{ate_with_pairs, integrate_positions, rmse_per_axis, AlignedPair, AlignmentMode, AteReport, Trajectory};

/// Wall clock for step timing. The browser target has no monotonic clock
/// in std, so timings read as zero there.
#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let started = std::time::Instant::now();
    let out = f();
    (out, started.elapsed().as_secs_f64())
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

/// Where per-scan attitude comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeSource {
    /// Interpolated from `ground_truth.csv`.
    GroundTruth,
    /// Gyro integration from the coarse-alignment attitude.
    Gyro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SkipCounts {
    /// Scans at or before the first IMU sample.
    pub before_start: usize,
    /// Scans with no IMU sample within 1.5 IMU periods.
    pub no_imu: usize,
    /// Scans outside the attitude reference.
    pub no_attitude: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub estimates: Vec<VelocityEstimate>,
    /// Wall-clock duration of each `step` call, seconds.
    pub step_seconds: Vec<f64>,
    pub skipped: SkipCounts,
    pub alignment: Alignment,
    pub attitude_source: AttitudeSource,
}

impl RunOutput {
    pub fn records(&self) -> Vec<EstimateRecord> {
        self.estimates.iter().map(EstimateRecord::from).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    pub fn from_seconds(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self {
                count: 0,
                mean_ms: 0.0,
                p95_ms: 0.0,
                max_ms: 0.0,
            };
        }
        let mut ms: Vec<f64> = samples.iter().map(|s| s * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        // nearest-rank percentile
        let rank = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len());
        Self {
            count: ms.len(),
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            p95_ms: ms[rank - 1],
            max_ms: ms[ms.len() - 1],
        }
    }
}

/// Coarse alignment over IMU samples in `[t_0, t_0 + duration)`.
pub fn align_dataset(imu: &[ImuSample], gravity: f64, duration: f64) -> Result<Alignment> {
    let first = imu
        .first()
        .ok_or_else(|| Error::InsufficientData("no IMU samples".into()))?
        .timestamp;
    let window: Vec<ImuSample> = imu
        .iter()
        .take_while(|m| m.timestamp < first + duration)
        .copied()
        .collect();
    let span = window.last().map_or(0.0, |m| m.timestamp - first);
    if span < 1.0 {
        return Err(Error::InsufficientData(format!(
            "coarse alignment needs at least 1 s of IMU data, got {span} s"
        )));
    }
    coarse_align(&window, gravity)
}

fn median_period(imu: &[ImuSample]) -> Result<f64> {
    let mut gaps: Vec<f64> = imu.windows(2).map(|w| w[1].timestamp - w[0].timestamp).collect();
    if gaps.is_empty() {
        return Err(Error::InsufficientData("need at least 2 IMU samples".into()));
    }
    gaps.sort_by(f64::total_cmp);
    Ok(crate::ransac::median_sorted(&gaps))
}

fn nearest(imu: &[ImuSample], t: f64) -> usize {
    let k = imu.partition_point(|m| m.timestamp < t);
    match k {
        0 => 0,
        k if k == imu.len() => k - 1,
        k if (imu[k].timestamp - t) < (t - imu[k - 1].timestamp) => k,
        k => k - 1,
    }
}

/// Attitude at every IMU sample by integrating bias-compensated gyro rates.
fn gyro_attitudes(imu: &[ImuSample], alignment: &Alignment) -> Vec<Rotation> {
    let mut out = Vec::with_capacity(imu.len());
    let mut attitude = alignment.attitude;
    out.push(attitude);
    for w in imu.windows(2) {
        let dt = w[1].timestamp - w[0].timestamp;
        // midpoint rate over the interval
        let rate = (w[0].angular_rate + w[1].angular_rate) / 2.0 - alignment.bias_gyro;
        attitude = attitude.compose(&Rotation::from_rotation_vector(&(rate * dt)));
        out.push(attitude);
    }
    out
}

/// Runs the estimator over every scan after the first IMU sample.
pub fn run_estimator(dataset: &Dataset, config: &RunConfig, method: Method) -> Result<RunOutput> {
    let alignment = align_dataset(&dataset.imu, dataset.calib.gravity, config.alignment_duration)?;
    let period = median_period(&dataset.imu)?;
    let gyro = match &dataset.truth {
        Some(_) => None,
        None => Some(gyro_attitudes(&dataset.imu, &alignment)),
    };
    let mut state = PipelineState::new(method, &config.pipeline(), dataset.calib, &alignment)?;
    let mut skipped = SkipCounts::default();
    let mut estimates = Vec::with_capacity(dataset.radar.len());
    let mut step_seconds = Vec::with_capacity(dataset.radar.len());

    for scan in &dataset.radar {
        if scan.timestamp <= alignment.start_time {
            skipped.before_start += 1;
            continue;
        }
        let i = nearest(&dataset.imu, scan.timestamp);
        let m = &dataset.imu[i];
        if (m.timestamp - scan.timestamp).abs() > 1.5 * period {
            skipped.no_imu += 1;
            continue;
        }
        let attitude = match (&dataset.truth, &gyro) {
            (Some(truth), _) => match interpolate_attitude(truth, scan.timestamp) {
                Ok(a) => a,
                Err(Error::OutOfRange { .. }) => {
                    skipped.no_attitude += 1;
                    continue;
                }
                Err(e) => return Err(e),
            },
            (None, Some(g)) => g[i],
            (None, None) => unreachable!("gyro attitudes computed when truth is absent"),
        };
        let (result, seconds) = timed(|| step(state, scan, &m.specific_force, &m.angular_rate, &attitude));
        let (estimate, next) = result?;
        step_seconds.push(seconds);
        state = next;
        estimates.push(estimate);
    }

    Ok(RunOutput {
        estimates,
        step_seconds,
        skipped,
        alignment,
        attitude_source: if gyro.is_some() {
            AttitudeSource::Gyro
        } else {
            AttitudeSource::GroundTruth
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub alignment: AlignmentMode,
    pub estimates: usize,
    /// Per-axis RMSE of the radar-frame velocity, m/s.
    pub rmse_velocity_radar: Option<[f64; 3]>,
    /// Per-axis RMSE of the nav-frame body velocity, m/s.
    pub rmse_velocity_nav: Option<[f64; 3]>,
    pub ate: Option<AteReport>,
    /// Which `ate` statistic is the single-number summary.
    pub ate_headline: &'static str,
    pub notes: Vec<String>,
}

/// Velocity RMSE against velocity truth and ATE of the dead-reckoned
/// trajectory against ground-truth poses, whichever truth is present.
pub fn evaluate(
    estimates: &[EstimateRecord],
    dataset: &Dataset,
    alignment: AlignmentMode,
    max_dt: f64,
) -> Result<(EvaluationReport, Vec<AlignedPair>)> {
    if estimates.is_empty() {
        return Err(Error::InsufficientData("no estimates to evaluate".into()));
    }
    let radar: Vec<_> = estimates.iter().map(|e| Stamped::new(e.t, e.velocity_radar)).collect();
    let nav: Vec<_> = estimates.iter().map(|e| Stamped::new(e.t, e.velocity_nav)).collect();
    let mut notes = Vec::new();

    let (rmse_velocity_radar, rmse_velocity_nav) = match (dataset.truth_velocity_radar(), dataset.truth_velocity_nav()) {
        (Some(gt_r), Some(gt_n)) => (
            Some(rmse_per_axis(&radar, &gt_r, max_dt)?.into()),
            Some(rmse_per_axis(&nav, &gt_n, max_dt)?.into()),
        ),
        _ => {
            notes.push("velocity RMSE skipped: no ground_truth_velocity.csv".to_string());
            (None, None)
        }
    };

    let (ate, pairs) = match &dataset.truth {
        Some(truth) => {
            let p0 = interpolate_position(truth, estimates[0].t)?;
            let est = integrate_positions(&nav, p0, None)?;
            let gt = Trajectory::from_positions(truth.iter().map(|p| (p.timestamp, p.position)))?;
            let (report, pairs) = ate_with_pairs(&est, &gt, alignment, max_dt)?;
            (Some(report), pairs)
        }
        None => {
            notes.push("ATE skipped: no ground_truth.csv".to_string());
            (None, Vec::new())
        }
    };

    Ok((
        EvaluationReport {
            alignment,
            estimates: estimates.len(),
            rmse_velocity_radar,
            rmse_velocity_nav,
            ate,
            ate_headline: "rmse",
            notes,
        },
        pairs,
    ))
}

/// Nav-frame velocities of a run as stamped samples.
pub fn nav_velocities(estimates: &[VelocityEstimate]) -> Vec<Stamped<Vec3>> {
    estimates.iter().map(|e| Stamped::new(e.timestamp, e.velocity_nav)).collect()
}
