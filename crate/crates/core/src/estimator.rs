//! The acceleration-constrained estimator (CREVE).
//!
//! Per radar epoch the estimator
//! 1. tests for zero velocity (median absolute Doppler) or runs RANSAC/LSQ,
//! 2. reconstructs radar-frame acceleration from the accelerometer, gravity
//!    and the smoothed bias estimate,
//! 3. widens the box `v_{k-1} + a Δt ± γ` by the inlier ratio,
//! 4. if the unconstrained estimate leaves the box, re-solves least squares on
//!    the inlier rows inside the box and refreshes the accelerometer bias,
//! 5. mechanizes the radar velocity into a nav-frame body velocity.
//!
//! [`Method::Reve`] runs only step 1 (plus mechanization) and is the baseline.

use serde::{Deserialize, Serialize};

use crate::boxlsq::{solve_box_lsq, BoxConstraint};
use crate::error::{Error, Result};
use crate::frames::{all_finite, skew, ExtrinsicCalib, ImuSample, RadarScan, Rotation, Vec3};
use crate::ransac::{design_rows, detect_zero_velocity, inliers_of, ransac_estimate, RansacParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain RANSAC/LSQ.
    Reve,
    /// RANSAC/LSQ with the acceleration box constraint.
    Creve,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Reve => "reve",
            Method::Creve => "creve",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBounds {
    pub gamma_min: Vec3,
    pub gamma_max: Vec3,
}

impl GammaBounds {
    pub fn new(gamma_min: Vec3, gamma_max: Vec3) -> Result<Self> {
        for i in 0..3 {
            if !(gamma_min[i] > 0.0 && gamma_min[i].is_finite()) {
                return Err(Error::Config(format!(
                    "gamma_min[{i}] = {} must be > 0",
                    gamma_min[i]
                )));
            }
            if !(gamma_max[i] >= gamma_min[i] && gamma_max[i].is_finite()) {
                return Err(Error::Config(format!(
                    "gamma_max[{i}] = {} must be >= gamma_min[{i}] = {}",
                    gamma_max[i], gamma_min[i]
                )));
            }
        }
        Ok(Self {
            gamma_min,
            gamma_max,
        })
    }

    pub fn uniform(gamma_min: f64, gamma_max: f64) -> Result<Self> {
        Self::new(Vec3::repeat(gamma_min), Vec3::repeat(gamma_max))
    }
}

/// Box half-width from the inlier ratio: `γ_min + (γ_max − γ_min) r²`.
pub fn compute_gamma(inlier_ratio: f64, bounds: &GammaBounds) -> Result<Vec3> {
    if !(0.0..=1.0).contains(&inlier_ratio) {
        return Err(Error::InvalidInput(format!(
            "inlier ratio {inlier_ratio} outside [0, 1]"
        )));
    }
    let r2 = inlier_ratio * inlier_ratio;
    Ok(bounds.gamma_min + (bounds.gamma_max - bounds.gamma_min) * r2)
}

/// Box `prev_v + a Δt ± γ`.
pub fn build_constraint(prev_v: &Vec3, accel_radar: &Vec3, dt: f64, gamma: &Vec3) -> Result<BoxConstraint> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be > 0")));
    }
    if gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "gamma {:?} must be > 0 elementwise",
            gamma.as_slice()
        )));
    }
    BoxConstraint::centered(prev_v + accel_radar * dt, *gamma)
}

/// Radar-frame acceleration `C_b^r (f^b − b_a + C_n^b g^n)`.
pub fn compute_acceleration(f_b: &Vec3, attitude: &Rotation, bias_accel: &Vec3, calib: &ExtrinsicCalib) -> Vec3 {
    let gravity_body = attitude.inverse().rotate(&calib.gravity_nav());
    calib
        .rot_body_to_radar()
        .rotate(&(f_b - bias_accel + gravity_body))
}

/// Nav-frame body velocity `C_b^n C_r^b v − C_b^n ⌊ω − b_g⌋ p_r^b`.
pub fn body_velocity_nav(
    v_radar: &Vec3,
    attitude: &Rotation,
    angular_rate: &Vec3,
    bias_gyro: &Vec3,
    calib: &ExtrinsicCalib,
) -> Vec3 {
    let v_body = calib.rot_radar_to_body.rotate(v_radar)
        - skew(&(angular_rate - bias_gyro)) * calib.lever_arm;
    attitude.rotate(&v_body)
}

/// Accelerometer bias from two consecutive nav-frame body velocities:
/// `f^b + C_n^b (g^n − Δv / Δt)`.
pub fn estimate_bias_raw(
    v_nav_k: &Vec3,
    v_nav_km1: &Vec3,
    f_b: &Vec3,
    attitude: &Rotation,
    dt: f64,
    gravity: f64,
) -> Result<Vec3> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be > 0")));
    }
    let g = Vec3::new(0.0, 0.0, gravity);
    Ok(f_b + attitude.inverse().rotate(&(g - (v_nav_k - v_nav_km1) / dt)))
}

/// First-order low-pass filter for the accelerometer bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasFilter {
    pub cutoff_hz: f64,
    pub state: Vec3,
    pub initialized: bool,
}

impl BiasFilter {
    pub fn new(cutoff_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz.is_finite()) {
            return Err(Error::Config(format!(
                "bias_cutoff_hz = {cutoff_hz} must be > 0"
            )));
        }
        Ok(Self {
            cutoff_hz,
            state: Vec3::zeros(),
            initialized: false,
        })
    }

    pub fn with_state(cutoff_hz: f64, state: Vec3) -> Result<Self> {
        let mut f = Self::new(cutoff_hz)?;
        f.state = state;
        f.initialized = true;
        Ok(f)
    }

    /// Smoothing gain for a step of `dt` seconds.
    pub fn alpha(&self, dt: f64) -> f64 {
        let tau = 1.0 / (2.0 * std::f64::consts::PI * self.cutoff_hz);
        dt / (dt + tau)
    }

    /// Feeds one raw sample. The first sample initializes the state;
    /// a non-positive `dt` leaves it unchanged.
    pub fn update(&mut self, raw: &Vec3, dt: f64) -> Vec3 {
        if !self.initialized {
            self.state = *raw;
            self.initialized = true;
        } else if dt > 0.0 {
            self.state += self.alpha(dt) * (raw - self.state);
        }
        self.state
    }
}

/// Result of the stationary initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub bias_gyro: Vec3,
    pub bias_accel: Vec3,
    /// Leveled `C_b^n` (yaw = 0).
    pub attitude: Rotation,
    pub start_time: f64,
    pub end_time: f64,
}

/// Stationary coarse alignment with roll/pitch leveling.
pub fn coarse_align(imu: &[ImuSample], gravity: f64) -> Result<Alignment> {
    coarse_align_with(imu, gravity, true)
}

/// Coarse alignment; with `leveling = false` the attitude is identity and all
/// of the mean specific force beyond gravity is attributed to bias.
pub fn coarse_align_with(imu: &[ImuSample], gravity: f64, leveling: bool) -> Result<Alignment> {
    let (Some(first), Some(last)) = (imu.first(), imu.last()) else {
        return Err(Error::InsufficientData("no IMU samples for coarse alignment".into()));
    };
    let n = imu.len() as f64;
    let mean_f = imu.iter().map(|s| s.specific_force).sum::<Vec3>() / n;
    let mean_w = imu.iter().map(|s| s.angular_rate).sum::<Vec3>() / n;
    if !all_finite(&mean_f) || !all_finite(&mean_w) {
        return Err(Error::InvalidInput("non-finite IMU samples".into()));
    }
    // at rest f^b = −C_n^b g^n = g (sin θ, −sin φ cos θ, −cos φ cos θ)
    let attitude = if leveling {
        let roll = (-mean_f.y).atan2(-mean_f.z);
        let pitch = mean_f.x.atan2((mean_f.y * mean_f.y + mean_f.z * mean_f.z).sqrt());
        Rotation::from_euler(roll, pitch, 0.0)
    } else {
        Rotation::identity()
    };
    let g = Vec3::new(0.0, 0.0, gravity);
    Ok(Alignment {
        bias_gyro: mean_w,
        bias_accel: mean_f + attitude.inverse().rotate(&g),
        attitude,
        start_time: first.timestamp,
        end_time: last.timestamp,
    })
}

/// Tunables of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub gamma: GammaBounds,
    pub z_threshold: f64,
    pub ransac: RansacParams,
    pub bias_cutoff_hz: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gamma: GammaBounds {
                gamma_min: Vec3::repeat(0.01),
                gamma_max: Vec3::repeat(0.75),
            },
            z_threshold: 0.05,
            ransac: RansacParams::default(),
            bias_cutoff_hz: 0.01,
        }
    }
}

/// Everything carried from one radar epoch to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    pub method: Method,
    pub prev_velocity_radar: Vec3,
    pub prev_velocity_nav: Vec3,
    pub prev_timestamp: f64,
    pub bias_accel: BiasFilter,
    pub bias_gyro: Vec3,
    pub calib: ExtrinsicCalib,
    pub gamma: GammaBounds,
    pub ransac: RansacParams,
    pub z_threshold: f64,
    /// Number of epochs processed; mixes into the per-scan RANSAC seed.
    pub epoch: u64,
}

impl PipelineState {
    /// State at the end of a stationary alignment: zero velocity at
    /// `alignment.start_time`, bias filter seeded with the aligned bias.
    pub fn new(method: Method, config: &PipelineConfig, calib: ExtrinsicCalib, alignment: &Alignment) -> Result<Self> {
        config.ransac.validate()?;
        GammaBounds::new(config.gamma.gamma_min, config.gamma.gamma_max)?;
        if !(config.z_threshold >= 0.0 && config.z_threshold.is_finite()) {
            return Err(Error::Config(format!(
                "z_threshold = {} must be >= 0",
                config.z_threshold
            )));
        }
        Ok(Self {
            method,
            prev_velocity_radar: Vec3::zeros(),
            prev_velocity_nav: Vec3::zeros(),
            prev_timestamp: alignment.start_time,
            bias_accel: BiasFilter::with_state(config.bias_cutoff_hz, alignment.bias_accel)?,
            bias_gyro: alignment.bias_gyro,
            calib,
            gamma: config.gamma,
            ransac: config.ransac,
            z_threshold: config.z_threshold,
            epoch: 0,
        })
    }
}

/// Per-epoch estimator output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimate {
    pub timestamp: f64,
    /// Radar period used for this epoch.
    pub dt: f64,
    pub velocity_radar: Vec3,
    pub velocity_nav: Vec3,
    pub inlier_ratio: f64,
    pub gamma_used: Vec3,
    /// The box-constrained solve produced this velocity.
    pub constrained: bool,
    /// The zero-velocity detector fired and zero was emitted.
    pub zero_velocity: bool,
    /// RANSAC could not produce a hypothesis; the inertial prediction (CREVE)
    /// or the previous velocity (REVE) was emitted.
    pub degenerate: bool,
    pub accel_radar: Vec3,
    /// Smoothed accelerometer bias after this epoch.
    pub bias_accel: Vec3,
}

/// Prior estimate for one scan before the constraint check.
struct Prior {
    velocity: Option<Vec3>,
    zero_velocity: bool,
    inlier_ratio: f64,
    inliers: Vec<usize>,
}

fn prior_estimate(state: &PipelineState, scan: &RadarScan) -> Prior {
    let failed = Prior {
        velocity: None,
        zero_velocity: false,
        inlier_ratio: 0.0,
        inliers: Vec::new(),
    };
    match detect_zero_velocity(scan, state.z_threshold) {
        Err(_) => failed,
        Ok(true) => {
            // support of the zero hypothesis; all rows feed a constrained solve
            let (rows, rhs) = design_rows(&scan.targets);
            let support = inliers_of(&rows, &rhs, &Vec3::zeros(), state.ransac.inlier_threshold);
            Prior {
                velocity: Some(Vec3::zeros()),
                zero_velocity: true,
                inlier_ratio: support.len() as f64 / scan.targets.len() as f64,
                inliers: (0..scan.targets.len()).collect(),
            }
        }
        Ok(false) => {
            let params = RansacParams {
                rng_seed: derive_seed(state.ransac.rng_seed, state.epoch),
                ..state.ransac
            };
            match ransac_estimate(scan, &params) {
                Ok(r) => Prior {
                    velocity: Some(r.velocity),
                    zero_velocity: false,
                    inlier_ratio: r.inlier_ratio,
                    inliers: r.inlier_indices,
                },
                Err(_) => failed,
            }
        }
    }
}

/// One epoch of the estimator. Consumes the state and returns the advanced one.
pub fn step(
    state: PipelineState,
    scan: &RadarScan,
    f_b: &Vec3,
    omega: &Vec3,
    attitude: &Rotation,
) -> Result<(VelocityEstimate, PipelineState)> {
    let dt = scan.timestamp - state.prev_timestamp;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scan at t = {} does not follow previous epoch at t = {}",
            scan.timestamp, state.prev_timestamp
        )));
    }
    let mut next = state;
    let prior = prior_estimate(&next, scan);

    let accel_radar = compute_acceleration(f_b, attitude, &next.bias_accel.state, &next.calib);
    let gamma = compute_gamma(prior.inlier_ratio, &next.gamma)?;
    let bounds = build_constraint(&next.prev_velocity_radar, &accel_radar, dt, &gamma)?;

    let mut constrained = false;
    let mut degenerate = false;
    let mut zero_velocity = prior.zero_velocity;
    let velocity_radar = match (next.method, prior.velocity) {
        (Method::Reve, Some(v)) => v,
        (Method::Reve, None) => {
            degenerate = true;
            next.prev_velocity_radar
        }
        (Method::Creve, None) => {
            degenerate = true;
            constrained = true;
            bounds.center()
        }
        (Method::Creve, Some(v)) if bounds.contains(&v) => v,
        (Method::Creve, Some(_)) => {
            let (rows, rhs) = design_rows(&scan.targets);
            let in_rows: Vec<Vec3> = prior.inliers.iter().map(|&i| rows[i]).collect();
            let in_rhs: Vec<f64> = prior.inliers.iter().map(|&i| rhs[i]).collect();
            let solution = solve_box_lsq(&in_rows, &in_rhs, &bounds)?;
            constrained = true;
            zero_velocity = false;
            solution.velocity
        }
    };

    let velocity_nav = body_velocity_nav(
        &velocity_radar,
        attitude,
        omega,
        &next.bias_gyro,
        &next.calib,
    );
    if constrained && !degenerate {
        let raw = estimate_bias_raw(
            &velocity_nav,
            &next.prev_velocity_nav,
            f_b,
            attitude,
            dt,
            next.calib.gravity,
        )?;
        next.bias_accel.update(&raw, dt);
    }

    let estimate = VelocityEstimate {
        timestamp: scan.timestamp,
        dt,
        velocity_radar,
        velocity_nav,
        inlier_ratio: prior.inlier_ratio,
        gamma_used: gamma,
        constrained,
        zero_velocity,
        degenerate,
        accel_radar,
        bias_accel: next.bias_accel.state,
    };
    next.prev_velocity_radar = velocity_radar;
    next.prev_velocity_nav = velocity_nav;
    next.prev_timestamp = scan.timestamp;
    next.epoch += 1;
    Ok((estimate, next))
}

/// SplitMix64 finalizer over `seed ⊕ stream`, for independent per-epoch streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
