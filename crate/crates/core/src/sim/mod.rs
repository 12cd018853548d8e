//! Synthetic radar/IMU scenarios with analytic ground truth.
//!
//! Static targets obey the Doppler model exactly before noise. Corrupted
//! returns come in three flavours: static targets with a random Doppler
//! offset, clusters on moving objects sharing one velocity, and ghosts with
//! uniformly random Doppler.

mod trajectory;

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{all_finite, ExtrinsicCalib, ImuSample, PoseSample, RadarScan, RadarTarget, Rotation, Stamped, Vec3, DEFAULT_GRAVITY};

pub use trajectory::{BodyState, TrajectoryKind, TruthModel, YawProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtrinsicsConfig {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub lever_arm: Vec3,
}

impl Default for ExtrinsicsConfig {
    fn default() -> Self {
        // radar mounted FLU on an FRD body, slightly yawed and offset
        Self {
            roll_deg: 180.0,
            pitch_deg: 0.0,
            yaw_deg: 5.0,
            lever_arm: Vec3::new(0.1, 0.0, -0.05),
        }
    }
}

impl ExtrinsicsConfig {
    pub fn identity() -> Self {
        Self {
            roll_deg: 0.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            lever_arm: Vec3::zeros(),
        }
    }

    pub fn calib(&self, gravity: f64) -> Result<ExtrinsicCalib> {
        let rot = Rotation::from_euler(
            self.roll_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.yaw_deg.to_radians(),
        );
        ExtrinsicCalib::new(rot, self.lever_arm, gravity)
    }
}

/// A group of returns from one object moving at a constant nav velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObject {
    pub velocity: Vec3,
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub radar_rate: f64,
    pub imu_rate: f64,
    /// Leading stationary interval, used for coarse alignment.
    pub stationary_duration: f64,
    pub trajectory: TrajectoryKind,
    pub yaw: YawProfile,
    pub initial_roll: f64,
    pub initial_pitch: f64,
    pub n_static_targets: usize,
    pub fov_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
    pub outlier_fraction: f64,
    pub dynamic_objects: Vec<DynamicObject>,
    pub ghost_fraction: f64,
    pub doppler_noise_std: f64,
    pub position_noise_std: f64,
    pub accel_bias: Vec3,
    pub gyro_bias: Vec3,
    pub accel_noise_std: f64,
    pub gyro_noise_std: f64,
    pub gravity: f64,
    pub extrinsics: ExtrinsicsConfig,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            radar_rate: 10.0,
            imu_rate: 400.0,
            stationary_duration: 10.0,
            trajectory: TrajectoryKind::Sinusoid {
                amplitude: Vec3::new(6.0, 4.0, 0.5),
                frequency_hz: Vec3::new(0.05, 0.07, 0.1),
                phase: Vec3::repeat(-FRAC_PI_2),
            },
            yaw: YawProfile {
                amplitude: 0.5,
                frequency_hz: 0.03,
            },
            initial_roll: 0.0,
            initial_pitch: 0.0,
            n_static_targets: 40,
            fov_deg: 120.0,
            min_range: 1.0,
            max_range: 30.0,
            outlier_fraction: 0.05,
            dynamic_objects: vec![DynamicObject {
                velocity: Vec3::new(2.0, -1.0, 0.0),
                targets: 8,
            }],
            ghost_fraction: 0.1,
            doppler_noise_std: 0.02,
            position_noise_std: 0.02,
            accel_bias: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            gravity: DEFAULT_GRAVITY,
            extrinsics: ExtrinsicsConfig::default(),
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Every invalid field, joined into one message.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} = {v} must be > 0"));
            }
        };
        positive("duration", self.duration);
        positive("radar_rate", self.radar_rate);
        positive("imu_rate", self.imu_rate);
        positive("gravity", self.gravity);
        positive("min_range", self.min_range);
        positive("fov_deg", self.fov_deg);
        let mut non_negative = |name: &str, v: f64| {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} = {v} must be >= 0"));
            }
        };
        non_negative("stationary_duration", self.stationary_duration);
        non_negative("doppler_noise_std", self.doppler_noise_std);
        non_negative("position_noise_std", self.position_noise_std);
        non_negative("accel_noise_std", self.accel_noise_std);
        non_negative("gyro_noise_std", self.gyro_noise_std);
        for (name, f) in [("outlier_fraction", self.outlier_fraction), ("ghost_fraction", self.ghost_fraction)] {
            if !(0.0..1.0).contains(&f) {
                bad.push(format!("{name} = {f} must lie in [0, 1)"));
            }
        }
        if self.outlier_fraction + self.ghost_fraction >= 1.0 {
            bad.push("outlier_fraction + ghost_fraction must be < 1".into());
        }
        if self.fov_deg > 180.0 {
            bad.push(format!("fov_deg = {} must be <= 180", self.fov_deg));
        }
        if !(self.max_range > self.min_range) {
            bad.push(format!(
                "max_range = {} must exceed min_range = {}",
                self.max_range, self.min_range
            ));
        }
        let vectors = [
            ("accel_bias", self.accel_bias),
            ("gyro_bias", self.gyro_bias),
            ("extrinsics.lever_arm", self.extrinsics.lever_arm),
        ];
        for (name, v) in vectors {
            if !all_finite(&v) {
                bad.push(format!("{name} must be finite"));
            }
        }
        for (i, obj) in self.dynamic_objects.iter().enumerate() {
            if !all_finite(&obj.velocity) {
                bad.push(format!("dynamic_objects[{i}].velocity must be finite"));
            }
        }
        if self.n_static_targets + self.dynamic_objects.iter().map(|o| o.targets).sum::<usize>() == 0 {
            bad.push("n_static_targets: a scan needs at least one non-ghost target".into());
        }
        if let Err(e) = TruthModel::new(self.trajectory.clone(), self.yaw, 0.0, 0.0, 0.0) {
            bad.push(e.to_string().trim_start_matches("invalid input: ").to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid scenario: {}", bad.join("; "))))
        }
    }

    pub fn truth_model(&self) -> Result<TruthModel> {
        TruthModel::new(
            self.trajectory.clone(),
            self.yaw,
            self.stationary_duration,
            self.initial_roll,
            self.initial_pitch,
        )
    }

    /// Per-scan target counts `(inliers, offset outliers, dynamic, ghosts)`.
    pub fn composition(&self) -> (usize, usize, usize, usize) {
        let dynamic: usize = self.dynamic_objects.iter().map(|o| o.targets).sum();
        let modelled = self.n_static_targets + dynamic;
        let total = (modelled as f64 / (1.0 - self.outlier_fraction - self.ghost_fraction)).round() as usize;
        let outliers = ((self.outlier_fraction * total as f64).round() as usize).min(total - modelled);
        let ghosts = total - modelled - outliers;
        (self.n_static_targets, outliers, dynamic, ghosts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Static,
    Outlier,
    Dynamic,
    Ghost,
}

impl TargetKind {
    pub fn follows_model(self) -> bool {
        self == TargetKind::Static
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub radar: Vec<RadarScan>,
    /// Per-scan, per-target origin, parallel to `radar`.
    pub labels: Vec<Vec<TargetKind>>,
    pub imu: Vec<ImuSample>,
    pub truth: Vec<PoseSample>,
    pub truth_velocity_radar: Vec<Stamped<Vec3>>,
    pub truth_velocity_nav: Vec<Stamped<Vec3>>,
    pub calib: ExtrinsicCalib,
    model: TruthModel,
}

/// Truth kinematics at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    /// Radar velocity in the radar frame.
    pub velocity_radar: Vec3,
    /// Body velocity in nav.
    pub velocity_nav: Vec3,
    pub accel_nav: Vec3,
}

/// `v^r = C_b^r (C_n^b v^n + ω^b × p_r^b)`.
pub fn radar_velocity(state: &BodyState, calib: &ExtrinsicCalib) -> Vec3 {
    let body = state.attitude.inverse().rotate(&state.velocity) + state.angular_rate.cross(&calib.lever_arm);
    calib.rot_body_to_radar().rotate(&body)
}

impl Scenario {
    pub fn truth_at(&self, t: f64) -> Result<TruthSample> {
        if !(0.0..=self.config.duration).contains(&t) {
            return Err(Error::OutOfRange {
                t,
                start: 0.0,
                end: self.config.duration,
            });
        }
        let s = self.model.state(t);
        Ok(TruthSample {
            velocity_radar: radar_velocity(&s, &self.calib),
            velocity_nav: s.velocity,
            accel_nav: s.acceleration,
        })
    }

    pub fn body_state(&self, t: f64) -> BodyState {
        self.model.state(t)
    }
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        Normal::new(0.0, std).expect("validated std").sample(rng)
    }
}

fn gauss3(rng: &mut ChaCha8Rng, std: f64) -> Vec3 {
    Vec3::new(gauss(rng, std), gauss(rng, std), gauss(rng, std))
}

/// Unit direction in the radar frame (x forward, y left, z up).
fn direction(azimuth: f64, elevation: f64) -> Vec3 {
    Vec3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}

struct ScanContext<'a> {
    config: &'a ScenarioConfig,
    state: BodyState,
    calib: &'a ExtrinsicCalib,
    ghost_span: f64,
}

impl ScanContext<'_> {
    fn random_position(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        let half = self.config.fov_deg.to_radians() / 2.0;
        let az = rng.random_range(-half..=half);
        let el = rng.random_range(-half..=half);
        let range = rng.random_range(self.config.min_range..=self.config.max_range);
        direction(az, el) * range
    }

    fn measured(&self, rng: &mut ChaCha8Rng, position: Vec3, doppler: f64) -> RadarTarget {
        let noisy_doppler = doppler + gauss(rng, self.config.doppler_noise_std);
        let mut noisy_position = position + gauss3(rng, self.config.position_noise_std);
        if noisy_position.norm() < 1e-3 {
            noisy_position = position;
        }
        RadarTarget::new(noisy_position, noisy_doppler).expect("finite target with nonzero range")
    }

    fn generate(&self, rng: &mut ChaCha8Rng) -> (Vec<RadarTarget>, Vec<TargetKind>) {
        let v_radar = radar_velocity(&self.state, self.calib);
        let nav_to_radar = self.calib.rot_body_to_radar().compose(&self.state.attitude.inverse());
        let (n_static, n_outliers, _, n_ghosts) = self.config.composition();
        let mut targets = Vec::new();
        let mut labels = Vec::new();

        for i in 0..n_static + n_outliers {
            let p = self.random_position(rng);
            let mut doppler = -p.normalize().dot(&v_radar);
            let kind = if i < n_static {
                TargetKind::Static
            } else {
                let offset = rng.random_range(0.3..=1.5);
                doppler += if rng.random_bool(0.5) { offset } else { -offset };
                TargetKind::Outlier
            };
            targets.push(self.measured(rng, p, doppler));
            labels.push(kind);
        }

        let half = self.config.fov_deg.to_radians() / 2.0;
        let spread = half.min(10f64.to_radians());
        for obj in &self.config.dynamic_objects {
            let relative = nav_to_radar.rotate(&obj.velocity) - v_radar;
            let az0 = rng.random_range(-(half - spread).max(0.0)..=(half - spread).max(0.0));
            let el0 = rng.random_range(-(half - spread).max(0.0)..=(half - spread).max(0.0));
            let r0 = rng.random_range(self.config.min_range + 2.0..=self.config.max_range.max(self.config.min_range + 4.0) - 2.0);
            for _ in 0..obj.targets {
                let az = az0 + rng.random_range(-spread..=spread);
                let el = el0 + rng.random_range(-spread..=spread);
                let range = (r0 + rng.random_range(-2.0..=2.0)).max(self.config.min_range);
                let p = direction(az, el) * range;
                targets.push(self.measured(rng, p, p.normalize().dot(&relative)));
                labels.push(TargetKind::Dynamic);
            }
        }

        for _ in 0..n_ghosts {
            let p = self.random_position(rng);
            let doppler = rng.random_range(-self.ghost_span..=self.ghost_span);
            targets.push(self.measured(rng, p, doppler));
            labels.push(TargetKind::Ghost);
        }

        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.shuffle(rng);
        (
            order.iter().map(|&i| targets[i]).collect(),
            order.iter().map(|&i| labels[i]).collect(),
        )
    }
}

fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Timestamps `k / rate` for `k` in `first..` up to `duration`.
fn grid(rate: f64, duration: f64, first: u64) -> impl Iterator<Item = (u64, f64)> {
    (first..)
        .map(move |k| (k, k as f64 / rate))
        .take_while(move |&(_, t)| t <= duration + 1e-12)
}

/// Builds a scenario. Deterministic in `config.rng_seed`: the IMU uses PRNG
/// stream 0 and radar scan `k` uses stream `k`.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let model = config.truth_model()?;
    let calib = config.extrinsics.calib(config.gravity)?;
    let g_nav = calib.gravity_nav();

    let mut imu_rng = rng_for_stream(config.rng_seed, 0);
    let mut imu = Vec::new();
    let mut truth = Vec::new();
    for (_, t) in grid(config.imu_rate, config.duration, 0) {
        let s = model.state(t);
        let to_body = s.attitude.inverse();
        imu.push(ImuSample {
            timestamp: t,
            specific_force: to_body.rotate(&(s.acceleration - g_nav)) + config.accel_bias + gauss3(&mut imu_rng, config.accel_noise_std),
            angular_rate: s.angular_rate + config.gyro_bias + gauss3(&mut imu_rng, config.gyro_noise_std),
        });
        truth.push(PoseSample {
            timestamp: t,
            position: s.position,
            attitude: s.attitude,
        });
    }

    let scan_times: Vec<(u64, f64)> = grid(config.radar_rate, config.duration, 1).collect();
    let max_speed = scan_times
        .iter()
        .map(|&(_, t)| radar_velocity(&model.state(t), &calib).norm())
        .fold(0.0, f64::max);
    let ghost_span = 2.0 * max_speed.max(0.5);

    let mut radar = Vec::with_capacity(scan_times.len());
    let mut labels = Vec::with_capacity(scan_times.len());
    let mut truth_velocity_radar = Vec::with_capacity(scan_times.len());
    let mut truth_velocity_nav = Vec::with_capacity(scan_times.len());
    for &(k, t) in &scan_times {
        let state = model.state(t);
        let ctx = ScanContext {
            config,
            state,
            calib: &calib,
            ghost_span,
        };
        let (targets, kinds) = ctx.generate(&mut rng_for_stream(config.rng_seed, k));
        radar.push(RadarScan { timestamp: t, targets });
        labels.push(kinds);
        truth_velocity_radar.push(Stamped::new(t, radar_velocity(&state, &calib)));
        truth_velocity_nav.push(Stamped::new(t, state.velocity));
    }

    Ok(Scenario {
        config: config.clone(),
        radar,
        labels,
        imu,
        truth,
        truth_velocity_radar,
        truth_velocity_nav,
        calib,
        model,
    })
}
