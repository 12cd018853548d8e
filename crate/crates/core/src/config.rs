//! TOML run configuration covering the estimator, the scenario generator and
//! evaluation. Unknown keys are rejected.
//!
//! ```toml
//! gamma_min = 0.01            # scalar or [x, y, z], m/s
//! gamma_max = 0.75
//! z_threshold = 0.05          # median |Doppler| below this means stationary, m/s
//! bias_cutoff_hz = 0.01
//! gravity = 9.81
//! alignment_duration = 10.0   # leading stationary IMU window, s
//!
//! [ransac]
//! success_prob = 0.99
//! outlier_prob = 0.4
//! inlier_threshold = 0.15
//! seed = 0
//!
//! [evaluation]
//! max_dt = 0.05
//!
//! [scenario]                  # see ScenarioConfig
//! duration = 60.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{GammaBounds, PipelineConfig};
use crate::frames::{Vec3, DEFAULT_GRAVITY};
use crate::metrics::DEFAULT_MAX_DT;
use crate::ransac::RansacParams;
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Nearest-timestamp association window, s.
    pub max_dt: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { max_dt: DEFAULT_MAX_DT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub gamma_min: Vec3,
    pub gamma_max: Vec3,
    pub z_threshold: f64,
    pub bias_cutoff_hz: f64,
    pub gravity: f64,
    pub alignment_duration: f64,
    pub ransac: RansacParams,
    pub evaluation: EvaluationConfig,
    pub scenario: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        Self {
            gamma_min: pipeline.gamma.gamma_min,
            gamma_max: pipeline.gamma.gamma_max,
            z_threshold: pipeline.z_threshold,
            bias_cutoff_hz: pipeline.bias_cutoff_hz,
            gravity: DEFAULT_GRAVITY,
            alignment_duration: 10.0,
            ransac: pipeline.ransac,
            evaluation: EvaluationConfig::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Axes {
    Scalar(f64),
    Vector([f64; 3]),
}

impl Axes {
    fn vec(&self) -> Vec3 {
        match *self {
            Axes::Scalar(s) => Vec3::repeat(s),
            Axes::Vector(v) => Vec3::from(v),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    gamma_min: Option<Axes>,
    gamma_max: Option<Axes>,
    z_threshold: Option<f64>,
    bias_cutoff_hz: Option<f64>,
    gravity: Option<f64>,
    alignment_duration: Option<f64>,
    ransac: Option<RansacParams>,
    evaluation: Option<EvaluationConfig>,
    scenario: Option<ScenarioConfig>,
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            gamma: GammaBounds {
                gamma_min: self.gamma_min,
                gamma_max: self.gamma_max,
            },
            z_threshold: self.z_threshold,
            ransac: self.ransac,
            bias_cutoff_hz: self.bias_cutoff_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GammaBounds::new(self.gamma_min, self.gamma_max)?;
        self.ransac.validate()?;
        let mut bad = Vec::new();
        if !(self.z_threshold >= 0.0 && self.z_threshold.is_finite()) {
            bad.push(format!("z_threshold = {} must be >= 0", self.z_threshold));
        }
        let nyquist = self.scenario.radar_rate / 2.0;
        if !(self.bias_cutoff_hz > 0.0 && self.bias_cutoff_hz < nyquist) {
            bad.push(format!(
                "bias_cutoff_hz = {} must lie in (0, {nyquist})",
                self.bias_cutoff_hz
            ));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            bad.push(format!("gravity = {} must be > 0", self.gravity));
        }
        if !(self.alignment_duration >= 1.0 && self.alignment_duration.is_finite()) {
            bad.push(format!(
                "alignment_duration = {} must be >= 1 s",
                self.alignment_duration
            ));
        }
        if !(self.evaluation.max_dt > 0.0 && self.evaluation.max_dt.is_finite()) {
            bad.push(format!("evaluation.max_dt = {} must be > 0", self.evaluation.max_dt));
        }
        if let Err(e) = self.scenario.validate() {
            bad.push(e.to_string().trim_start_matches("invalid input: ").to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Parses and validates a config document. An empty document yields the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let defaults = RunConfig::default();
    let gravity = raw.gravity.unwrap_or(defaults.gravity);
    let mut scenario = raw.scenario.unwrap_or_default();
    scenario.gravity = gravity;
    let config = RunConfig {
        gamma_min: raw.gamma_min.map_or(defaults.gamma_min, |a| a.vec()),
        gamma_max: raw.gamma_max.map_or(defaults.gamma_max, |a| a.vec()),
        z_threshold: raw.z_threshold.unwrap_or(defaults.z_threshold),
        bias_cutoff_hz: raw.bias_cutoff_hz.unwrap_or(defaults.bias_cutoff_hz),
        gravity,
        alignment_duration: raw.alignment_duration.unwrap_or(defaults.alignment_duration),
        ransac: raw.ransac.unwrap_or(defaults.ransac),
        evaluation: raw.evaluation.unwrap_or(defaults.evaluation),
        scenario,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
