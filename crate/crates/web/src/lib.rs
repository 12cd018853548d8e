//! Browser bindings. Every export takes and returns JSON strings so the page
//! needs no generated type glue beyond `wasm-bindgen`.

use creve::estimator::compute_gamma;
use creve::sim::{generate, DynamicObject, ScenarioConfig};
use creve::{evaluate, run_estimator, AlignmentMode, Dataset, GammaBounds, Method, RunConfig, Vec3};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Knobs exposed on the page. Anything absent keeps the library default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoParams {
    pub seed: u64,
    pub duration: f64,
    pub ghost_fraction: f64,
    pub moving_targets: usize,
    pub doppler_noise_std: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub accel_bias: [f64; 3],
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: 60.0,
            ghost_fraction: 0.3,
            moving_targets: 30,
            doppler_noise_std: 0.05,
            gamma_min: 0.01,
            gamma_max: 0.2,
            accel_bias: [0.05, -0.03, 0.08],
        }
    }
}

impl DemoParams {
    fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig::default();
        rc.gamma_min = Vec3::repeat(self.gamma_min);
        rc.gamma_max = Vec3::repeat(self.gamma_max);
        rc.ransac.rng_seed = self.seed;
        let per_object = self.moving_targets / 3;
        rc.scenario = ScenarioConfig {
            duration: self.duration,
            ghost_fraction: self.ghost_fraction,
            outlier_fraction: 0.0,
            doppler_noise_std: self.doppler_noise_std,
            accel_bias: Vec3::from(self.accel_bias),
            accel_noise_std: 0.02,
            dynamic_objects: [Vec3::new(3.0, -1.5, 0.0), Vec3::new(-2.0, 2.0, 0.3), Vec3::new(0.5, -3.0, 0.0)]
                .into_iter()
                .filter(|_| per_object > 0)
                .map(|velocity| DynamicObject {
                    velocity,
                    targets: per_object,
                })
                .collect(),
            rng_seed: self.seed,
            ..ScenarioConfig::default()
        };
        rc
    }
}

#[derive(Debug, Serialize)]
pub struct MethodTrace {
    /// Radar-frame velocity per scan.
    pub velocity: Vec<[f64; 3]>,
    pub constrained: Vec<bool>,
    pub bias_accel: Vec<[f64; 3]>,
    pub rmse: [f64; 3],
    /// Aligned horizontal track.
    pub track: Vec<[f64; 2]>,
    pub ate_rmse: f64,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub t: Vec<f64>,
    pub truth_velocity: Vec<[f64; 3]>,
    pub truth_track: Vec<[f64; 2]>,
    pub reve: MethodTrace,
    pub creve: MethodTrace,
    pub inlier_ratio: Vec<f64>,
}

/// Simulates one scenario and runs both estimators on it.
pub fn compare(params: &DemoParams) -> creve::Result<Comparison> {
    let rc = params.run_config();
    rc.validate()?;
    let scenario = generate(&rc.scenario)?;
    let dataset = Dataset::from_scenario(&scenario, "demo");
    let mut traces = Vec::new();
    let mut t = Vec::new();
    let mut truth_track = Vec::new();
    let mut inlier_ratio = Vec::new();
    for method in [Method::Reve, Method::Creve] {
        let out = run_estimator(&dataset, &rc, method)?;
        let (report, pairs) = evaluate(&out.records(), &dataset, AlignmentMode::PosYaw, rc.evaluation.max_dt)?;
        t = out.estimates.iter().map(|e| e.timestamp).collect();
        inlier_ratio = out.estimates.iter().map(|e| e.inlier_ratio).collect();
        truth_track = pairs.iter().map(|p| [p.gt.x, p.gt.y]).collect();
        traces.push(MethodTrace {
            velocity: out.estimates.iter().map(|e| e.velocity_radar.into()).collect(),
            constrained: out.estimates.iter().map(|e| e.constrained).collect(),
            bias_accel: out.estimates.iter().map(|e| e.bias_accel.into()).collect(),
            rmse: report.rmse_velocity_radar.unwrap_or_default(),
            track: pairs.iter().map(|p| [p.est.x, p.est.y]).collect(),
            ate_rmse: report.ate.map_or(f64::NAN, |a| a.rmse),
        });
    }
    let truth_velocity = t
        .iter()
        .map(|&t| scenario.truth_at(t).map(|s| s.velocity_radar.into()))
        .collect::<creve::Result<_>>()?;
    let creve = traces.pop().expect("two runs");
    let reve = traces.pop().expect("two runs");
    Ok(Comparison {
        t,
        truth_velocity,
        truth_track,
        reve,
        creve,
        inlier_ratio,
    })
}

/// Box half-width against inlier ratio on `samples` evenly spaced points.
pub fn gamma_points(gamma_min: f64, gamma_max: f64, samples: usize) -> creve::Result<Vec<[f64; 2]>> {
    let bounds = GammaBounds::uniform(gamma_min, gamma_max)?;
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let r = i as f64 / (n - 1) as f64;
            compute_gamma(r, &bounds).map(|g| [r, g.x])
        })
        .collect()
}

fn params(json: &str) -> Result<DemoParams, JsError> {
    if json.trim().is_empty() {
        return Ok(DemoParams::default());
    }
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad parameters: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

/// Velocity, bias and track comparison of REVE and CREVE for one scenario.
#[wasm_bindgen]
pub fn run_comparison(params_json: &str) -> Result<String, JsError> {
    let p = params(params_json)?;
    let result = compare(&p).map_err(|e| JsError::new(&e.to_string()))?;
    to_json(&result)
}

/// `[[r, gamma], ...]` for the adaptive box half-width.
#[wasm_bindgen]
pub fn gamma_curve(gamma_min: f64, gamma_max: f64, samples: usize) -> Result<String, JsError> {
    let points = gamma_points(gamma_min, gamma_max, samples).map_err(|e| JsError::new(&e.to_string()))?;
    to_json(&points)
}

/// Defaults used by the page to populate its form.
#[wasm_bindgen]
pub fn default_params() -> String {
    serde_json::to_string(&DemoParams::default()).expect("plain data serializes")
}
