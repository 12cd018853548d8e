#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use creve::sim::{DynamicObject, ScenarioConfig, TrajectoryKind, YawProfile};
use creve::{BoxConstraint, RunConfig, Vec3};

/// Dense Gaussian elimination with partial pivoting. `None` when singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn objective(rows: &[Vec3], y: &[f64], v: &Vec3) -> f64 {
    rows.iter().zip(y).map(|(h, y)| (h.dot(v) - y).powi(2)).sum::<f64>() / 2.0
}

/// Exhaustive search over all 27 assignments of each coordinate to
/// {free, at lower, at upper}. Each assignment fixes the bound coordinates,
/// solves the reduced least-squares problem in the free ones and keeps the
/// best feasible candidate.
pub fn box_lsq_oracle(rows: &[Vec3], y: &[f64], c: &BoxConstraint) -> (Vec3, f64) {
    let mut best: Option<(Vec3, f64)> = None;
    for code in 0..27 {
        let state = [code % 3, (code / 3) % 3, code / 9];
        let mut v = Vec3::zeros();
        let mut free = Vec::new();
        for i in 0..3 {
            match state[i] {
                0 => free.push(i),
                1 => v[i] = c.lower[i],
                _ => v[i] = c.upper[i],
            }
        }
        if !free.is_empty() {
            // normal equations of the reduced problem
            let residual: Vec<f64> = rows.iter().zip(y).map(|(h, y)| y - h.dot(&v)).collect();
            let a: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| free.iter().map(|&j| rows.iter().map(|h| h[i] * h[j]).sum()).collect())
                .collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| rows.iter().zip(&residual).map(|(h, r)| h[i] * r).sum())
                .collect();
            let Some(x) = gauss_solve(a, b) else { continue };
            for (k, &i) in free.iter().enumerate() {
                v[i] = x[k];
            }
        }
        let feasible = (0..3).all(|i| v[i] >= c.lower[i] - 1e-12 && v[i] <= c.upper[i] + 1e-12);
        if !feasible {
            continue;
        }
        let f = objective(rows, y, &v);
        if best.is_none_or(|(_, fb)| f < fb) {
            best = Some((v, f));
        }
    }
    best.expect("the all-bounds corner is always feasible")
}

/// Shared acceptance scenario: 60% structured outliers (three moving
/// objects plus ghosts), 0.05 m/s Doppler noise, 120 s with a 10 s
/// stationary start, planted accelerometer bias.
pub fn outlier_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        duration: 120.0,
        stationary_duration: 10.0,
        trajectory: TrajectoryKind::Sinusoid {
            amplitude: Vec3::new(8.0, 5.0, 0.5),
            frequency_hz: Vec3::new(0.03, 0.05, 0.08),
            phase: Vec3::repeat(-FRAC_PI_2),
        },
        yaw: YawProfile {
            amplitude: 0.6,
            frequency_hz: 0.02,
        },
        n_static_targets: 40,
        dynamic_objects: vec![
            DynamicObject {
                velocity: Vec3::new(3.0, -1.5, 0.0),
                targets: 10,
            },
            DynamicObject {
                velocity: Vec3::new(-2.0, 2.0, 0.3),
                targets: 10,
            },
            DynamicObject {
                velocity: Vec3::new(0.5, -3.0, 0.0),
                targets: 10,
            },
        ],
        outlier_fraction: 0.0,
        ghost_fraction: 0.3,
        doppler_noise_std: 0.05,
        position_noise_std: 0.02,
        accel_bias: Vec3::new(0.05, -0.03, 0.08),
        accel_noise_std: 0.02,
        gyro_noise_std: 0.001,
        rng_seed: seed,
        ..Default::default()
    }
}

pub fn outlier_run_config(seed: u64) -> RunConfig {
    let mut rc = RunConfig::default();
    rc.gamma_min = Vec3::repeat(0.01);
    rc.gamma_max = Vec3::repeat(0.2);
    rc.ransac.rng_seed = seed;
    rc.scenario = outlier_scenario(seed);
    rc
}

/// Noise-free, outlier-free scenario with only static targets.
pub fn clean_scenario(seed: u64, trajectory: TrajectoryKind) -> ScenarioConfig {
    ScenarioConfig {
        duration: 30.0,
        stationary_duration: 5.0,
        trajectory,
        yaw: YawProfile {
            amplitude: 0.4,
            frequency_hz: 0.05,
        },
        n_static_targets: 30,
        dynamic_objects: vec![],
        outlier_fraction: 0.0,
        ghost_fraction: 0.0,
        doppler_noise_std: 0.0,
        position_noise_std: 0.0,
        accel_noise_std: 0.0,
        gyro_noise_std: 0.0,
        rng_seed: seed,
        ..Default::default()
    }
}
