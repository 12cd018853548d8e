//! Doppler ego-velocity by least squares, RANSAC outlier rejection, and the
//! zero-velocity test. Together these form the unconstrained baseline
//! estimator (REVE).

use nalgebra::{Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{RadarScan, RadarTarget, Vec3};

/// Normal matrices with a larger condition number are treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e8;

/// Minimal sample size for a 3D velocity hypothesis.
const SAMPLE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacParams {
    pub success_prob: f64,
    pub outlier_prob: f64,
    /// Absolute Doppler residual below which a target counts as inlier, m/s.
    pub inlier_threshold: f64,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            success_prob: 0.99,
            outlier_prob: 0.4,
            inlier_threshold: 0.15,
            rng_seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.success_prob > 0.0 && self.success_prob < 1.0) {
            bad.push(format!("ransac.success_prob = {} not in (0, 1)", self.success_prob));
        }
        if !(self.outlier_prob >= 0.0 && self.outlier_prob < 1.0) {
            bad.push(format!("ransac.outlier_prob = {} not in [0, 1)", self.outlier_prob));
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            bad.push(format!(
                "ransac.inlier_threshold = {} must be > 0",
                self.inlier_threshold
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// Number of hypotheses needed to draw at least one outlier-free minimal
    /// sample with probability `success_prob`.
    pub fn iterations(&self) -> usize {
        let inlier_all = (1.0 - self.outlier_prob).powi(SAMPLE_SIZE as i32);
        let n = (1.0 - self.success_prob).ln() / (1.0 - inlier_all).ln();
        if n.is_finite() {
            (n.ceil() as usize).max(1)
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub velocity: Vec3,
    pub inlier_indices: Vec<usize>,
    pub inlier_ratio: f64,
    /// Set when the refit on the consensus set was ill-conditioned and the
    /// minimal-sample hypothesis was kept instead.
    pub degenerate: bool,
}

/// Least-squares radar velocity: rows `p̂_iᵀ`, right-hand side `-v_D,i`.
pub fn lsq_velocity(targets: &[RadarTarget]) -> Result<Vec3> {
    let (rows, rhs) = design_rows(targets);
    lsq_from_rows(&rows, &rhs)
}

/// Unit directions and negated Doppler values, one per target.
pub fn design_rows(targets: &[RadarTarget]) -> (Vec<Vec3>, Vec<f64>) {
    targets.iter().map(|t| (t.direction(), -t.doppler)).unzip()
}

pub(crate) fn lsq_from_rows(rows: &[Vec3], rhs: &[f64]) -> Result<Vec3> {
    if rows.len() < SAMPLE_SIZE {
        return Err(Error::InsufficientData(format!(
            "{} targets, at least {SAMPLE_SIZE} required",
            rows.len()
        )));
    }
    let mut normal = Matrix3::zeros();
    let mut b = Vec3::zeros();
    for (h, &y) in rows.iter().zip(rhs) {
        normal += h * h.transpose();
        b += h * y;
    }
    solve_normal(&normal, &b)
}

fn solve_normal(normal: &Matrix3<f64>, b: &Vec3) -> Result<Vec3> {
    let eig = SymmetricEigen::new(*normal);
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Err(Error::DegenerateGeometry(format!(
            "normal matrix eigenvalues in [{lmin:e}, {lmax:e}]"
        )));
    }
    normal
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::DegenerateGeometry("normal matrix not positive definite".into()))
}

/// Indices of targets whose Doppler residual against `velocity` is below `threshold`.
pub fn inliers_of(rows: &[Vec3], rhs: &[f64], velocity: &Vec3, threshold: f64) -> Vec<usize> {
    rows.iter()
        .zip(rhs)
        .enumerate()
        .filter(|(_, (h, &y))| (y - h.dot(velocity)).abs() < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// RANSAC over minimal 3-target samples, then a least-squares refit on the
/// largest consensus set. Deterministic given `params.rng_seed`.
pub fn ransac_estimate(scan: &RadarScan, params: &RansacParams) -> Result<RansacResult> {
    let n = scan.targets.len();
    if n < SAMPLE_SIZE {
        return Err(Error::InsufficientData(format!(
            "scan at t = {} has {n} targets, at least {SAMPLE_SIZE} required",
            scan.timestamp
        )));
    }
    let (rows, rhs) = design_rows(&scan.targets);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);

    // (consensus size, hypothesis velocity); first hypothesis wins ties
    let mut best: Option<(usize, Vec3)> = None;
    for _ in 0..params.iterations() {
        let sample = rand::seq::index::sample(&mut rng, n, SAMPLE_SIZE);
        let sample_rows: Vec<Vec3> = sample.iter().map(|i| rows[i]).collect();
        let sample_rhs: Vec<f64> = sample.iter().map(|i| rhs[i]).collect();
        let Ok(v) = lsq_from_rows(&sample_rows, &sample_rhs) else {
            continue;
        };
        let count = rows
            .iter()
            .zip(&rhs)
            .filter(|(h, &y)| (y - h.dot(&v)).abs() < params.inlier_threshold)
            .count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, v));
        }
    }

    let Some((_, hypothesis)) = best else {
        return Err(Error::DegenerateGeometry(format!(
            "every minimal sample of the scan at t = {} is degenerate",
            scan.timestamp
        )));
    };
    let inlier_indices = inliers_of(&rows, &rhs, &hypothesis, params.inlier_threshold);
    let in_rows: Vec<Vec3> = inlier_indices.iter().map(|&i| rows[i]).collect();
    let in_rhs: Vec<f64> = inlier_indices.iter().map(|&i| rhs[i]).collect();
    let (velocity, degenerate) = match lsq_from_rows(&in_rows, &in_rhs) {
        Ok(v) => (v, false),
        Err(_) => (hypothesis, true),
    };
    Ok(RansacResult {
        velocity,
        inlier_ratio: inlier_indices.len() as f64 / n as f64,
        inlier_indices,
        degenerate,
    })
}

/// True when the median absolute Doppler of the scan is below `z_threshold`.
pub fn detect_zero_velocity(scan: &RadarScan, z_threshold: f64) -> Result<bool> {
    if scan.targets.is_empty() {
        return Err(Error::InsufficientData(format!(
            "empty scan at t = {}",
            scan.timestamp
        )));
    }
    let mut speeds: Vec<f64> = scan.targets.iter().map(|t| t.doppler.abs()).collect();
    speeds.sort_by(f64::total_cmp);
    Ok(median_sorted(&speeds) < z_threshold)
}

pub(crate) fn median_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
