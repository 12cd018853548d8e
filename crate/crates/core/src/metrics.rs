//! Dead-reckoning integration and odometry metrics: per-axis velocity RMSE and
//! absolute trajectory error after optional trajectory alignment.

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Rotation, Stamped, Vec3};

/// Default nearest-neighbour association window, half a 10 Hz radar period.
pub const DEFAULT_MAX_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
    pub attitude: Option<Rotation>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        check_increasing(samples.iter().map(|s| s.t))?;
        Ok(Self { samples })
    }

    pub fn from_positions(points: impl IntoIterator<Item = (f64, Vec3)>) -> Result<Self> {
        Self::new(
            points
                .into_iter()
                .map(|(t, position)| TrajectorySample {
                    t,
                    position,
                    attitude: None,
                })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Applies `p ↦ R p + t` to every position.
    pub fn transformed(&self, rotation: &Rotation, translation: &Vec3) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| TrajectorySample {
                    position: rotation.rotate(&s.position) + translation,
                    attitude: s.attitude.map(|a| rotation.compose(&a)),
                    ..*s
                })
                .collect(),
        }
    }
}

fn check_increasing(times: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in times.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::InvalidInput(format!(
                "timestamp {t} at index {i} does not increase (previous {prev})"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Rectangle-rule position propagation `p_k = p_{k-1} + v_k Δt_k`.
///
/// With `t0 = Some(t)` the trajectory starts at `(t, p0)` and every velocity
/// sample is integrated over the interval ending at its timestamp. With
/// `None` the first sample anchors `p0` at its own timestamp.
pub fn integrate_positions(velocities: &[Stamped<Vec3>], p0: Vec3, t0: Option<f64>) -> Result<Trajectory> {
    check_increasing(t0.into_iter().chain(velocities.iter().map(|s| s.t)))?;
    let mut points = Vec::with_capacity(velocities.len() + 1);
    let mut rest = velocities;
    let (mut t_prev, mut p) = match t0 {
        Some(t) => (t, p0),
        None => match velocities.split_first() {
            Some((first, tail)) => {
                rest = tail;
                (first.t, p0)
            }
            None => return Trajectory::from_positions([]),
        },
    };
    points.push((t_prev, p));
    for s in rest {
        p += s.value * (s.t - t_prev);
        t_prev = s.t;
        points.push((s.t, p));
    }
    Trajectory::from_positions(points)
}

/// Index pairs `(i_est, i_gt)` associating each estimate with the nearest
/// ground-truth timestamp no further than `max_dt` away. `gt_times` must be
/// sorted.
pub fn associate(est_times: &[f64], gt_times: &[f64], max_dt: f64) -> Vec<(usize, usize)> {
    est_times
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| {
            let k = gt_times.partition_point(|&g| g < t);
            let candidates = [k.checked_sub(1), (k < gt_times.len()).then_some(k)];
            candidates
                .into_iter()
                .flatten()
                .map(|j| (j, (gt_times[j] - t).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .filter(|&(_, d)| d <= max_dt)
                .map(|(j, _)| (i, j))
        })
        .collect()
}

/// Per-axis RMSE over nearest-timestamp matched pairs.
pub fn rmse_per_axis(est: &[Stamped<Vec3>], gt: &[Stamped<Vec3>], max_dt: f64) -> Result<Vec3> {
    let est_t: Vec<f64> = est.iter().map(|s| s.t).collect();
    let gt_t: Vec<f64> = gt.iter().map(|s| s.t).collect();
    let pairs = associate(&est_t, &gt_t, max_dt);
    if pairs.is_empty() {
        return Err(Error::InsufficientOverlap(format!(
            "no estimate lies within {max_dt} s of a ground-truth sample"
        )));
    }
    let sum_sq = pairs
        .iter()
        .map(|&(i, j)| (est[i].value - gt[j].value).map(|e| e * e))
        .sum::<Vec3>();
    Ok((sum_sq / pairs.len() as f64).map(f64::sqrt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    None,
    Se3,
    #[default]
    PosYaw,
}

impl std::fmt::Display for AlignmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Se3 => "se3",
            Self::PosYaw => "pos-yaw",
        })
    }
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "se3" => Ok(Self::Se3),
            "pos-yaw" | "pos_yaw" | "posyaw" => Ok(Self::PosYaw),
            other => Err(Error::Config(format!(
                "unknown alignment '{other}' (expected none, se3 or pos-yaw)"
            ))),
        }
    }
}

/// Yaw about the nav z axis and translation minimizing
/// `Σ ‖R_z(yaw) est_i + t − gt_i‖²`.
pub fn align_pos_yaw_points(est: &[Vec3], gt: &[Vec3]) -> Result<(f64, Vec3)> {
    if est.len() != gt.len() || est.len() < 2 {
        return Err(Error::InsufficientOverlap(format!(
            "pos-yaw alignment needs at least 2 matched pairs, got {}",
            est.len().min(gt.len())
        )));
    }
    let n = est.len() as f64;
    let mu_e = est.iter().sum::<Vec3>() / n;
    let mu_g = gt.iter().sum::<Vec3>() / n;
    let (mut s_cos, mut s_sin) = (0.0, 0.0);
    for (e, g) in est.iter().zip(gt) {
        let e = e - mu_e;
        let g = g - mu_g;
        s_cos += e.x * g.x + e.y * g.y;
        s_sin += e.x * g.y - e.y * g.x;
    }
    if s_cos.hypot(s_sin) <= 1e-12 * (1.0 + horizontal_spread(est, &mu_e) * horizontal_spread(gt, &mu_g)) {
        return Err(Error::DegenerateGeometry(
            "no horizontal spread to fix the yaw".into(),
        ));
    }
    let yaw = s_sin.atan2(s_cos);
    let rotation = Rotation::from_yaw(yaw);
    Ok((yaw, mu_g - rotation.rotate(&mu_e)))
}

fn horizontal_spread(points: &[Vec3], mean: &Vec3) -> f64 {
    points
        .iter()
        .map(|p| (p.x - mean.x).hypot(p.y - mean.y))
        .fold(0.0, f64::max)
}

/// Closed-form rigid alignment (rotation + translation, scale fixed to 1)
/// minimizing `Σ ‖R est_i + t − gt_i‖²`.
pub fn align_umeyama_points(est: &[Vec3], gt: &[Vec3]) -> Result<(Rotation, Vec3, f64)> {
    if est.len() != gt.len() || est.len() < 3 {
        return Err(Error::InsufficientOverlap(format!(
            "SE(3) alignment needs at least 3 matched pairs, got {}",
            est.len().min(gt.len())
        )));
    }
    let n = est.len() as f64;
    let mu_e = est.iter().sum::<Vec3>() / n;
    let mu_g = gt.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for (e, g) in est.iter().zip(gt) {
        cov += (g - mu_g) * (e - mu_e).transpose();
    }
    cov /= n;
    let svd = SVD::new(cov, true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::DegenerateGeometry("SVD failed".into()));
    };
    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = Rotation::from_dcm(&(u * sign * v_t));
    let translation = mu_g - rotation.rotate(&mu_e);
    Ok((rotation, translation, 1.0))
}

fn matched_points(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<(Vec<f64>, Vec<Vec3>, Vec<Vec3>)> {
    let pairs = associate(&est.times(), &gt.times(), max_dt);
    if pairs.is_empty() {
        return Err(Error::InsufficientOverlap(format!(
            "no trajectory samples matched within {max_dt} s"
        )));
    }
    let t = pairs.iter().map(|&(i, _)| est.samples[i].t).collect();
    let e = pairs.iter().map(|&(i, _)| est.samples[i].position).collect();
    let g = pairs.iter().map(|&(_, j)| gt.samples[j].position).collect();
    Ok((t, e, g))
}

pub fn align_pos_yaw(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<(f64, Vec3)> {
    let (_, e, g) = matched_points(est, gt, max_dt)?;
    align_pos_yaw_points(&e, &g)
}

pub fn align_umeyama(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<(Rotation, Vec3, f64)> {
    let (_, e, g) = matched_points(est, gt, max_dt)?;
    align_umeyama_points(&e, &g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub alignment: AlignmentMode,
    /// Applied rotation as `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub timestamps: Vec<f64>,
    pub per_timestamp_errors: Vec<f64>,
}

/// Aligned estimate and matched ground truth, one row per associated epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair {
    pub t: f64,
    pub est: Vec3,
    pub gt: Vec3,
    pub error: f64,
}

/// Absolute trajectory error statistics after the chosen alignment.
pub fn ate(est: &Trajectory, gt: &Trajectory, alignment: AlignmentMode, max_dt: f64) -> Result<AteReport> {
    ate_with_pairs(est, gt, alignment, max_dt).map(|(r, _)| r)
}

pub fn ate_with_pairs(
    est: &Trajectory,
    gt: &Trajectory,
    alignment: AlignmentMode,
    max_dt: f64,
) -> Result<(AteReport, Vec<AlignedPair>)> {
    let (times, e, g) = matched_points(est, gt, max_dt)?;
    let (rotation, translation) = match alignment {
        AlignmentMode::None => (Rotation::identity(), Vec3::zeros()),
        AlignmentMode::PosYaw => {
            let (yaw, t) = align_pos_yaw_points(&e, &g)?;
            (Rotation::from_yaw(yaw), t)
        }
        AlignmentMode::Se3 => {
            let (r, t, _) = align_umeyama_points(&e, &g)?;
            (r, t)
        }
    };
    let pairs: Vec<AlignedPair> = times
        .iter()
        .zip(e.iter().zip(&g))
        .map(|(&t, (e, g))| {
            let aligned = rotation.rotate(e) + translation;
            AlignedPair {
                t,
                est: aligned,
                gt: *g,
                error: (aligned - g).norm(),
            }
        })
        .collect();
    let errors: Vec<f64> = pairs.iter().map(|p| p.error).collect();
    let n = errors.len() as f64;
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let report = AteReport {
        rmse: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        mean: errors.iter().sum::<f64>() / n,
        median: crate::ransac::median_sorted(&sorted),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        alignment,
        rotation: rotation.quaternion(),
        translation: [translation.x, translation.y, translation.z],
        timestamps: times,
        per_timestamp_errors: errors,
    };
    Ok((report, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn stamped(points: &[(f64, [f64; 3])]) -> Vec<Stamped<Vec3>> {
        points
            .iter()
            .map(|&(t, v)| Stamped::new(t, Vec3::from(v)))
            .collect()
    }

    fn wiggly(n: usize) -> Trajectory {
        Trajectory::from_positions((0..n).map(|k| {
            let s = k as f64 * 0.1;
            (s, Vec3::new(2.0 * s.sin() + s, s.cos() * 1.5, 0.3 * (2.0 * s).sin()))
        }))
        .unwrap()
    }

    #[test]
    fn integrate_constant_velocity() {
        let v: Vec<_> = (1..=10).map(|k| Stamped::new(k as f64 * 0.1, Vec3::x())).collect();
        let traj = integrate_positions(&v, Vec3::zeros(), Some(0.0)).unwrap();
        assert_eq!(traj.len(), 11);
        assert_abs_diff_eq!(traj.samples().last().unwrap().position, Vec3::x(), epsilon = 1e-12);
        let anchored = integrate_positions(&v, Vec3::zeros(), None).unwrap();
        assert_eq!(anchored.len(), 10);
        assert_abs_diff_eq!(anchored.samples()[9].position, Vec3::new(0.9, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn integrate_zero_velocity() {
        let p0 = Vec3::new(1.0, 2.0, 3.0);
        let v: Vec<_> = (1..=5).map(|k| Stamped::new(k as f64, Vec3::zeros())).collect();
        let traj = integrate_positions(&v, p0, Some(0.0)).unwrap();
        assert!(traj.samples().iter().all(|s| s.position == p0));
    }

    #[test]
    fn integrate_sinusoid_within_rectangle_bound() {
        // x(t) = sin(t), v(t) = cos(t); right-endpoint rule error ≤ T·dt·max|a|/2
        let dt = 0.01;
        let n = 500;
        let v: Vec<_> = (1..=n)
            .map(|k| {
                let t = k as f64 * dt;
                Stamped::new(t, Vec3::new(t.cos(), 0.0, 0.0))
            })
            .collect();
        let traj = integrate_positions(&v, Vec3::zeros(), Some(0.0)).unwrap();
        let bound = (n as f64 * dt) * dt / 2.0;
        for s in traj.samples() {
            assert!((s.position.x - s.t.sin()).abs() <= bound + 1e-12);
        }
        let last = traj.samples().last().unwrap();
        assert!((last.position.x - last.t.sin()).abs() > 0.0);
    }

    #[test]
    fn integrate_rejects_unordered() {
        let v = stamped(&[(0.2, [0.0; 3]), (0.1, [0.0; 3])]);
        assert!(integrate_positions(&v, Vec3::zeros(), None).is_err());
        let v = stamped(&[(0.1, [0.0; 3])]);
        assert!(integrate_positions(&v, Vec3::zeros(), Some(0.1)).is_err());
    }

    #[test]
    fn rmse_examples() {
        let gt = stamped(&[(0.0, [1.0, 2.0, 3.0]), (0.1, [0.0, 0.0, 1.0]), (0.2, [4.0, 4.0, 4.0])]);
        assert_eq!(rmse_per_axis(&gt, &gt, 0.05).unwrap(), Vec3::zeros());
        let shifted: Vec<_> = gt.iter().map(|s| Stamped::new(s.t + 0.01, s.value + Vec3::new(0.1, 0.0, 0.0))).collect();
        assert_abs_diff_eq!(rmse_per_axis(&shifted, &gt, 0.05).unwrap(), Vec3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        let e = 0.3;
        let pm = stamped(&[(0.0, [1.0 + e, 2.0, 3.0]), (0.1, [0.0 - e, 0.0, 1.0])]);
        assert_abs_diff_eq!(rmse_per_axis(&pm, &gt, 0.05).unwrap().x, e, epsilon = 1e-15);
        let far = stamped(&[(5.0, [0.0; 3])]);
        assert!(matches!(rmse_per_axis(&far, &gt, 0.05), Err(Error::InsufficientOverlap(_))));
    }

    #[test]
    fn association_nearest_within_window() {
        let gt = [0.0, 0.1, 0.2, 0.3];
        let pairs = associate(&[0.04, 0.16, 0.34, 1.0], &gt, 0.05);
        assert_eq!(pairs, vec![(0, 0), (1, 2), (2, 3)]);
    }

    #[test]
    fn pos_yaw_exact_model() {
        let gt = wiggly(50);
        let est = gt.transformed(&Rotation::from_yaw(-FRAC_PI_2), &Vec3::new(-5.0, 1.0, 0.5));
        // est → gt needs the inverse transform
        let (yaw, t) = align_pos_yaw(&est, &gt, 1e-9).unwrap();
        let back = est.transformed(&Rotation::from_yaw(yaw), &t);
        for (a, b) in back.samples().iter().zip(gt.samples()) {
            assert!((a.position - b.position).norm() < 1e-9);
        }
        assert_abs_diff_eq!(yaw, FRAC_PI_2, epsilon = 1e-12);

        let rotated = Trajectory::from_positions(gt.samples().iter().map(|s| {
            (s.t, Rotation::from_yaw(FRAC_PI_2).rotate(&s.position) + Vec3::new(1.0, 2.0, 3.0))
        }))
        .unwrap();
        let (yaw, t) = align_pos_yaw(&gt, &rotated, 1e-9).unwrap();
        assert_abs_diff_eq!(yaw, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(t, Vec3::new(1.0, 2.0, 3.0), epsilon = 1e-9);
        let (yaw, t) = align_pos_yaw(&gt, &gt, 1e-9).unwrap();
        assert_abs_diff_eq!(yaw, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn pos_yaw_degenerate() {
        let line = Trajectory::from_positions((0..5).map(|k| (k as f64, Vec3::new(0.0, 0.0, k as f64)))).unwrap();
        assert!(matches!(
            align_pos_yaw(&line, &line, 0.01),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn pos_yaw_is_optimal_against_perturbations() {
        // noisy copy of a planted transform; every perturbation must do worse
        let gt = wiggly(60);
        let truth = Rotation::from_yaw(0.7);
        let est = Trajectory::from_positions(gt.samples().iter().enumerate().map(|(k, s)| {
            let noise = Vec3::new((k as f64 * 1.3).sin(), (k as f64 * 2.1).cos(), (k as f64 * 0.7).sin()) * 0.05;
            (s.t, truth.rotate(&s.position) + Vec3::new(0.3, -0.2, 0.1) + noise)
        }))
        .unwrap();
        let (yaw, t) = align_pos_yaw(&est, &gt, 1e-9).unwrap();
        let cost = |yaw: f64, t: &Vec3| {
            let r = Rotation::from_yaw(yaw);
            est.samples()
                .iter()
                .zip(gt.samples())
                .map(|(e, g)| (r.rotate(&e.position) + t - g.position).norm_squared())
                .sum::<f64>()
        };
        let best = cost(yaw, &t);
        let mut state = 12345u64;
        let mut uniform = || {
            state = crate::estimator::derive_seed(state, 1);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..10_000 {
            let scale = 10f64.powf(-3.0 * uniform().abs());
            let dy = uniform() * scale;
            let dt = Vec3::new(uniform(), uniform(), uniform()) * scale;
            assert!(best <= cost(yaw + dy, &(t + dt)) + 1e-12);
        }
    }

    /// Horn's closed-form absolute orientation via the 4×4 quaternion
    /// eigenproblem, independent of the SVD path.
    fn horn(est: &[Vec3], gt: &[Vec3]) -> (Rotation, Vec3) {
        let n = est.len() as f64;
        let me = est.iter().sum::<Vec3>() / n;
        let mg = gt.iter().sum::<Vec3>() / n;
        let mut s = Matrix3::zeros();
        for (e, g) in est.iter().zip(gt) {
            s += (e - me) * (g - mg).transpose();
        }
        let (sxx, sxy, sxz) = (s[(0, 0)], s[(0, 1)], s[(0, 2)]);
        let (syx, syy, syz) = (s[(1, 0)], s[(1, 1)], s[(1, 2)]);
        let (szx, szy, szz) = (s[(2, 0)], s[(2, 1)], s[(2, 2)]);
        let k = nalgebra::Matrix4::new(
            sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
            syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
            szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
            sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
        );
        let eig = nalgebra::SymmetricEigen::new(k);
        let imax = eig.eigenvalues.imax();
        let q = eig.eigenvectors.column(imax);
        let r = Rotation::from_quaternion(q[0], q[1], q[2], q[3]).unwrap();
        (r, mg - r.rotate(&me))
    }

    #[test]
    fn umeyama_exact_and_identity() {
        let gt = wiggly(40);
        let r = Rotation::from_euler(0.3, -0.2, 1.1);
        let t = Vec3::new(1.0, -2.0, 0.5);
        let moved = gt.transformed(&r, &t);
        let (rot, trans, scale) = align_umeyama(&gt, &moved, 1e-9).unwrap();
        assert_eq!(scale, 1.0);
        assert!(rot.angle_to(&r) < 1e-9);
        assert_abs_diff_eq!(trans, t, epsilon = 1e-9);
        let (rot, trans, _) = align_umeyama(&gt, &gt, 1e-9).unwrap();
        assert!(rot.angle_to(&Rotation::identity()) < 1e-9);
        assert_abs_diff_eq!(trans, Vec3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn ate_examples() {
        let gt = wiggly(100);
        for mode in [AlignmentMode::None, AlignmentMode::PosYaw, AlignmentMode::Se3] {
            let r = ate(&gt, &gt, mode, DEFAULT_MAX_DT).unwrap();
            assert!(r.rmse < 1e-9 && r.max < 1e-9, "{mode:?}: {r:?}");
        }
        let offset = gt.transformed(&Rotation::identity(), &Vec3::new(3.0, -1.0, 2.0));
        let r = ate(&offset, &gt, AlignmentMode::PosYaw, DEFAULT_MAX_DT).unwrap();
        assert!(r.rmse < 1e-9 && r.max < 1e-9);

        // linear drift of 0.01 m per step along x
        let drift = Trajectory::from_positions(
            gt.samples().iter().enumerate().map(|(k, s)| (s.t, s.position + Vec3::new(0.01 * (k + 1) as f64, 0.0, 0.0))),
        )
        .unwrap();
        let r = ate(&drift, &gt, AlignmentMode::None, DEFAULT_MAX_DT).unwrap();
        assert_abs_diff_eq!(r.max, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.min, 0.01, epsilon = 1e-12);
        let mut sum_sq = 0.0;
        for k in 1..=100 {
            let e = 0.01 * k as f64;
            sum_sq += e * e;
        }
        assert_abs_diff_eq!(r.rmse, (sum_sq / 100.0).sqrt(), epsilon = 1e-12);
        assert!(r.min <= r.median && r.median <= r.max);
        assert_eq!(r.per_timestamp_errors.len(), 100);
    }

    #[test]
    fn ate_no_overlap() {
        let a = Trajectory::from_positions([(0.0, Vec3::zeros()), (1.0, Vec3::x())]).unwrap();
        let b = Trajectory::from_positions([(10.0, Vec3::zeros()), (11.0, Vec3::x())]).unwrap();
        assert!(matches!(ate(&a, &b, AlignmentMode::None, 0.05), Err(Error::InsufficientOverlap(_))));
    }

    fn arb_cloud() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -2.0..2.0f64), 5..40)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn umeyama_matches_horn(cloud in arb_cloud(), rv in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), noise_seed in 0u64..1000) {
            let r = Rotation::from_rotation_vector(&Vec3::new(rv.0, rv.1, rv.2));
            let gt: Vec<Vec3> = cloud.iter().enumerate().map(|(k, p)| {
                let s = crate::estimator::derive_seed(noise_seed, k as u64);
                let jitter = Vec3::new((s & 0xff) as f64, ((s >> 8) & 0xff) as f64, ((s >> 16) & 0xff) as f64) / 2550.0;
                r.rotate(p) + Vec3::new(0.5, 1.0, -1.0) + jitter
            }).collect();
            let (ru, tu, _) = align_umeyama_points(&cloud, &gt).unwrap();
            let (rh, th) = horn(&cloud, &gt);
            prop_assert!(ru.angle_to(&rh) < 1e-8, "angle {}", ru.angle_to(&rh));
            prop_assert!((tu - th).norm() < 1e-7);
        }

        #[test]
        fn ate_invariant_under_yaw_and_translation(yaw in -3.0..3.0f64, t in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)) {
            let gt = wiggly(80);
            let est = Trajectory::from_positions(gt.samples().iter().enumerate().map(|(k, s)| {
                (s.t, s.position + Vec3::new((k as f64).sin(), (k as f64 * 0.3).cos(), 0.2) * 0.1)
            })).unwrap();
            let base = ate(&est, &gt, AlignmentMode::PosYaw, DEFAULT_MAX_DT).unwrap();
            let moved = est.transformed(&Rotation::from_yaw(yaw), &Vec3::new(t.0, t.1, t.2));
            let other = ate(&moved, &gt, AlignmentMode::PosYaw, DEFAULT_MAX_DT).unwrap();
            prop_assert!((base.rmse - other.rmse).abs() < 1e-9);

            let r3 = Rotation::from_euler(yaw * 0.3, -yaw * 0.2, yaw);
            let base = ate(&est, &gt, AlignmentMode::Se3, DEFAULT_MAX_DT).unwrap();
            let moved = est.transformed(&r3, &Vec3::new(t.0, t.1, t.2));
            let other = ate(&moved, &gt, AlignmentMode::Se3, DEFAULT_MAX_DT).unwrap();
            prop_assert!((base.rmse - other.rmse).abs() < 1e-9);
        }

        #[test]
        fn rmse_permutation_and_scaling(errs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 2..30), k in 0.1..10.0f64) {
            let gt: Vec<_> = (0..errs.len()).map(|i| Stamped::new(i as f64, Vec3::zeros())).collect();
            let est: Vec<_> = errs.iter().enumerate().map(|(i, e)| Stamped::new(i as f64, Vec3::new(e.0, e.1, e.2))).collect();
            let base = rmse_per_axis(&est, &gt, 0.1).unwrap();
            // reversing values keeps the multiset of errors
            let rev: Vec<_> = est.iter().rev().zip(&gt).map(|(e, g)| Stamped::new(g.t, e.value)).collect();
            let permuted = rmse_per_axis(&rev, &gt, 0.1).unwrap();
            prop_assert!((base - permuted).amax() < 1e-12);
            let scaled: Vec<_> = est.iter().map(|e| Stamped::new(e.t, e.value * k)).collect();
            let s = rmse_per_axis(&scaled, &gt, 0.1).unwrap();
            prop_assert!((s - base * k).amax() < 1e-12 * (1.0 + k));
        }
    }
}
