//! Closed-form body trajectories: position, velocity and acceleration in nav,
//! plus a yaw profile for attitude and body angular rate.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Rotation, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryKind {
    Stationary,
    ConstantVelocity {
        velocity: Vec3,
    },
    /// `p(τ) = A sin(2π f τ + φ) − A sin φ` per axis.
    Sinusoid {
        amplitude: Vec3,
        frequency_hz: Vec3,
        #[serde(default = "Vec3::zeros")]
        phase: Vec3,
    },
    /// Clamped cubic through `[τ, x, y, z]` knots with zero end velocities.
    WaypointSpline {
        points: Vec<[f64; 4]>,
    },
}

impl Default for TrajectoryKind {
    fn default() -> Self {
        Self::Stationary
    }
}

/// `yaw(τ) = A (1 − cos 2π f τ)`, zero before motion starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct YawProfile {
    pub amplitude: f64,
    pub frequency_hz: f64,
}

impl Default for YawProfile {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            frequency_hz: 0.0,
        }
    }
}

/// Kinematic state of the body at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    /// `C_b^n`.
    pub attitude: Rotation,
    /// True body angular rate `ω^b`.
    pub angular_rate: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
struct Spline {
    knots: Vec<f64>,
    values: [Vec<f64>; 3],
    moments: [Vec<f64>; 3],
}

impl Spline {
    fn new(points: &[[f64; 4]]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(
                "trajectory.points: a waypoint spline needs at least 2 points".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("trajectory.points: non-finite value".into()));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidInput(
                "trajectory.points: knot times must strictly increase".into(),
            ));
        }
        let knots: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let values = [1, 2, 3].map(|c| points.iter().map(|p| p[c]).collect::<Vec<_>>());
        let moments = [0, 1, 2].map(|a| clamped_moments(&knots, &values[a]));
        Ok(Self {
            knots,
            values,
            moments,
        })
    }

    /// Position, velocity and acceleration; constant outside the knot span.
    fn eval(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let n = self.knots.len();
        if t <= self.knots[0] || t >= self.knots[n - 1] {
            let i = if t <= self.knots[0] { 0 } else { n - 1 };
            let p = Vec3::new(self.values[0][i], self.values[1][i], self.values[2][i]);
            return (p, Vec3::zeros(), Vec3::zeros());
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (a, b) = (t1 - t, t - t0);
        let mut out = [Vec3::zeros(); 3];
        for axis in 0..3 {
            let (y0, y1) = (self.values[axis][i], self.values[axis][i + 1]);
            let (m0, m1) = (self.moments[axis][i], self.moments[axis][i + 1]);
            let c0 = y0 / h - m0 * h / 6.0;
            let c1 = y1 / h - m1 * h / 6.0;
            out[0][axis] = m0 * a.powi(3) / (6.0 * h) + m1 * b.powi(3) / (6.0 * h) + c0 * a + c1 * b;
            out[1][axis] = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
            out[2][axis] = m0 * a / h + m1 * b / h;
        }
        (out[0], out[1], out[2])
    }
}

/// Second derivatives at the knots for zero end slopes.
fn clamped_moments(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    a[(0, 0)] = 2.0 * h[0];
    a[(0, 1)] = h[0];
    rhs[0] = 6.0 * slope[0];
    for i in 1..n - 1 {
        a[(i, i - 1)] = h[i - 1];
        a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
        a[(i, i + 1)] = h[i];
        rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
    }
    a[(n - 1, n - 2)] = h[n - 2];
    a[(n - 1, n - 1)] = 2.0 * h[n - 2];
    rhs[n - 1] = -6.0 * slope[n - 2];
    // diagonally dominant, so LU never fails
    a.lu().solve(&rhs).expect("clamped spline system is nonsingular").data.into()
}

/// Analytic truth: at rest until `motion_start`, then the chosen profile.
/// Profiles whose initial velocity is nonzero start with a velocity step.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthModel {
    kind: TrajectoryKind,
    spline: Option<Spline>,
    yaw: YawProfile,
    motion_start: f64,
    initial_roll: f64,
    initial_pitch: f64,
}

impl TruthModel {
    pub fn new(
        kind: TrajectoryKind,
        yaw: YawProfile,
        motion_start: f64,
        initial_roll: f64,
        initial_pitch: f64,
    ) -> Result<Self> {
        let spline = match &kind {
            TrajectoryKind::WaypointSpline { points } => Some(Spline::new(points)?),
            _ => None,
        };
        Ok(Self {
            kind,
            spline,
            yaw,
            motion_start,
            initial_roll,
            initial_pitch,
        })
    }

    fn translation(&self, tau: f64) -> (Vec3, Vec3, Vec3) {
        let zero = Vec3::zeros();
        match &self.kind {
            TrajectoryKind::Stationary => (zero, zero, zero),
            TrajectoryKind::ConstantVelocity { velocity } => {
                if tau <= 0.0 {
                    (zero, zero, zero)
                } else {
                    (velocity * tau, *velocity, zero)
                }
            }
            TrajectoryKind::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => {
                if tau < 0.0 {
                    return (zero, zero, zero);
                }
                let mut p = zero;
                let mut v = zero;
                let mut a = zero;
                for i in 0..3 {
                    let w = TAU * frequency_hz[i];
                    let arg = w * tau + phase[i];
                    p[i] = amplitude[i] * (arg.sin() - phase[i].sin());
                    v[i] = amplitude[i] * w * arg.cos();
                    a[i] = -amplitude[i] * w * w * arg.sin();
                }
                (p, v, a)
            }
            TrajectoryKind::WaypointSpline { .. } => self
                .spline
                .as_ref()
                .expect("spline built in constructor")
                .eval(tau),
        }
    }

    /// Body state at absolute time `t`.
    pub fn state(&self, t: f64) -> BodyState {
        let tau = t - self.motion_start;
        let (position, velocity, acceleration) = self.translation(tau);
        let (yaw, yaw_rate) = if tau > 0.0 {
            let w = TAU * self.yaw.frequency_hz;
            (
                self.yaw.amplitude * (1.0 - (w * tau).cos()),
                self.yaw.amplitude * w * (w * tau).sin(),
            )
        } else {
            (0.0, 0.0)
        };
        let attitude = Rotation::from_euler(self.initial_roll, self.initial_pitch, yaw);
        // yaw turns about the nav z axis, so ω^n = (0, 0, ψ̇) and ω^b = C_n^b ω^n
        let angular_rate = attitude.inverse().rotate(&Vec3::new(0.0, 0.0, yaw_rate));
        BodyState {
            position,
            velocity,
            acceleration,
            attitude,
            angular_rate,
        }
    }
}
