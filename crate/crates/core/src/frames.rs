//! Frames, rotations and the timestamped records shared by the rest of the crate.
//!
//! Frame conventions:
//! * nav `{n}`: local tangent NED frame fixed at the start point, gravity `g^n = (0, 0, +g)`.
//! * body `{b}`: IMU frame, forward-right-down.
//! * radar `{r}`: forward-left-up, origin at the transmitter antenna.
//!
//! A [`Rotation`] named `C_a^b` maps vectors expressed in `{a}` into `{b}`.

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Element of SO(3), stored as a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    /// Builds a rotation from quaternion components, renormalizing unless the
    /// input is already unit length to rounding (keeps file round trips exact).
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        if (n - 1.0).abs() <= 1e-14 {
            return Ok(Self(UnitQuaternion::new_unchecked(q)));
        }
        Ok(Self(UnitQuaternion::new_normalize(q)))
    }

    /// Builds a rotation from a direction cosine matrix. The matrix is
    /// projected onto SO(3) first.
    pub fn from_dcm(m: &Matrix3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix(m);
        Self(UnitQuaternion::from_rotation_matrix(&rot))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        match Unit::try_new(*axis, 1e-15) {
            Some(axis) => Self(UnitQuaternion::from_axis_angle(&axis, angle)),
            None => Self::identity(),
        }
    }

    /// Rotation vector (axis times angle) exponential map.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        Self(UnitQuaternion::from_scaled_axis(*v))
    }

    /// Z-Y-X Euler angles: `C_b^n = Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self(UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_euler(0.0, 0.0, yaw)
    }

    /// Returns `(roll, pitch, yaw)`.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.0.euler_angles()
    }

    /// Quaternion components as `[w, x, y, z]`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn dcm(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.transform_vector(v)
    }

    /// Spherical linear interpolation along the shorter arc, `s ∈ [0, 1]`.
    pub fn slerp(&self, other: &Rotation, s: f64) -> Self {
        // nalgebra's slerp panics on exactly antipodal inputs.
        match self.0.try_slerp(&other.0, s, 1e-12) {
            Some(q) => Self(q),
            None => Self(self.0.nlerp(&other.0, s)),
        }
    }

    /// Geodesic distance in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.0.angle_to(&other.0)
    }

    pub fn as_unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }
}

impl From<UnitQuaternion<f64>> for Rotation {
    fn from(q: UnitQuaternion<f64>) -> Self {
        Self(q)
    }
}

/// Skew-symmetric cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rotate(r: &Rotation, v: &Vec3) -> Vec3 {
    r.rotate(v)
}

pub(crate) fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// One 4D radar detection in the radar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarTarget {
    pub position: Vec3,
    /// Radial velocity, m/s. A static target seen from a radar moving with
    /// velocity `v` has `doppler = -p̂ · v`.
    pub doppler: f64,
}

impl RadarTarget {
    pub fn new(position: Vec3, doppler: f64) -> Result<Self> {
        if !all_finite(&position) || !doppler.is_finite() {
            return Err(Error::InvalidInput("non-finite radar target".into()));
        }
        if position.norm() <= 0.0 {
            return Err(Error::InvalidInput("radar target at zero range".into()));
        }
        Ok(Self { position, doppler })
    }

    pub fn direction(&self) -> Vec3 {
        self.position / self.position.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarScan {
    pub timestamp: f64,
    pub targets: Vec<RadarTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub timestamp: f64,
    /// Specific force in the body frame, m/s².
    pub specific_force: Vec3,
    /// Angular rate in the body frame, rad/s.
    pub angular_rate: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub timestamp: f64,
    /// Body origin in the nav frame, m.
    pub position: Vec3,
    /// `C_b^n`.
    pub attitude: Rotation,
}

/// A timestamped value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub t: f64,
    pub value: T,
}

impl<T> Stamped<T> {
    pub fn new(t: f64, value: T) -> Self {
        Self { t, value }
    }
}

/// Radar-to-body extrinsics and the local gravity magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicCalib {
    /// `C_r^b`.
    pub rot_radar_to_body: Rotation,
    /// `p_r^b`: radar origin in the body frame, m.
    pub lever_arm: Vec3,
    pub gravity: f64,
}

impl Default for ExtrinsicCalib {
    fn default() -> Self {
        Self {
            rot_radar_to_body: Rotation::identity(),
            lever_arm: Vec3::zeros(),
            gravity: DEFAULT_GRAVITY,
        }
    }
}

impl ExtrinsicCalib {
    pub fn new(rot_radar_to_body: Rotation, lever_arm: Vec3, gravity: f64) -> Result<Self> {
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(Error::InvalidInput(format!("gravity must be > 0, got {gravity}")));
        }
        if !all_finite(&lever_arm) {
            return Err(Error::InvalidInput("non-finite lever arm".into()));
        }
        Ok(Self {
            rot_radar_to_body,
            lever_arm,
            gravity,
        })
    }

    /// `C_b^r`.
    pub fn rot_body_to_radar(&self) -> Rotation {
        self.rot_radar_to_body.inverse()
    }

    /// `g^n = (0, 0, g)` in NED.
    pub fn gravity_nav(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.gravity)
    }
}

/// Attitude at `t` by slerp between the bracketing pose samples.
///
/// `poses` must be sorted by timestamp.
pub fn interpolate_attitude(poses: &[PoseSample], t: f64) -> Result<Rotation> {
    let (i, s) = bracket(poses, t)?;
    if s == 0.0 {
        return Ok(poses[i].attitude);
    }
    Ok(poses[i].attitude.slerp(&poses[i + 1].attitude, s))
}

/// Linear interpolation of pose positions, same bracketing rule as
/// [`interpolate_attitude`].
pub fn interpolate_position(poses: &[PoseSample], t: f64) -> Result<Vec3> {
    let (i, s) = bracket(poses, t)?;
    if s == 0.0 {
        return Ok(poses[i].position);
    }
    Ok(poses[i].position.lerp(&poses[i + 1].position, s))
}

/// Index of the left bracketing sample and the fraction towards the next one.
fn bracket(poses: &[PoseSample], t: f64) -> Result<(usize, f64)> {
    let (first, last) = match (poses.first(), poses.last()) {
        (Some(f), Some(l)) => (f.timestamp, l.timestamp),
        _ => return Err(Error::InsufficientData("empty pose sequence".into())),
    };
    if !(t >= first && t <= last) {
        return Err(Error::OutOfRange {
            t,
            start: first,
            end: last,
        });
    }
    // first index with timestamp > t
    let upper = poses.partition_point(|p| p.timestamp <= t);
    let i = upper - 1;
    if poses[i].timestamp == t || i + 1 == poses.len() {
        return Ok((i, 0.0));
    }
    let t0 = poses[i].timestamp;
    let t1 = poses[i + 1].timestamp;
    Ok((i, (t - t0) / (t1 - t0)))
}
