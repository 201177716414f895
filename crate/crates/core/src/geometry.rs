//! Rigid transforms and small geometric helpers shared by the simulator
//! and the tracker.

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on the quaternion norm accepted when deserializing a pose.
const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

/// Closed interval `[min, max]` used for randomized traits and sampler bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Interval<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: T) -> bool {
        self.min <= v && v <= self.max
    }

    pub fn is_ordered(&self) -> bool {
        self.min <= self.max
    }
}

impl Interval<f64> {
    pub(crate) fn validate_positive(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) || !self.is_ordered() {
            return Err(invalid_config(format!(
                "{name}: interval [{}, {}] is empty or not finite",
                self.min, self.max
            )));
        }
        if self.min <= 0.0 {
            return Err(invalid_config(format!("{name}: lengths must be positive")));
        }
        Ok(())
    }

    pub(crate) fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

impl Interval<u32> {
    pub(crate) fn sample(&self, rng: &mut impl rand::Rng) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

/// A camera or organ pose: rotation followed by translation, mapping local
/// coordinates into the parent frame (`p_parent = R p_local + t`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose6DoF {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

/// Serialized layout: translation xyz in meters, quaternion as wxyz.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    translation: [f64; 3],
    rotation: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose6DoF {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let [w, x, y, z] = r.rotation;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "pose quaternion has norm {norm}, expected 1"
            )));
        }
        let rotation = if (norm - 1.0).abs() <= 1e-14 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self {
            translation: Vec3::from(r.translation),
            rotation,
        })
    }
}

impl From<Pose6DoF> for PoseRepr {
    fn from(p: Pose6DoF) -> Self {
        let q = p.rotation.quaternion();
        Self {
            translation: p.translation.into(),
            rotation: [q.w, q.i, q.j, q.k],
        }
    }
}

impl Default for Pose6DoF {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose6DoF {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(t, UnitQuaternion::identity())
    }

    /// Builds a pose whose local axes are the given orthonormal columns.
    pub fn from_axes(origin: Vec3, x: Vec3, y: Vec3, z: Vec3) -> Self {
        let m = Matrix3::from_columns(&[x, y, z]);
        let rot = Rotation3::from_matrix_unchecked(m);
        Self::new(origin, UnitQuaternion::from_rotation_matrix(&rot))
    }

    /// Camera pose (camera-to-world) looking from `eye` at `target` with the
    /// image up-vector aligned to `up`. Camera axes follow the usual
    /// computer-vision convention: x right, y down, z forward.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let forward = target - eye;
        let forward = forward
            .try_normalize(1e-12)
            .ok_or_else(|| invalid_config("look_at: eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| invalid_config("look_at: view direction parallel to up"))?;
        let down = forward.cross(&right);
        Ok(Self::from_axes(eye, right, down, forward))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(-(inv * self.translation), inv)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.translation + self.translation,
            self.rotation * other.rotation,
        )
    }

    /// Rotation applied about `axis` (world frame) by `angle` radians,
    /// keeping the translation.
    pub fn rotated_by(&self, axis: &Unit<Vec3>, angle: f64) -> Self {
        Self::new(
            self.translation,
            UnitQuaternion::from_axis_angle(axis, angle) * self.rotation,
        )
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.rotation.quaternion().norm()
    }
}

/// Axis-aligned bounding box in 3D.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn around(center: Vec3, half: Vec3) -> Self {
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        Self {
            min: self.min + t,
            max: self.max + t,
        }
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}
