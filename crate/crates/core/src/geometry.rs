//! Rigid poses and box extents shared by every layer of the scene graph.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of a quaternion norm from one.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("quaternion norm {0} is not within {QUATERNION_NORM_TOLERANCE} of 1")]
    NonUnitQuaternion(f64),
    #[error("pose component is not finite")]
    NonFinite,
    #[error("bounding box extents must be finite and strictly positive, got {0:?}")]
    BadExtents([f64; 3]),
}

/// An element of SE(3): unit quaternion rotation plus translation in meters.
///
/// The quaternion is stored exactly as given (after the norm check) so that a
/// pose read from a file serializes back to the same bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    /// `[w, x, y, z]`
    q: [f64; 4],
    t: [f64; 3],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::new(r.q, r.t)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            q: p.quaternion_wxyz(),
            t: p.translation_array(),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    /// Builds a pose from a `[w, x, y, z]` quaternion and a translation.
    pub fn new(q_wxyz: [f64; 4], t: [f64; 3]) -> Result<Self, GeometryError> {
        if q_wxyz.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let q = Quaternion::new(q_wxyz[0], q_wxyz[1], q_wxyz[2], q_wxyz[3]);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion(norm));
        }
        Ok(Pose {
            rotation: Unit::new_unchecked(q),
            translation: Vector3::new(t[0], t[1], t[2]),
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pure translation.
    pub fn from_translation(t: [f64; 3]) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(t[0], t[1], t[2]),
        }
    }

    /// Rotation of `yaw` radians about world z, then translation.
    pub fn from_yaw(yaw: f64, t: [f64; 3]) -> Self {
        Pose {
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            translation: Vector3::new(t[0], t[1], t[2]),
        }
    }

    pub fn from_parts(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(world - self.translation))
    }

    /// Geodesic angle in `[0, π]` of the rotation taking `self` to `other`.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation.quaternion().conjugate() * other.rotation.quaternion();
        let v = rel.imag().norm();
        2.0 * v.atan2(rel.w.abs())
    }

    /// Component-wise comparison. `q` and `-q` are treated as the same rotation.
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let a = self.quaternion_wxyz();
        let b = other.quaternion_wxyz();
        let same = a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol);
        let flipped = a.iter().zip(&b).all(|(x, y)| (x + y).abs() <= tol);
        (same || flipped) && (self.translation - other.translation).amax() <= tol
    }

    pub fn with_translation(&self, t: Vector3<f64>) -> Pose {
        Pose {
            rotation: self.rotation,
            translation: t,
        }
    }
}

/// Extents of an oriented box along the local x, y and z axes (width,
/// height, depth), meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BBox3 {
    extents: [f64; 3],
}

impl TryFrom<[f64; 3]> for BBox3 {
    type Error = GeometryError;

    fn try_from(e: [f64; 3]) -> Result<Self, Self::Error> {
        BBox3::new(e)
    }
}

impl From<BBox3> for [f64; 3] {
    fn from(b: BBox3) -> Self {
        b.extents
    }
}

impl BBox3 {
    pub fn new(extents: [f64; 3]) -> Result<Self, GeometryError> {
        if extents.iter().all(|e| e.is_finite() && *e > 0.0) {
            Ok(BBox3 { extents })
        } else {
            Err(GeometryError::BadExtents(extents))
        }
    }

    pub fn cube(side: f64) -> Result<Self, GeometryError> {
        BBox3::new([side; 3])
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn max_extent(&self) -> f64 {
        self.extents.iter().copied().fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &BBox3, tol: f64) -> bool {
        self.extents
            .iter()
            .zip(&other.extents)
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// World-axis-aligned half extents of this box when oriented by `pose`.
    pub fn aabb_half_extents(&self, pose: &Pose) -> Vector3<f64> {
        let r = pose.rotation().to_rotation_matrix();
        let half = Vector3::new(self.extents[0], self.extents[1], self.extents[2]) * 0.5;
        r.matrix().abs() * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_non_unit_quaternion() {
        assert!(matches!(
            Pose::new([1.0, 0.1, 0.0, 0.0], [0.0; 3]),
            Err(GeometryError::NonUnitQuaternion(_))
        ));
        assert!(Pose::new([1.0 + 5e-10, 0.0, 0.0, 0.0], [0.0; 3]).is_ok());
        assert!(Pose::new([f64::NAN, 0.0, 0.0, 0.0], [0.0; 3]).is_err());
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox3::new([0.1, 0.0, 0.1]).is_err());
        assert!(BBox3::new([0.1, -1.0, 0.1]).is_err());
        assert!(BBox3::new([0.1, f64::INFINITY, 0.1]).is_err());
        assert_eq!(BBox3::new([0.2, 0.5, 0.1]).unwrap().max_extent(), 0.5);
    }

    #[test]
    fn json_shape_is_q_and_t() {
        let p = Pose::new([1.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"q":[1.0,0.0,0.0,0.0],"t":[1.0,2.0,3.0]}"#);
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Pose>(r#"{"q":[2,0,0,0],"t":[0,0,0]}"#).is_err());
    }

    #[test]
    fn half_turn_angle() {
        let a = Pose::identity();
        let b = Pose::from_yaw(PI, [0.0; 3]);
        assert!((a.rotation_angle_to(&b) - PI).abs() < 1e-12);
        assert!(a.rotation_angle_to(&a).abs() < 1e-15);
    }

    #[test]
    fn rotated_box_aabb() {
        let b = BBox3::new([2.0, 1.0, 1.0]).unwrap();
        let h = b.aabb_half_extents(&Pose::from_yaw(PI / 2.0, [0.0; 3]));
        assert!((h.x - 0.5).abs() < 1e-12 && (h.y - 1.0).abs() < 1e-12);
    }
}
