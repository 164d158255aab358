//! Change detection from a camera: compare the objects the graph says should
//! be in view with what the detector reports, and turn the differences into
//! update records once they are consistent across frames.

mod assignment;
mod associate;
mod confirm;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decay::{pose_distance, DecayEstimator};
use crate::geometry::{BBox3, Pose};
use crate::graph::{normalize_label, ObjectId, SceneGraph};

pub use assignment::min_cost_assignment;
pub use associate::{associate, AssociationResult};
pub use confirm::{confirm, ConfirmationStore, Confirmed};

pub const DEFAULT_EPSILON: f64 = 0.25;
pub const DEFAULT_ROT_WEIGHT: f64 = 0.0;
pub const DEFAULT_CONFIRM_FRAMES: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("field of view must lie in (0, π), got {0}")]
    BadFov(f64),
    #[error("range must satisfy 0 < min < max, got [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("static tolerance must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("confirmation needs k >= 1")]
    BadK,
    #[error("rotation weight must be finite and non-negative, got {0}")]
    BadRotWeight(f64),
}

/// Pinhole-style view volume: a rectangular frustum looking down the local
/// +x axis (y left, z up), cut to a range band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    fov_h: f64,
    fov_v: f64,
    min_range: f64,
    max_range: f64,
}

impl CameraModel {
    pub fn new(fov_h: f64, fov_v: f64, min_range: f64, max_range: f64) -> Result<Self, PerceptionError> {
        for fov in [fov_h, fov_v] {
            if !(fov > 0.0 && fov < std::f64::consts::PI) {
                return Err(PerceptionError::BadFov(fov));
            }
        }
        if !(min_range > 0.0 && min_range < max_range && max_range.is_finite()) {
            return Err(PerceptionError::BadRange(min_range, max_range));
        }
        Ok(CameraModel {
            fov_h,
            fov_v,
            min_range,
            max_range,
        })
    }

    /// Strict test: points exactly on a frustum plane or range limit are
    /// outside.
    pub fn sees(&self, camera: &Pose, point: &nalgebra::Vector3<f64>) -> bool {
        let local = camera.to_local(point);
        let range = local.norm();
        if !(range > self.min_range && range < self.max_range) || local.x <= 0.0 {
            return false;
        }
        local.y.atan2(local.x).abs() < self.fov_h / 2.0 && local.z.atan2(local.x).abs() < self.fov_v / 2.0
    }
}

/// Scenario-file perception block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    pub fov_h: f64,
    pub fov_v: f64,
    pub range: [f64; 2],
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub rot_weight: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_k() -> usize {
    DEFAULT_CONFIRM_FRAMES
}

impl PerceptionConfig {
    pub fn camera(&self) -> Result<CameraModel, PerceptionError> {
        CameraModel::new(self.fov_h, self.fov_v, self.range[0], self.range[1])
    }

    pub fn gate(&self) -> Result<GeometricGate, PerceptionError> {
        GeometricGate::new(self.epsilon, self.rot_weight)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        self.camera()?;
        self.gate()?;
        if self.k == 0 {
            return Err(PerceptionError::BadK);
        }
        Ok(())
    }
}

/// Static-vs-moved decision: `pose_distance < epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricGate {
    pub epsilon: f64,
    pub rot_weight: f64,
}

impl Default for GeometricGate {
    fn default() -> Self {
        GeometricGate {
            epsilon: DEFAULT_EPSILON,
            rot_weight: DEFAULT_ROT_WEIGHT,
        }
    }
}

impl GeometricGate {
    pub fn new(epsilon: f64, rot_weight: f64) -> Result<Self, PerceptionError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(PerceptionError::BadEpsilon(epsilon));
        }
        if !(rot_weight >= 0.0 && rot_weight.is_finite()) {
            return Err(PerceptionError::BadRotWeight(rot_weight));
        }
        Ok(GeometricGate { epsilon, rot_weight })
    }

    pub fn distance(&self, a: &Pose, b: &Pose) -> f64 {
        pose_distance(a, b, self.rot_weight)
    }

    pub fn passes(&self, a: &Pose, b: &Pose) -> bool {
        geometric_match(a, b, self.epsilon, self.rot_weight)
    }
}

/// One detector output: estimated pose, box and class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub bbox: BBox3,
    pub label: String,
}

impl Observation {
    pub fn new(pose: Pose, bbox: BBox3, label: &str) -> Self {
        Observation {
            pose,
            bbox,
            label: normalize_label(label),
        }
    }
}

/// Decides whether two class labels name the same kind of object.
pub trait SemanticMatcher {
    fn matches(&self, a: &str, b: &str) -> bool;
}

/// Label equality after normalization, widened by synonym groups.
#[derive(Debug, Clone)]
pub struct SynonymMatcher {
    groups: Vec<BTreeSet<String>>,
}

impl Default for SynonymMatcher {
    fn default() -> Self {
        SynonymMatcher::new(&[
            &["tv remote", "remote control", "remote"],
            &["sofa", "couch"],
            &["tv", "television"],
            &["refrigerator", "fridge"],
        ])
    }
}

impl SynonymMatcher {
    pub fn new(groups: &[&[&str]]) -> Self {
        SynonymMatcher {
            groups: groups
                .iter()
                .map(|g| g.iter().map(|s| normalize_label(s)).collect())
                .collect(),
        }
    }

    /// Exact label equality only.
    pub fn exact() -> Self {
        SynonymMatcher { groups: Vec::new() }
    }
}

impl SemanticMatcher for SynonymMatcher {
    fn matches(&self, a: &str, b: &str) -> bool {
        let (a, b) = (normalize_label(a), normalize_label(b));
        a == b || self.groups.iter().any(|g| g.contains(&a) && g.contains(&b))
    }
}

pub fn semantic_match(a: &str, b: &str, matcher: &dyn SemanticMatcher) -> bool {
    matcher.matches(a, b)
}

/// True iff the poses are strictly closer than `epsilon`.
pub fn geometric_match(node_pose: &Pose, obs_pose: &Pose, epsilon: f64, rot_weight: f64) -> bool {
    pose_distance(node_pose, obs_pose, rot_weight) < epsilon
}

/// Attached, movable objects whose centroid the camera would see from
/// `robot_pose`, in id order. Held objects are detached and never listed.
pub fn expected_visible(graph: &SceneGraph, robot_pose: &Pose, cam: &CameraModel) -> Vec<ObjectId> {
    graph
        .objects()
        .filter(|o| o.attached && o.is_dynamic())
        .filter(|o| cam.sees(robot_pose, o.pose.translation()))
        .map(|o| o.id.clone())
        .collect()
}

/// Drops detections of immovable classes; they are never change candidates.
pub fn filter_dynamic(observed: Vec<Observation>, decay: &dyn DecayEstimator) -> Vec<Observation> {
    observed
        .into_iter()
        .filter(|o| decay.decay_rate(&o.label) > 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn cam() -> CameraModel {
        CameraModel::new(FRAC_PI_2, FRAC_PI_3, 0.3, 6.0).unwrap()
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0.0, 1.0, 0.3, 6.0).is_err());
        assert!(CameraModel::new(std::f64::consts::PI, 1.0, 0.3, 6.0).is_err());
        assert!(CameraModel::new(1.0, 1.0, 6.0, 6.0).is_err());
        assert!(CameraModel::new(1.0, 1.0, 0.0, 6.0).is_err());
    }

    #[test]
    fn frustum_boundaries_are_strict() {
        let c = cam();
        let origin = Pose::identity();
        assert!(c.sees(&origin, &nalgebra::Vector3::new(2.0, 0.0, 0.0)));
        // atan2(1, 1) is exactly π/4 = fov_h / 2.
        assert!(!c.sees(&origin, &nalgebra::Vector3::new(1.0, 1.0, 0.0)));
        assert!(c.sees(&origin, &nalgebra::Vector3::new(1.0, 0.999, 0.0)));
        assert!(!c.sees(&origin, &nalgebra::Vector3::new(6.0, 0.0, 0.0)));
        assert!(!c.sees(&origin, &nalgebra::Vector3::new(0.3, 0.0, 0.0)));
        assert!(!c.sees(&origin, &nalgebra::Vector3::new(-2.0, 0.0, 0.0)));
        let turned = Pose::from_yaw(std::f64::consts::PI, [0.0; 3]);
        assert!(c.sees(&turned, &nalgebra::Vector3::new(-2.0, 0.0, 0.0)));
    }

    #[test]
    fn semantic_defaults() {
        let m = SynonymMatcher::default();
        assert!(semantic_match("mug", "mug", &m));
        assert!(semantic_match("tv remote", "Remote Control", &m));
        assert!(semantic_match("remote control", "tv remote", &m));
        assert!(!semantic_match("banana", "book", &m));
    }

    #[test]
    fn geometric_examples() {
        let a = Pose::from_translation([1.0, 1.0, 1.0]);
        assert!(geometric_match(&a, &a, 0.25, 0.0));
        let b = Pose::from_translation([1.5, 1.0, 1.0]);
        assert!(!geometric_match(&a, &b, 0.25, 0.0));
        assert!(!geometric_match(&a, &b, 0.5, 0.0));
        assert!(geometric_match(&a, &b, 0.5000001, 0.0));
    }
}
