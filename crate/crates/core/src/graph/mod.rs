//! Two-layer scene graph: rooms linked by access edges, objects linked to
//! rooms by belongs-to edges. Objects never link to each other.
//!
//! All mutation goes through the primitives on [`SceneGraph`]. Every one of
//! them either succeeds and leaves the graph invariants intact, or fails
//! without touching the graph.

mod file;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox3, GeometryError, Pose};

pub use file::ParseError;

/// Field tolerance used by structural graph comparison.
pub const GRAPH_EQ_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(String);

macro_rules! string_id {
    ($t:ty) => {
        impl $t {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $t {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(ObjectId);
string_id!(RoomId);

/// Lowercases and collapses whitespace; the canonical form of every label.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: ObjectId,
    pub label: String,
    pub pose: Pose,
    pub bbox: BBox3,
    /// 1/s. Zero marks the object immovable.
    pub decay_rate: f64,
    /// Seconds since the scenario epoch.
    pub last_seen: f64,
    /// False while the robot is holding the object.
    pub attached: bool,
    /// Set when the pose is a placeholder from a topological report.
    #[serde(default)]
    pub pose_provisional: bool,
}

impl ObjectNode {
    pub fn is_dynamic(&self) -> bool {
        self.decay_rate > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomNode {
    pub id: RoomId,
    pub label: String,
    pub pose: Pose,
    pub bbox: BBox3,
}

impl RoomNode {
    pub fn contains(&self, point: &Vector3<f64>) -> bool {
        let half = self.bbox.aabb_half_extents(&self.pose);
        let d = (point - self.pose.translation()).abs();
        d.x <= half.x && d.y <= half.y && d.z <= half.z
    }

    /// Pose at the room's center with identity rotation.
    pub fn centroid(&self) -> Pose {
        Pose::from_translation([
            self.pose.translation().x,
            self.pose.translation().y,
            self.pose.translation().z,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("object `{object}` is in room `{actual}`, not `{expected}`")]
    WrongRoom {
        object: ObjectId,
        expected: String,
        actual: String,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(#[from] GeometryError),
    #[error("decay rate must be finite and non-negative, got {0}")]
    InvalidDecayRate(f64),
    #[error("timestamp must be finite and non-negative, got {0}")]
    InvalidTimestamp(f64),
    #[error("object `{0}` is already detached")]
    AlreadyDetached(ObjectId),
    #[error("object `{0}` is already attached")]
    AlreadyAttached(ObjectId),
    #[error("no room contains point ({0:.3}, {1:.3}, {2:.3})")]
    NoContainingRoom(f64, f64, f64),
    #[error("room label `{0}` already exists")]
    DuplicateRoomLabel(String),
    #[error("id `{0}` already exists")]
    DuplicateId(String),
    #[error("access edge must join two distinct rooms (`{0}`)")]
    SelfAccess(String),
    #[error("empty label")]
    EmptyLabel,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// The mutable world model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneGraph {
    epoch: f64,
    rooms: BTreeMap<RoomId, RoomNode>,
    objects: BTreeMap<ObjectId, ObjectNode>,
    belongs_to: BTreeMap<ObjectId, RoomId>,
    access: BTreeSet<(RoomId, RoomId)>,
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidTimestamp(t))
    }
}

fn check_decay(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(GraphError::InvalidDecayRate(rate))
    }
}

fn slug(label: &str) -> String {
    label.replace(' ', "_")
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_epoch(epoch: f64) -> Self {
        SceneGraph {
            epoch,
            ..Self::default()
        }
    }

    pub fn epoch(&self) -> f64 {
        self.epoch
    }

    pub fn rooms(&self) -> impl Iterator<Item = &RoomNode> {
        self.rooms.values()
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values()
    }

    pub fn access_edges(&self) -> impl Iterator<Item = &(RoomId, RoomId)> {
        self.access.iter()
    }

    pub fn belongs_to(&self) -> &BTreeMap<ObjectId, RoomId> {
        &self.belongs_to
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectNode> {
        self.objects.get(id)
    }

    pub fn room(&self, id: &RoomId) -> Option<&RoomNode> {
        self.rooms.get(id)
    }

    pub fn room_by_label(&self, label: &str) -> Option<&RoomNode> {
        let label = normalize_label(label);
        self.rooms.values().find(|r| r.label == label)
    }

    fn room_id_for(&self, label: &str) -> Result<RoomId> {
        self.room_by_label(label)
            .map(|r| r.id.clone())
            .ok_or_else(|| GraphError::UnknownRoom(label.to_string()))
    }

    /// The room an attached object belongs to.
    pub fn room_of(&self, id: &ObjectId) -> Option<&RoomNode> {
        self.belongs_to.get(id).and_then(|r| self.rooms.get(r))
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn add_room(&mut self, id: RoomId, label: &str, pose: Pose, bbox: BBox3) -> Result<()> {
        let label = normalize_label(label);
        if label.is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        if self.rooms.contains_key(&id) {
            return Err(GraphError::DuplicateId(id.0));
        }
        if self.rooms.values().any(|r| r.label == label) {
            return Err(GraphError::DuplicateRoomLabel(label));
        }
        self.rooms.insert(
            id.clone(),
            RoomNode {
                id,
                label,
                pose,
                bbox,
            },
        );
        Ok(())
    }

    /// Adds the symmetric "access to" edge between two rooms, by label.
    pub fn add_access(&mut self, a: &str, b: &str) -> Result<()> {
        let a = self.room_id_for(a)?;
        let b = self.room_id_for(b)?;
        if a == b {
            return Err(GraphError::SelfAccess(a.0));
        }
        let edge = if a < b { (a, b) } else { (b, a) };
        self.access.insert(edge);
        Ok(())
    }

    /// Inserts a fully specified node. Used by fixtures and deserialization;
    /// detectors go through [`SceneGraph::add_object`].
    pub fn insert_object(&mut self, node: ObjectNode, room: Option<&str>) -> Result<()> {
        if self.objects.contains_key(&node.id) {
            return Err(GraphError::DuplicateId(node.id.0));
        }
        if normalize_label(&node.label).is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        check_decay(node.decay_rate)?;
        check_time(node.last_seen)?;
        let room = match (node.attached, room) {
            (true, Some(r)) => Some(self.room_id_for(r)?),
            (true, None) => return Err(GraphError::UnknownRoom(String::new())),
            (false, Some(_)) => return Err(GraphError::AlreadyDetached(node.id)),
            (false, None) => None,
        };
        let mut node = node;
        node.label = normalize_label(&node.label);
        if let Some(room) = room {
            self.belongs_to.insert(node.id.clone(), room);
        }
        self.objects.insert(node.id.clone(), node);
        Ok(())
    }

    /// Ids of attached objects carrying `label`, optionally limited to one
    /// room, in id order.
    pub fn find(&self, label: &str, room_scope: Option<&str>) -> Result<Vec<ObjectId>> {
        let label = normalize_label(label);
        let room = room_scope.map(|r| self.room_id_for(r)).transpose()?;
        Ok(self
            .belongs_to
            .iter()
            .filter(|(_, r)| room.as_ref().is_none_or(|want| *r == want))
            .filter(|(id, _)| self.objects[*id].label == label)
            .map(|(id, _)| id.clone())
            .collect())
    }

    /// Id the next [`SceneGraph::add_object`] call for `label` will assign.
    pub fn next_object_id(&self, label: &str) -> ObjectId {
        let stem = slug(&normalize_label(label));
        let prefix = format!("{stem}-");
        let max = self
            .objects
            .keys()
            .filter_map(|id| id.0.strip_prefix(&prefix))
            .filter_map(|n| n.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        ObjectId(format!("{stem}-{}", max + 1))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_object(
        &mut self,
        target_room: &str,
        label: &str,
        pose: Pose,
        bbox: BBox3,
        decay_rate: f64,
        now: f64,
    ) -> Result<ObjectId> {
        let room = self.room_id_for(target_room)?;
        let label = normalize_label(label);
        if label.is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        check_decay(decay_rate)?;
        check_time(now)?;
        let id = self.next_object_id(&label);
        self.objects.insert(
            id.clone(),
            ObjectNode {
                id: id.clone(),
                label,
                pose,
                bbox,
                decay_rate,
                last_seen: now,
                attached: true,
                pose_provisional: false,
            },
        );
        self.belongs_to.insert(id.clone(), room);
        Ok(id)
    }

    fn check_in_room(&self, source_room: &str, target: &ObjectId) -> Result<RoomId> {
        let room = self.room_id_for(source_room)?;
        let actual = self
            .belongs_to
            .get(target)
            .ok_or_else(|| GraphError::UnknownObject(target.clone()))?;
        if *actual != room {
            return Err(GraphError::WrongRoom {
                object: target.clone(),
                expected: self.rooms[&room].label.clone(),
                actual: self.rooms[actual].label.clone(),
            });
        }
        Ok(room)
    }

    /// Deletes an attached object. Held (detached) objects are reported as
    /// unknown.
    pub fn remove_object(&mut self, source_room: &str, target: &ObjectId) -> Result<ObjectNode> {
        self.check_in_room(source_room, target)?;
        self.belongs_to.remove(target);
        Ok(self.objects.remove(target).expect("belongs-to key without node"))
    }

    /// Relocates an object in place. The result matches removing the node and
    /// adding it again with the new pose, except that the id is kept.
    pub fn move_object(
        &mut self,
        source_room: &str,
        target_room: &str,
        target: &ObjectId,
        new_pose: Pose,
        now: f64,
    ) -> Result<()> {
        self.check_in_room(source_room, target)?;
        let to = self.room_id_for(target_room)?;
        check_time(now)?;
        let node = self.objects.get_mut(target).expect("checked above");
        node.pose = new_pose;
        node.last_seen = now;
        node.pose_provisional = false;
        self.belongs_to.insert(target.clone(), to);
        Ok(())
    }

    pub fn detach(&mut self, target: &ObjectId) -> Result<()> {
        let node = self
            .objects
            .get_mut(target)
            .ok_or_else(|| GraphError::UnknownObject(target.clone()))?;
        if !node.attached {
            return Err(GraphError::AlreadyDetached(target.clone()));
        }
        node.attached = false;
        self.belongs_to.remove(target);
        Ok(())
    }

    pub fn reattach(&mut self, target: &ObjectId, room: &str, pose: Pose, now: f64) -> Result<()> {
        let room = self.room_id_for(room)?;
        check_time(now)?;
        let node = self
            .objects
            .get_mut(target)
            .ok_or_else(|| GraphError::UnknownObject(target.clone()))?;
        if node.attached {
            return Err(GraphError::AlreadyAttached(target.clone()));
        }
        node.attached = true;
        node.pose = pose;
        node.last_seen = now;
        node.pose_provisional = false;
        self.belongs_to.insert(target.clone(), room);
        Ok(())
    }

    /// Records that an attached object was observed at `now`.
    pub fn touch(&mut self, target: &ObjectId, now: f64) -> Result<()> {
        check_time(now)?;
        match self.objects.get_mut(target) {
            Some(node) if node.attached => {
                node.last_seen = now;
                Ok(())
            }
            _ => Err(GraphError::UnknownObject(target.clone())),
        }
    }

    pub fn resize(&mut self, target: &ObjectId, bbox: BBox3) -> Result<()> {
        match self.objects.get_mut(target) {
            Some(node) if node.attached => {
                node.bbox = bbox;
                Ok(())
            }
            _ => Err(GraphError::UnknownObject(target.clone())),
        }
    }

    pub fn set_provisional(&mut self, target: &ObjectId, provisional: bool) -> Result<()> {
        match self.objects.get_mut(target) {
            Some(node) if node.attached => {
                node.pose_provisional = provisional;
                Ok(())
            }
            _ => Err(GraphError::UnknownObject(target.clone())),
        }
    }

    /// Room whose world-aligned box contains the pose translation; the
    /// smallest such room wins, then the smallest id.
    pub fn assign_room(&self, pose: &Pose) -> Result<RoomId> {
        let p = pose.translation();
        self.rooms
            .values()
            .filter(|r| r.contains(p))
            .min_by(|a, b| {
                a.bbox
                    .volume()
                    .total_cmp(&b.bbox.volume())
                    .then_with(|| a.id.cmp(&b.id))
            })
            .map(|r| r.id.clone())
            .ok_or(GraphError::NoContainingRoom(p.x, p.y, p.z))
    }

    pub fn assign_room_label(&self, pose: &Pose) -> Result<String> {
        self.assign_room(pose).map(|id| self.rooms[&id].label.clone())
    }

    /// Verifies every structural invariant. Returns a description of the
    /// first violation found.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (id, node) in &self.objects {
            if *id != node.id {
                return Err(format!("object key {id} holds node {}", node.id));
            }
            if !(node.decay_rate.is_finite() && node.decay_rate >= 0.0) {
                return Err(format!("object {id} has decay rate {}", node.decay_rate));
            }
            if node.attached != self.belongs_to.contains_key(id) {
                return Err(format!(
                    "object {id} attached={} but belongs-to edge present={}",
                    node.attached,
                    self.belongs_to.contains_key(id)
                ));
            }
        }
        for (obj, room) in &self.belongs_to {
            if !self.objects.contains_key(obj) {
                return Err(format!("belongs-to edge from missing object {obj}"));
            }
            if !self.rooms.contains_key(room) {
                return Err(format!("belongs-to edge to missing room {room}"));
            }
        }
        let labels: BTreeSet<_> = self.rooms.values().map(|r| &r.label).collect();
        if labels.len() != self.rooms.len() {
            return Err("duplicate room labels".into());
        }
        for (a, b) in &self.access {
            if a >= b || !self.rooms.contains_key(a) || !self.rooms.contains_key(b) {
                return Err(format!("bad access edge ({a}, {b})"));
            }
        }
        Ok(())
    }

    /// Equality that ignores object ids, `last_seen` and the provisional
    /// flag: objects are compared as a multiset keyed by their room, label
    /// and geometry.
    pub fn structurally_equal(&self, other: &SceneGraph, tol: f64) -> bool {
        self.structural_diff(other, tol).is_none()
    }

    /// First structural difference, if any, for test diagnostics.
    pub fn structural_diff(&self, other: &SceneGraph, tol: f64) -> Option<String> {
        if self.rooms.len() != other.rooms.len() {
            return Some("room count differs".into());
        }
        for (a, b) in self.rooms.values().zip(other.rooms.values()) {
            if a.id != b.id
                || a.label != b.label
                || !a.pose.approx_eq(&b.pose, tol)
                || !a.bbox.approx_eq(&b.bbox, tol)
            {
                return Some(format!("room {} differs", a.id));
            }
        }
        if self.access != other.access {
            return Some("access edges differ".into());
        }
        if self.objects.len() != other.objects.len() {
            return Some(format!(
                "object count {} vs {}",
                self.objects.len(),
                other.objects.len()
            ));
        }
        let mut unmatched: Vec<&ObjectNode> = other.objects.values().collect();
        for a in self.objects.values() {
            let room_a = self.room_of(&a.id).map(|r| &r.label);
            let pos = unmatched.iter().position(|b| {
                other.room_of(&b.id).map(|r| &r.label) == room_a
                    && a.label == b.label
                    && a.attached == b.attached
                    && (a.decay_rate - b.decay_rate).abs() <= tol
                    && a.pose.approx_eq(&b.pose, tol)
                    && a.bbox.approx_eq(&b.bbox, tol)
            });
            match pos {
                Some(i) => {
                    unmatched.swap_remove(i);
                }
                None => return Some(format!("no counterpart for object {} ({})", a.id, a.label)),
            }
        }
        None
    }
}
