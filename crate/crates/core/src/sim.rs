//! Ground-truth stand-in for the physical house: a scene graph that virtual
//! actions and the robot's own pick-and-place mutate, and a synthetic
//! detector that reports what a camera at a given pose would see.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decay::DecayEstimator;
use crate::geometry::{BBox3, Pose};
use crate::graph::{normalize_label, GraphError, ObjectId, RoomId, SceneGraph};
use crate::perception::{CameraModel, Observation};
use crate::update::resolve_in_room;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("house file: {location}: {message}")]
    House { location: String, message: String },
    #[error("virtual action {index} at t={at}: {message}")]
    InconsistentAction { index: usize, at: f64, message: String },
    #[error("clock cannot go back from {clock} to {until}")]
    ClockBackwards { clock: f64, until: f64 },
    #[error("mission: {0}")]
    Mission(String),
    #[error("detector failure config: {0}")]
    BadFailureConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseRoom {
    pub label: String,
    pub center: [f64; 3],
    pub extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HouseObject {
    pub label: String,
    pub room: String,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    pub extents: [f64; 3],
}

/// House fixture: room boxes, access edges, and furnished objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct House {
    #[serde(default)]
    pub note: Option<String>,
    pub rooms: Vec<HouseRoom>,
    #[serde(default)]
    pub access: Vec<(String, String)>,
    pub objects: Vec<HouseObject>,
}

pub const DEFAULT_HOUSE_JSON: &str = include_str!("../data/house.json");

fn house_err(location: impl Into<String>, message: impl std::fmt::Display) -> SimError {
    SimError::House {
        location: location.into(),
        message: message.to_string(),
    }
}

impl House {
    pub fn from_json(text: &str) -> Result<House, SimError> {
        serde_json::from_str(text)
            .map_err(|e| house_err(format!("line {}, column {}", e.line(), e.column()), e))
    }

    pub fn load(path: &Path) -> Result<House, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| house_err(path.display().to_string(), e))?;
        House::from_json(&text)
    }

    /// Builds the scene graph at `epoch`, taking each object's decay rate
    /// from `decay`. Every object must lie inside the room it names.
    pub fn to_graph(&self, decay: &dyn DecayEstimator, epoch: f64) -> Result<SceneGraph, SimError> {
        let mut g = SceneGraph::with_epoch(epoch);
        for (i, r) in self.rooms.iter().enumerate() {
            let at = || format!("rooms[{i}]");
            let bbox = BBox3::new(r.extents).map_err(|e| house_err(at(), e))?;
            let id = RoomId::new(format!("room-{}", normalize_label(&r.label).replace(' ', "_")));
            g.add_room(id, &r.label, Pose::from_translation(r.center), bbox)
                .map_err(|e| house_err(at(), e))?;
        }
        for (i, (a, b)) in self.access.iter().enumerate() {
            g.add_access(a, b).map_err(|e| house_err(format!("access[{i}]"), e))?;
        }
        for (i, o) in self.objects.iter().enumerate() {
            let at = || format!("objects[{i}]");
            let pose = Pose::from_yaw(o.yaw, o.position);
            let bbox = BBox3::new(o.extents).map_err(|e| house_err(at(), e))?;
            let room = g.assign_room_label(&pose).map_err(|e| house_err(at(), e))?;
            if room != normalize_label(&o.room) {
                return Err(house_err(at(), format!("position lies in `{room}`, not `{}`", o.room)));
            }
            g.add_object(&o.room, &o.label, pose, bbox, decay.decay_rate(&o.label), epoch)
                .map_err(|e| house_err(at(), e))?;
        }
        Ok(g)
    }
}

/// Scripted change made by someone other than the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualAction {
    pub at: f64,
    #[serde(flatten)]
    pub kind: VirtualActionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VirtualActionKind {
    RemoveObject { label: String, room: String },
    MoveObject { label: String, from_room: String, pose: Pose },
    AddObject { label: String, room: String, pose: Pose, bbox: BBox3 },
}

/// A virtual action after execution, with the node and rooms it touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedAction {
    pub index: usize,
    pub action: VirtualAction,
    pub id: ObjectId,
    pub label: String,
    pub source_room: Option<String>,
    pub target_room: Option<String>,
}

/// The true state of the house over time.
#[derive(Debug, Clone)]
pub struct World {
    truth: SceneGraph,
    clock: f64,
    queue: Vec<(usize, VirtualAction)>,
    next: usize,
    rates: BTreeMap<String, f64>,
    default_rate: f64,
}

impl World {
    /// Actions are executed in timestamp order; equal timestamps keep their
    /// list order. `decay` supplies rates for added objects.
    pub fn new(truth: SceneGraph, actions: Vec<VirtualAction>, decay: &dyn DecayEstimator) -> World {
        let mut queue: Vec<(usize, VirtualAction)> = actions.into_iter().enumerate().collect();
        queue.sort_by(|a, b| a.1.at.total_cmp(&b.1.at));
        let rates = queue
            .iter()
            .filter_map(|(_, a)| match &a.kind {
                VirtualActionKind::AddObject { label, .. } => {
                    Some((normalize_label(label), decay.decay_rate(label)))
                }
                _ => None,
            })
            .collect();
        World {
            clock: truth.epoch(),
            truth,
            queue,
            next: 0,
            rates,
            default_rate: 0.0,
        }
    }

    pub fn truth(&self) -> &SceneGraph {
        &self.truth
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.queue.len() - self.next
    }

    /// Executes every queued action with `at <= until` and advances the
    /// clock to `until`.
    pub fn step(&mut self, until: f64) -> Result<Vec<AppliedAction>, SimError> {
        if until < self.clock {
            return Err(SimError::ClockBackwards {
                clock: self.clock,
                until,
            });
        }
        let mut applied = Vec::new();
        while let Some((index, action)) = self.queue.get(self.next).cloned() {
            if action.at > until {
                break;
            }
            self.next += 1;
            let done = self.execute(index, action)?;
            applied.push(done);
        }
        self.clock = until;
        Ok(applied)
    }

    fn execute(&mut self, index: usize, action: VirtualAction) -> Result<AppliedAction, SimError> {
        let at = action.at;
        let fail = |message: String| SimError::InconsistentAction { index, at, message };
        let g = &mut self.truth;
        let (id, label, source_room, target_room) = match &action.kind {
            VirtualActionKind::RemoveObject { label, room } => {
                let id = resolve_in_room(g, label, room, None, None).map_err(|e| fail(e.to_string()))?;
                g.remove_object(room, &id).map_err(|e| fail(e.to_string()))?;
                (id, label, Some(room.clone()), None)
            }
            VirtualActionKind::MoveObject { label, from_room, pose } => {
                let id = resolve_in_room(g, label, from_room, None, None).map_err(|e| fail(e.to_string()))?;
                let target = g.assign_room_label(pose).map_err(|e| fail(e.to_string()))?;
                g.move_object(from_room, &target, &id, *pose, at)
                    .map_err(|e| fail(e.to_string()))?;
                (id, label, Some(from_room.clone()), Some(target))
            }
            VirtualActionKind::AddObject { label, room, pose, bbox } => {
                let actual = g.assign_room_label(pose).map_err(|e| fail(e.to_string()))?;
                if actual != normalize_label(room) {
                    return Err(fail(format!("pose lies in `{actual}`, not `{room}`")));
                }
                let rate = *self.rates.get(&normalize_label(label)).unwrap_or(&self.default_rate);
                let id = g
                    .add_object(room, label, *pose, *bbox, rate, at)
                    .map_err(|e| fail(e.to_string()))?;
                (id, label, None, Some(room.clone()))
            }
        };
        Ok(AppliedAction {
            index,
            label: normalize_label(label),
            source_room: source_room.map(|r| normalize_label(&r)),
            target_room: target_room.map(|r| normalize_label(&r)),
            id,
            action,
        })
    }

    /// The robot grasps the object: it leaves the true scene until placed.
    pub fn pick(&mut self, label: &str, room: &str) -> Result<ObjectId, SimError> {
        let id = resolve_in_room(&self.truth, label, room, None, None).map_err(|e| SimError::Mission(e.to_string()))?;
        self.truth.detach(&id).map_err(|e| SimError::Mission(e.to_string()))?;
        Ok(id)
    }

    pub fn place(&mut self, id: &ObjectId, room: &str, pose: Pose, now: f64) -> Result<(), SimError> {
        self.truth
            .reattach(id, room, pose, now)
            .map_err(|e: GraphError| SimError::Mission(e.to_string()))
    }
}

/// Detector degradations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorFailureConfig {
    /// Objects whose largest box extent is below this are never reported.
    #[serde(default)]
    pub min_detectable_extent: f64,
    /// True label to reported label.
    #[serde(default)]
    pub label_noise: BTreeMap<String, String>,
    /// Objects never reported.
    #[serde(default)]
    pub dropout_ids: BTreeSet<ObjectId>,
    /// Per-detection chance of applying `label_noise`; absent means always.
    #[serde(default)]
    pub label_noise_rate: Option<f64>,
}

impl DetectorFailureConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.min_detectable_extent >= 0.0 && self.min_detectable_extent.is_finite()) {
            return Err(SimError::BadFailureConfig(format!(
                "min_detectable_extent must be finite and >= 0, got {}",
                self.min_detectable_extent
            )));
        }
        if let Some(r) = self.label_noise_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(SimError::BadFailureConfig(format!("label_noise_rate must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.min_detectable_extent == 0.0 && self.label_noise.is_empty() && self.dropout_ids.is_empty()
    }
}

/// Attached true objects whose centroid lies in the camera frustum, in id
/// order, minus suppressed ones. Poses and boxes are exact. `rng` is drawn
/// from only when a label-noise rate is configured.
pub fn synthetic_detect<R: Rng>(
    world: &World,
    robot_pose: &Pose,
    cam: &CameraModel,
    failures: &DetectorFailureConfig,
    rng: &mut R,
) -> Vec<Observation> {
    let mut out = Vec::new();
    for o in world.truth().objects() {
        if !o.attached || !cam.sees(robot_pose, o.pose.translation()) {
            continue;
        }
        if o.bbox.max_extent() < failures.min_detectable_extent || failures.dropout_ids.contains(&o.id) {
            continue;
        }
        let mut label = o.label.clone();
        if let Some(noisy) = failures.label_noise.get(&label) {
            let flip = match failures.label_noise_rate {
                Some(rate) => rng.gen_bool(rate),
                None => true,
            };
            if flip {
                label = noisy.clone();
            }
        }
        out.push(Observation::new(o.pose, o.bbox, &label));
    }
    out
}
