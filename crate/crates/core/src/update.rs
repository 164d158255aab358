//! The common record every change detector emits, and its translation into
//! graph primitives.
//!
//! Detectors never touch the graph directly. They describe a change as an
//! [`UpdateRecord`] (what object, which rooms, added/moved/removed) and
//! [`apply`] turns it into a primitive sequence. Every primitive that ran is
//! recorded in the [`ApplyReport`] so that a log of reports can be replayed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decay::DecayEstimator;
use crate::geometry::{BBox3, Pose};
use crate::graph::{normalize_label, GraphError, ObjectId, SceneGraph};

/// Edge length of the placeholder cube used for topological additions.
pub const PROVISIONAL_BOX_SIDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Added,
    Moved,
    Removed,
}

/// Which change-detection module produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Human,
    Action,
    Perception,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    #[serde(default)]
    pub source_room: Option<String>,
    #[serde(default)]
    pub target_room: Option<String>,
    pub target_object: String,
    #[serde(default)]
    pub pose: Option<Pose>,
    #[serde(default)]
    pub bbox: Option<BBox3>,
    pub action: Action,
    #[serde(default)]
    pub support_object: Option<String>,
    pub provenance: Provenance,
    pub issued_at: f64,
    /// Node the detector already knows it is talking about. Label-based
    /// resolution still runs; the hint only picks among the candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_id: Option<ObjectId>,
}

impl UpdateRecord {
    pub fn new(action: Action, target_object: &str, provenance: Provenance, issued_at: f64) -> Self {
        UpdateRecord {
            source_room: None,
            target_room: None,
            target_object: normalize_label(target_object),
            pose: None,
            bbox: None,
            action,
            support_object: None,
            provenance,
            issued_at,
            target_id: None,
        }
    }

    pub fn from_room(mut self, room: &str) -> Self {
        self.source_room = Some(normalize_label(room));
        self
    }

    pub fn to_room(mut self, room: &str) -> Self {
        self.target_room = Some(normalize_label(room));
        self
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = Some(pose);
        self
    }

    pub fn with_bbox(mut self, bbox: BBox3) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn with_support(mut self, support: &str) -> Self {
        self.support_object = Some(normalize_label(support));
        self
    }

    pub fn with_target_id(mut self, id: ObjectId) -> Self {
        self.target_id = Some(id);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    MissingSourceRoom,
    MissingTargetRoom,
    EmptyTargetObject,
    /// Perception reports are metric; they must carry the observed pose.
    MissingPose,
    BadTimestamp,
}

/// Action-dependent field requirements. Empty means the record is valid.
pub fn validate(record: &UpdateRecord) -> Vec<Violation> {
    let mut v = Vec::new();
    if normalize_label(&record.target_object).is_empty() {
        v.push(Violation::EmptyTargetObject);
    }
    let needs_source = matches!(record.action, Action::Moved | Action::Removed);
    let needs_target = matches!(record.action, Action::Moved | Action::Added);
    if needs_source && record.source_room.is_none() {
        v.push(Violation::MissingSourceRoom);
    }
    if needs_target && record.target_room.is_none() {
        v.push(Violation::MissingTargetRoom);
    }
    if record.provenance == Provenance::Perception && needs_target && record.pose.is_none() {
        v.push(Violation::MissingPose);
    }
    if !(record.issued_at.is_finite() && record.issued_at >= 0.0) {
        v.push(Violation::BadTimestamp);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResolveError {
    #[error("record has no source room")]
    MissingSourceRoom,
    #[error("unknown room `{room}`")]
    UnknownRoom { room: String },
    #[error("no `{label}` in `{room}`")]
    NotFound { label: String, room: String },
    #[error("{} candidates for `{label}` and no usable support object", candidates.len())]
    Ambiguous { label: String, candidates: Vec<ObjectId> },
}

/// Finds the attached node a Moved/Removed record refers to.
///
/// Candidates are attached objects labeled `target_object` in the source
/// room. A single candidate wins outright. With several, a `target_id` hint
/// selects its node; otherwise the candidate nearest (by translation) to any
/// `support_object` node in the same room is chosen, ties going to the
/// smaller id.
pub fn resolve_target(graph: &SceneGraph, record: &UpdateRecord) -> Result<ObjectId, ResolveError> {
    let room = record.source_room.as_deref().ok_or(ResolveError::MissingSourceRoom)?;
    resolve_in_room(
        graph,
        &record.target_object,
        room,
        record.support_object.as_deref(),
        record.target_id.as_ref(),
    )
}

/// Label-based resolution shared by records and missions.
pub fn resolve_in_room(
    graph: &SceneGraph,
    label: &str,
    room: &str,
    support: Option<&str>,
    hint: Option<&ObjectId>,
) -> Result<ObjectId, ResolveError> {
    let label = normalize_label(label);
    let candidates = graph.find(&label, Some(room)).map_err(|_| ResolveError::UnknownRoom {
        room: room.to_string(),
    })?;
    let not_found = || ResolveError::NotFound {
        label: label.clone(),
        room: normalize_label(room),
    };
    if let Some(hint) = hint {
        return candidates.into_iter().find(|c| c == hint).ok_or_else(not_found);
    }
    match candidates.len() {
        0 => return Err(not_found()),
        1 => return Ok(candidates.into_iter().next().expect("one candidate")),
        _ => {}
    }
    let supports = match support {
        Some(s) => graph.find(s, Some(room)).unwrap_or_default(),
        None => Vec::new(),
    };
    if supports.is_empty() {
        return Err(ResolveError::Ambiguous { label, candidates });
    }
    let nearest = |id: &ObjectId| {
        let p = graph.object(id).expect("found").pose.translation();
        supports
            .iter()
            .map(|s| (graph.object(s).expect("found").pose.translation() - p).norm())
            .fold(f64::INFINITY, f64::min)
    };
    // `candidates` is id-sorted and min_by keeps the first minimum.
    Ok(candidates
        .iter()
        .min_by(|a, b| nearest(a).total_cmp(&nearest(b)))
        .expect("nonempty")
        .clone())
}

/// One executed graph primitive with every argument needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PrimitiveCall {
    Find {
        label: String,
        room: Option<String>,
        result: Vec<ObjectId>,
    },
    Add {
        room: String,
        label: String,
        pose: Pose,
        bbox: BBox3,
        decay_rate: f64,
        now: f64,
        id: ObjectId,
    },
    Remove {
        room: String,
        id: ObjectId,
    },
    Move {
        source_room: String,
        target_room: String,
        id: ObjectId,
        pose: Pose,
        now: f64,
    },
    Resize {
        id: ObjectId,
        bbox: BBox3,
    },
    MarkProvisional {
        id: ObjectId,
        provisional: bool,
    },
    Detach {
        id: ObjectId,
    },
    Reattach {
        id: ObjectId,
        room: String,
        pose: Pose,
        now: f64,
    },
    Observe {
        id: ObjectId,
        now: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("replayed add produced `{got}`, log says `{logged}`")]
    IdMismatch { logged: ObjectId, got: ObjectId },
    #[error("replayed find returned {got:?}, log says {logged:?}")]
    FindMismatch { logged: Vec<ObjectId>, got: Vec<ObjectId> },
}

impl PrimitiveCall {
    /// Re-executes the call against `graph`.
    pub fn replay(&self, graph: &mut SceneGraph) -> Result<(), ReplayError> {
        match self {
            PrimitiveCall::Find { label, room, result } => {
                let got = graph.find(label, room.as_deref())?;
                if got != *result {
                    return Err(ReplayError::FindMismatch {
                        logged: result.clone(),
                        got,
                    });
                }
            }
            PrimitiveCall::Add {
                room,
                label,
                pose,
                bbox,
                decay_rate,
                now,
                id,
            } => {
                let got = graph.add_object(room, label, *pose, *bbox, *decay_rate, *now)?;
                if got != *id {
                    return Err(ReplayError::IdMismatch {
                        logged: id.clone(),
                        got,
                    });
                }
            }
            PrimitiveCall::Remove { room, id } => {
                graph.remove_object(room, id)?;
            }
            PrimitiveCall::Move {
                source_room,
                target_room,
                id,
                pose,
                now,
            } => graph.move_object(source_room, target_room, id, *pose, *now)?,
            PrimitiveCall::Resize { id, bbox } => graph.resize(id, *bbox)?,
            PrimitiveCall::MarkProvisional { id, provisional } => graph.set_provisional(id, *provisional)?,
            PrimitiveCall::Detach { id } => graph.detach(id)?,
            PrimitiveCall::Reattach { id, room, pose, now } => graph.reattach(id, room, *pose, *now)?,
            PrimitiveCall::Observe { id, now } => graph.touch(id, *now)?,
        }
        Ok(())
    }
}

/// Replays a primitive sequence in order, stopping at the first failure.
pub fn replay(graph: &mut SceneGraph, calls: &[PrimitiveCall]) -> Result<(), ReplayError> {
    calls.iter().try_for_each(|c| c.replay(graph))
}

/// Why a record did not change the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Failure {
    Invalid { violations: Vec<Violation> },
    Unresolved { error: ResolveError },
    UnknownRoom { room: String },
    Graph { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ApplyStatus {
    Applied,
    Rejected(Failure),
    /// Kept for the operator: applying would have meant guessing.
    Deferred(Failure),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub executed: Vec<PrimitiveCall>,
    pub resolved_id: Option<ObjectId>,
    #[serde(flatten)]
    pub status: ApplyStatus,
}

impl ApplyReport {
    pub fn is_applied(&self) -> bool {
        self.status == ApplyStatus::Applied
    }

    pub fn applied(executed: Vec<PrimitiveCall>, resolved_id: Option<ObjectId>) -> Self {
        ApplyReport {
            executed,
            resolved_id,
            status: ApplyStatus::Applied,
        }
    }

    fn rejected(failure: Failure) -> Self {
        ApplyReport {
            executed: Vec::new(),
            resolved_id: None,
            status: ApplyStatus::Rejected(failure),
        }
    }

    fn deferred(failure: Failure) -> Self {
        ApplyReport {
            executed: Vec::new(),
            resolved_id: None,
            status: ApplyStatus::Deferred(failure),
        }
    }
}

fn graph_failure(e: GraphError) -> Failure {
    match e {
        GraphError::UnknownRoom(room) => Failure::UnknownRoom { room },
        other => Failure::Graph {
            message: other.to_string(),
        },
    }
}

/// Applies a record atomically: either every primitive succeeds, or the graph
/// is left exactly as it was and the report says why.
pub fn apply(graph: &mut SceneGraph, record: &UpdateRecord, decay: &dyn DecayEstimator) -> ApplyReport {
    let violations = validate(record);
    if !violations.is_empty() {
        return ApplyReport::rejected(Failure::Invalid { violations });
    }
    let mut work = graph.clone();
    let mut executed = Vec::new();
    let result = match record.action {
        Action::Added => apply_added(&mut work, record, decay, &mut executed),
        Action::Removed => apply_removed(&mut work, record, &mut executed),
        Action::Moved => apply_moved(&mut work, record, &mut executed),
    };
    match result {
        Ok(id) => {
            *graph = work;
            ApplyReport::applied(executed, Some(id))
        }
        Err(Failure::Unresolved {
            error: e @ ResolveError::Ambiguous { .. },
        }) => ApplyReport::deferred(Failure::Unresolved { error: e }),
        Err(f) => ApplyReport::rejected(f),
    }
}

fn placement(graph: &SceneGraph, room: &str, pose: Option<Pose>) -> Result<(Pose, bool), Failure> {
    match pose {
        Some(p) => Ok((p, false)),
        None => graph
            .room_by_label(room)
            .map(|r| (r.centroid(), true))
            .ok_or_else(|| Failure::UnknownRoom { room: room.to_string() }),
    }
}

fn apply_added(
    g: &mut SceneGraph,
    record: &UpdateRecord,
    decay: &dyn DecayEstimator,
    executed: &mut Vec<PrimitiveCall>,
) -> Result<ObjectId, Failure> {
    let room = record.target_room.as_deref().expect("validated");
    let (pose, provisional) = placement(g, room, record.pose)?;
    let bbox = record
        .bbox
        .unwrap_or_else(|| BBox3::cube(PROVISIONAL_BOX_SIDE).expect("positive"));
    let label = normalize_label(&record.target_object);
    let rate = decay.decay_rate(&label);
    let id = g
        .add_object(room, &label, pose, bbox, rate, record.issued_at)
        .map_err(graph_failure)?;
    executed.push(PrimitiveCall::Add {
        room: normalize_label(room),
        label,
        pose,
        bbox,
        decay_rate: rate,
        now: record.issued_at,
        id: id.clone(),
    });
    if provisional {
        g.set_provisional(&id, true).map_err(graph_failure)?;
        executed.push(PrimitiveCall::MarkProvisional {
            id: id.clone(),
            provisional: true,
        });
    }
    Ok(id)
}

fn resolve_logged(
    g: &SceneGraph,
    record: &UpdateRecord,
    executed: &mut Vec<PrimitiveCall>,
) -> Result<ObjectId, Failure> {
    let room = record.source_room.clone().expect("validated");
    let id = resolve_target(g, record).map_err(|error| match error {
        ResolveError::UnknownRoom { room } => Failure::UnknownRoom { room },
        error => Failure::Unresolved { error },
    })?;
    executed.push(PrimitiveCall::Find {
        label: normalize_label(&record.target_object),
        room: Some(normalize_label(&room)),
        result: g.find(&record.target_object, Some(&room)).unwrap_or_default(),
    });
    Ok(id)
}

fn apply_removed(
    g: &mut SceneGraph,
    record: &UpdateRecord,
    executed: &mut Vec<PrimitiveCall>,
) -> Result<ObjectId, Failure> {
    let id = resolve_logged(g, record, executed)?;
    let room = normalize_label(record.source_room.as_deref().expect("validated"));
    g.remove_object(&room, &id).map_err(graph_failure)?;
    executed.push(PrimitiveCall::Remove { room, id: id.clone() });
    Ok(id)
}

fn apply_moved(
    g: &mut SceneGraph,
    record: &UpdateRecord,
    executed: &mut Vec<PrimitiveCall>,
) -> Result<ObjectId, Failure> {
    let id = resolve_logged(g, record, executed)?;
    let source_room = normalize_label(record.source_room.as_deref().expect("validated"));
    let target_room = normalize_label(record.target_room.as_deref().expect("validated"));
    let (pose, provisional) = placement(g, &target_room, record.pose)?;
    let now = record.issued_at;
    g.move_object(&source_room, &target_room, &id, pose, now)
        .map_err(graph_failure)?;
    executed.push(PrimitiveCall::Move {
        source_room,
        target_room,
        id: id.clone(),
        pose,
        now,
    });
    if let Some(bbox) = record.bbox {
        if g.object(&id).map(|o| o.bbox) != Some(bbox) {
            g.resize(&id, bbox).map_err(graph_failure)?;
            executed.push(PrimitiveCall::Resize { id: id.clone(), bbox });
        }
    }
    if provisional {
        g.set_provisional(&id, true).map_err(graph_failure)?;
        executed.push(PrimitiveCall::MarkProvisional {
            id: id.clone(),
            provisional: true,
        });
    }
    Ok(id)
}
