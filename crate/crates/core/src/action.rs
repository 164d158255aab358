//! Pick-and-place missions. While the robot holds an object the node is
//! detached from the graph, so neither queries nor perception expect to see
//! it; placing reattaches it in the target room.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::graph::{normalize_label, GraphError, ObjectId, SceneGraph};
use crate::update::{resolve_in_room, PrimitiveCall, Provenance, ResolveError, UpdateRecord};

static MISSION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?:please )?(?:pick(?: up)?|grab|get|fetch) (?:the |a |an )?(?P<obj>.+?) (?:that is |which is )?(?:in|from) (?:the )?(?P<src>.+?),? (?:and )?(?:then )?(?:take|bring|carry|move|put) it (?:to|into|in) (?:the )?(?P<dst>.+?)$",
    )
    .expect("valid regex")
});

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("cannot read a pick-and-place task from `{0}`")]
    UnparsableTask(String),
    #[error("no `{label}` in `{room}`")]
    ObjectNotFound { label: String, room: String },
    #[error("several `{label}` in `{room}`: {candidates:?}")]
    Ambiguous {
        label: String,
        room: String,
        candidates: Vec<ObjectId>,
    },
    #[error("cannot {op} while {phase}")]
    IllegalPhase { op: &'static str, phase: String },
    #[error("place pose lies in `{actual}`, task target is `{expected}`")]
    RoomMismatch { expected: String, actual: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub object_label: String,
    pub source_room: String,
    pub target_room: String,
}

/// Reads "Pick the <obj> in the <room> and take it to the <room>" and close
/// variants.
pub fn parse_task(text: &str) -> Result<TaskSpec, ActionError> {
    let cleaned = normalize_label(text.trim().trim_end_matches(['.', '!']));
    let caps = MISSION
        .captures(&cleaned)
        .ok_or_else(|| ActionError::UnparsableTask(text.to_string()))?;
    let spec = TaskSpec {
        object_label: caps["obj"].to_string(),
        source_room: caps["src"].to_string(),
        target_room: caps["dst"].to_string(),
    };
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "object", rename_all = "snake_case")]
pub enum Phase {
    Pending,
    Holding(ObjectId),
    Done,
}

impl Phase {
    fn describe(&self) -> String {
        match self {
            Phase::Pending => "pending".into(),
            Phase::Holding(id) => format!("holding {id}"),
            Phase::Done => "done".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub spec: TaskSpec,
    phase: Phase,
    history: Vec<(f64, Phase)>,
}

/// Graph effect of a successful pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickOutcome {
    pub id: ObjectId,
    pub executed: Vec<PrimitiveCall>,
}

/// Graph effect of a successful place, with the audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceOutcome {
    pub record: UpdateRecord,
    pub executed: Vec<PrimitiveCall>,
}

impl TaskState {
    pub fn new(spec: TaskSpec) -> Self {
        TaskState {
            spec,
            phase: Phase::Pending,
            history: Vec::new(),
        }
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn history(&self) -> &[(f64, Phase)] {
        &self.history
    }

    fn illegal(&self, op: &'static str) -> ActionError {
        ActionError::IllegalPhase {
            op,
            phase: self.phase.describe(),
        }
    }

    fn advance(&mut self, now: f64, phase: Phase) {
        self.history.push((now, phase.clone()));
        self.phase = phase;
    }

    /// Resolves the object in the source room and detaches it.
    pub fn on_pick(&mut self, graph: &mut SceneGraph, now: f64) -> Result<PickOutcome, ActionError> {
        if self.phase != Phase::Pending {
            return Err(self.illegal("pick"));
        }
        let label = self.spec.object_label.clone();
        let room = self.spec.source_room.clone();
        let candidates = graph.find(&label, Some(&room)).unwrap_or_default();
        let id = resolve_in_room(graph, &label, &room, None, None).map_err(|e| match e {
            ResolveError::Ambiguous { label, candidates } => ActionError::Ambiguous {
                label,
                room: room.clone(),
                candidates,
            },
            _ => ActionError::ObjectNotFound {
                label: label.clone(),
                room: room.clone(),
            },
        })?;
        graph.detach(&id)?;
        self.advance(now, Phase::Holding(id.clone()));
        Ok(PickOutcome {
            executed: vec![
                PrimitiveCall::Find {
                    label: label.clone(),
                    room: Some(room.clone()),
                    result: candidates,
                },
                PrimitiveCall::Detach { id: id.clone() },
            ],
            id,
        })
    }

    /// Reattaches the held object at `place_pose`, which must fall inside the
    /// target room.
    pub fn on_place(&mut self, graph: &mut SceneGraph, place_pose: Pose, now: f64) -> Result<PlaceOutcome, ActionError> {
        let Phase::Holding(id) = self.phase.clone() else {
            return Err(self.illegal("place"));
        };
        let actual = graph.assign_room_label(&place_pose)?;
        if actual != self.spec.target_room {
            return Err(ActionError::RoomMismatch {
                expected: self.spec.target_room.clone(),
                actual,
            });
        }
        graph.reattach(&id, &self.spec.target_room, place_pose, now)?;
        let label = graph.object(&id).expect("reattached").label.clone();
        self.advance(now, Phase::Done);
        let record = UpdateRecord::new(crate::update::Action::Moved, &label, Provenance::Action, now)
            .from_room(&self.spec.source_room)
            .to_room(&self.spec.target_room)
            .with_pose(place_pose)
            .with_target_id(id.clone());
        Ok(PlaceOutcome {
            record,
            executed: vec![PrimitiveCall::Reattach {
                id,
                room: self.spec.target_room.clone(),
                pose: place_pose,
                now,
            }],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox3;

    fn house() -> SceneGraph {
        let mut g = SceneGraph::new();
        for (label, y) in [("kitchen", 2.0), ("bedroom", 6.0)] {
            g.add_room(
                format!("room-{label}").as_str().into(),
                label,
                Pose::from_translation([2.0, y, 1.5]),
                BBox3::new([4.0, 4.0, 3.0]).unwrap(),
            )
            .unwrap();
        }
        g.add_object("kitchen", "mug", Pose::from_translation([1.0, 1.0, 0.9]), BBox3::cube(0.1).unwrap(), 1e-4, 0.0)
            .unwrap();
        g
    }

    fn mug_task() -> TaskState {
        TaskState::new(parse_task("Pick the mug in the kitchen and take it to the bedroom.").unwrap())
    }

    #[test]
    fn parses_mission_variants() {
        let spec = parse_task("Pick the mug in the kitchen and take it to the bedroom.").unwrap();
        assert_eq!(
            spec,
            TaskSpec {
                object_label: "mug".into(),
                source_room: "kitchen".into(),
                target_room: "bedroom".into()
            }
        );
        let spec = parse_task("Pick the book in the bedroom and take it to the kitchen").unwrap();
        assert_eq!(
            (spec.object_label.as_str(), spec.source_room.as_str(), spec.target_room.as_str()),
            ("book", "bedroom", "kitchen")
        );
        let spec = parse_task("pick up the tv remote that is in the living room and bring it to the bedroom").unwrap();
        assert_eq!(spec.object_label, "tv remote");
        assert_eq!(spec.source_room, "living room");
        assert!(matches!(parse_task("Dance"), Err(ActionError::UnparsableTask(_))));
    }

    #[test]
    fn pick_then_place() {
        let mut g = house();
        let mut t = mug_task();
        let pick = t.on_pick(&mut g, 1.0).unwrap();
        assert_eq!(pick.id.as_str(), "mug-1");
        assert!(g.find("mug", None).unwrap().is_empty());
        assert!(matches!(t.phase(), Phase::Holding(_)));
        assert!(matches!(t.on_pick(&mut g, 2.0), Err(ActionError::IllegalPhase { .. })));

        let place = t.on_place(&mut g, Pose::from_translation([1.0, 7.0, 0.6]), 3.0).unwrap();
        assert_eq!(g.room_of(&pick.id).unwrap().label, "bedroom");
        assert_eq!(place.record.provenance, Provenance::Action);
        assert_eq!(place.record.source_room.as_deref(), Some("kitchen"));
        assert_eq!(place.record.target_room.as_deref(), Some("bedroom"));
        assert_eq!(g.object(&pick.id).unwrap().last_seen, 3.0);
        assert_eq!(*t.phase(), Phase::Done);
        assert_eq!(t.history().len(), 2);
        g.check_invariants().unwrap();
    }

    #[test]
    fn place_errors() {
        let mut g = house();
        let mut t = mug_task();
        assert!(matches!(
            t.on_place(&mut g, Pose::from_translation([1.0, 7.0, 0.6]), 1.0),
            Err(ActionError::IllegalPhase { .. })
        ));
        t.on_pick(&mut g, 1.0).unwrap();
        let err = t.on_place(&mut g, Pose::from_translation([1.0, 1.0, 0.6]), 2.0).unwrap_err();
        assert_eq!(
            err,
            ActionError::RoomMismatch {
                expected: "bedroom".into(),
                actual: "kitchen".into()
            }
        );
        assert!(matches!(t.phase(), Phase::Holding(_)));
    }

    #[test]
    fn pick_missing_or_ambiguous() {
        let mut g = house();
        let mut t = TaskState::new(parse_task("Pick the banana in the kitchen and take it to the bedroom").unwrap());
        assert!(matches!(t.on_pick(&mut g, 1.0), Err(ActionError::ObjectNotFound { .. })));
        g.add_object("kitchen", "mug", Pose::from_translation([2.0, 1.0, 0.9]), BBox3::cube(0.1).unwrap(), 1e-4, 0.0)
            .unwrap();
        let before = g.clone();
        let mut t = mug_task();
        assert!(matches!(t.on_pick(&mut g, 1.0), Err(ActionError::Ambiguous { .. })));
        assert_eq!(g, before);
        assert_eq!(*t.phase(), Phase::Pending);
    }
}
