use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AssociationResult, GeometricGate, Observation, SemanticMatcher};
use crate::graph::{ObjectId, SceneGraph};
use crate::update::{Action, Provenance, UpdateRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Streak {
    count: usize,
    last_frame: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PendingAdd {
    observation: Observation,
    count: usize,
    last_frame: u64,
}

/// Cross-frame memory for candidates that need repeated evidence.
///
/// A removal is confirmed after `k` consecutive frames in which the node was
/// expected in view and not matched. An addition is confirmed after `k`
/// consecutive frames containing an unmatched detection of the same class
/// within the static tolerance of the previous one. Moves are not gated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmationStore {
    k: usize,
    gate: GeometricGate,
    removals: BTreeMap<ObjectId, Streak>,
    additions: Vec<PendingAdd>,
}

/// What a frame produced after gating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Confirmed {
    pub records: Vec<UpdateRecord>,
    /// Nodes seen where the graph has them; their `last_seen` should be
    /// refreshed.
    pub observed: Vec<ObjectId>,
}

impl ConfirmationStore {
    /// `k` is clamped to at least one frame.
    pub fn new(k: usize, gate: GeometricGate) -> Self {
        ConfirmationStore {
            k: k.max(1),
            gate,
            removals: BTreeMap::new(),
            additions: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pending_removals(&self) -> usize {
        self.removals.len()
    }

    pub fn pending_additions(&self) -> usize {
        self.additions.len()
    }
}

/// Gates one frame's association result. Frames are numbered by the caller;
/// `frame` must increase by exactly one for evidence to accumulate.
pub fn confirm(
    store: &mut ConfirmationStore,
    result: &AssociationResult,
    graph: &SceneGraph,
    frame: u64,
    now: f64,
    matcher: &dyn SemanticMatcher,
) -> Confirmed {
    let mut out = Confirmed {
        observed: result.static_pairs.iter().map(|(id, _)| id.clone()).collect(),
        ..Confirmed::default()
    };

    for (id, obs) in &result.moved_pairs {
        if let Some(r) = moved_record(graph, id, obs, now) {
            out.records.push(r);
        }
    }

    let mut removals = BTreeMap::new();
    for id in &result.remove_candidates {
        let count = match store.removals.get(id) {
            Some(s) if s.last_frame + 1 == frame => s.count + 1,
            _ => 1,
        };
        if count >= store.k {
            if let Some(room) = graph.room_of(id) {
                let node = graph.object(id).expect("room_of implies node");
                out.records.push(
                    UpdateRecord::new(Action::Removed, &node.label, Provenance::Perception, now)
                        .from_room(&room.label)
                        .with_target_id(id.clone()),
                );
            }
        } else {
            removals.insert(id.clone(), Streak { count, last_frame: frame });
        }
    }
    store.removals = removals;

    let previous = std::mem::take(&mut store.additions);
    let mut claimed = vec![false; previous.len()];
    let mut additions = Vec::new();
    for obs in &result.add_candidates {
        let prior = previous.iter().enumerate().position(|(i, p)| {
            !claimed[i]
                && p.last_frame + 1 == frame
                && matcher.matches(&p.observation.label, &obs.label)
                && store.gate.passes(&p.observation.pose, &obs.pose)
        });
        let count = match prior {
            Some(i) => {
                claimed[i] = true;
                previous[i].count + 1
            }
            None => 1,
        };
        if count >= store.k {
            if let Some(r) = added_record(graph, obs, now, matcher) {
                out.records.push(r);
            }
        } else {
            additions.push(PendingAdd {
                observation: obs.clone(),
                count,
                last_frame: frame,
            });
        }
    }
    store.additions = additions;
    out
}

fn moved_record(graph: &SceneGraph, id: &ObjectId, obs: &Observation, now: f64) -> Option<UpdateRecord> {
    let node = graph.object(id)?;
    let source = graph.room_of(id)?;
    let target = graph.assign_room_label(&obs.pose).ok()?;
    Some(
        UpdateRecord::new(Action::Moved, &node.label, Provenance::Perception, now)
            .from_room(&source.label)
            .to_room(&target)
            .with_pose(obs.pose)
            .with_bbox(obs.bbox)
            .with_target_id(id.clone()),
    )
}

/// A confirmed detection either refines a provisional node of the same class
/// in its room or becomes a new node.
fn added_record(
    graph: &SceneGraph,
    obs: &Observation,
    now: f64,
    matcher: &dyn SemanticMatcher,
) -> Option<UpdateRecord> {
    let room = graph.assign_room_label(&obs.pose).ok()?;
    let provisional = graph.objects().find(|n| {
        n.attached
            && n.pose_provisional
            && matcher.matches(&n.label, &obs.label)
            && graph.room_of(&n.id).map(|r| r.label == room).unwrap_or(false)
    });
    let record = match provisional {
        Some(n) => UpdateRecord::new(Action::Moved, &n.label, Provenance::Perception, now)
            .from_room(&room)
            .with_target_id(n.id.clone()),
        None => UpdateRecord::new(Action::Added, &obs.label, Provenance::Perception, now),
    };
    Some(record.to_room(&room).with_pose(obs.pose).with_bbox(obs.bbox))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::DecayTable;
    use crate::geometry::{BBox3, Pose};
    use crate::perception::SynonymMatcher;
    use crate::update::apply;

    fn graph() -> (SceneGraph, ObjectId) {
        let mut g = SceneGraph::new();
        g.add_room("room-a".into(), "a", Pose::from_translation([5.0, 5.0, 1.5]), BBox3::new([10.0, 10.0, 3.0]).unwrap())
            .unwrap();
        let mug = g
            .add_object("a", "mug", Pose::from_translation([1.0, 1.0, 1.0]), BBox3::cube(0.1).unwrap(), 1e-4, 0.0)
            .unwrap();
        (g, mug)
    }

    fn obs(label: &str, t: [f64; 3]) -> Observation {
        Observation::new(Pose::from_translation(t), BBox3::cube(0.1).unwrap(), label)
    }

    fn removal(id: &ObjectId) -> AssociationResult {
        AssociationResult {
            remove_candidates: vec![id.clone()],
            ..Default::default()
        }
    }

    fn addition(o: Observation) -> AssociationResult {
        AssociationResult {
            add_candidates: vec![o],
            ..Default::default()
        }
    }

    #[test]
    fn removal_needs_consecutive_frames() {
        let (g, mug) = graph();
        let m = SynonymMatcher::exact();
        let mut s = ConfirmationStore::new(3, GeometricGate::default());
        assert!(confirm(&mut s, &removal(&mug), &g, 1, 1.0, &m).records.is_empty());
        assert!(confirm(&mut s, &removal(&mug), &g, 2, 2.0, &m).records.is_empty());
        assert!(confirm(&mut s, &AssociationResult::default(), &g, 3, 3.0, &m).records.is_empty());
        assert!(confirm(&mut s, &removal(&mug), &g, 4, 4.0, &m).records.is_empty());
        assert!(confirm(&mut s, &removal(&mug), &g, 5, 5.0, &m).records.is_empty());
        let c = confirm(&mut s, &removal(&mug), &g, 6, 6.0, &m);
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.records[0].action, Action::Removed);
        assert_eq!(c.records[0].target_id.as_ref(), Some(&mug));
        assert_eq!(s.pending_removals(), 0);
    }

    #[test]
    fn frame_gap_breaks_streak() {
        let (g, mug) = graph();
        let m = SynonymMatcher::exact();
        let mut s = ConfirmationStore::new(2, GeometricGate::default());
        confirm(&mut s, &removal(&mug), &g, 1, 1.0, &m);
        assert!(confirm(&mut s, &removal(&mug), &g, 3, 3.0, &m).records.is_empty());
        assert_eq!(confirm(&mut s, &removal(&mug), &g, 4, 4.0, &m).records.len(), 1);
    }

    #[test]
    fn addition_needs_consistent_poses() {
        let (g, _) = graph();
        let m = SynonymMatcher::exact();
        let mut s = ConfirmationStore::new(2, GeometricGate::default());
        confirm(&mut s, &addition(obs("book", [3.0, 3.0, 1.0])), &g, 1, 1.0, &m);
        // Too far from the first sighting: starts a new streak.
        assert!(confirm(&mut s, &addition(obs("book", [4.0, 3.0, 1.0])), &g, 2, 2.0, &m).records.is_empty());
        let c = confirm(&mut s, &addition(obs("book", [4.1, 3.0, 1.0])), &g, 3, 3.0, &m);
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.records[0].action, Action::Added);
        assert_eq!(c.records[0].target_room.as_deref(), Some("a"));
        // Different class does not continue the streak.
        confirm(&mut s, &addition(obs("book", [3.0, 3.0, 1.0])), &g, 4, 4.0, &m);
        assert!(confirm(&mut s, &addition(obs("cup", [3.0, 3.0, 1.0])), &g, 5, 5.0, &m).records.is_empty());
    }

    #[test]
    fn moves_are_immediate_and_statics_refresh() {
        let (g, mug) = graph();
        let m = SynonymMatcher::exact();
        let mut s = ConfirmationStore::new(5, GeometricGate::default());
        let r = AssociationResult {
            moved_pairs: vec![(mug.clone(), obs("mug", [2.0, 1.0, 1.0]))],
            ..Default::default()
        };
        let c = confirm(&mut s, &r, &g, 1, 1.0, &m);
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.records[0].action, Action::Moved);
        let r = AssociationResult {
            static_pairs: vec![(mug.clone(), obs("mug", [1.0, 1.0, 1.0]))],
            ..Default::default()
        };
        assert_eq!(confirm(&mut s, &r, &g, 2, 2.0, &m).observed, vec![mug]);
    }

    #[test]
    fn provisional_node_is_refined_not_duplicated() {
        let (mut g, _) = graph();
        let table = DecayTable::default();
        let rec = UpdateRecord::new(Action::Added, "book", Provenance::Human, 0.0).to_room("a");
        assert!(apply(&mut g, &rec, &table).is_applied());
        let m = SynonymMatcher::exact();
        let mut s = ConfirmationStore::new(1, GeometricGate::default());
        let c = confirm(&mut s, &addition(obs("book", [8.0, 8.0, 0.5])), &g, 1, 1.0, &m);
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.records[0].action, Action::Moved);
        let before = g.object_count();
        assert!(apply(&mut g, &c.records[0], &table).is_applied());
        assert_eq!(g.object_count(), before);
        assert!(g.objects().all(|n| !n.pose_provisional));
    }
}
