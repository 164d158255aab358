use serde::{Deserialize, Serialize};

use super::{min_cost_assignment, GeometricGate, Observation, SemanticMatcher};
use crate::graph::{ObjectId, SceneGraph};

/// Outcome of matching the expected nodes of one frame against its
/// detections.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    /// Matched and still within tolerance of the stored pose.
    pub static_pairs: Vec<(ObjectId, Observation)>,
    /// Matched, but displaced by at least the tolerance.
    pub moved_pairs: Vec<(ObjectId, Observation)>,
    /// Expected in view and not matched.
    pub remove_candidates: Vec<ObjectId>,
    /// Detected and not matched to any expected node.
    pub add_candidates: Vec<Observation>,
}

impl AssociationResult {
    pub fn matched(&self) -> usize {
        self.static_pairs.len() + self.moved_pairs.len()
    }

    pub fn total_cost(&self, graph: &SceneGraph, gate: &GeometricGate) -> f64 {
        self.static_pairs
            .iter()
            .chain(&self.moved_pairs)
            .filter_map(|(id, o)| graph.object(id).map(|n| gate.distance(&n.pose, &o.pose)))
            .sum()
    }
}

/// Pairs expected nodes with detections. Only semantically compatible pairs
/// may match; among those, the matching maximizes the number of pairs and
/// then minimizes the summed pose distance. Ids missing from the graph are
/// ignored.
pub fn associate(
    expected: &[ObjectId],
    observed: &[Observation],
    graph: &SceneGraph,
    gate: &GeometricGate,
    matcher: &dyn SemanticMatcher,
) -> AssociationResult {
    let nodes: Vec<_> = expected.iter().filter_map(|id| graph.object(id)).collect();
    let mut compatible = vec![vec![None; observed.len()]; nodes.len()];
    let mut spread = 1.0;
    for (i, n) in nodes.iter().enumerate() {
        for (j, o) in observed.iter().enumerate() {
            if matcher.matches(&n.label, &o.label) {
                let d = gate.distance(&n.pose, &o.pose);
                spread += d;
                compatible[i][j] = Some(d);
            }
        }
    }
    // Any assignment using one fewer incompatible pair is cheaper than every
    // assignment using more, so cardinality dominates distance.
    let forbidden = 2.0 * spread;
    let costs: Vec<Vec<f64>> = compatible
        .iter()
        .map(|row| row.iter().map(|c| c.unwrap_or(forbidden)).collect())
        .collect();

    let mut node_taken = vec![false; nodes.len()];
    let mut obs_taken = vec![false; observed.len()];
    let mut out = AssociationResult::default();
    for (i, j) in min_cost_assignment(&costs) {
        if compatible[i][j].is_none() {
            continue;
        }
        node_taken[i] = true;
        obs_taken[j] = true;
        let pair = (nodes[i].id.clone(), observed[j].clone());
        if gate.passes(&nodes[i].pose, &observed[j].pose) {
            out.static_pairs.push(pair);
        } else {
            out.moved_pairs.push(pair);
        }
    }
    out.remove_candidates = nodes
        .iter()
        .zip(&node_taken)
        .filter(|(_, t)| !**t)
        .map(|(n, _)| n.id.clone())
        .collect();
    out.add_candidates = observed
        .iter()
        .zip(&obs_taken)
        .filter(|(_, t)| !**t)
        .map(|(o, _)| o.clone())
        .collect();
    out.static_pairs.sort_by(|a, b| a.0.cmp(&b.0));
    out.moved_pairs.sort_by(|a, b| a.0.cmp(&b.0));
    out.remove_candidates.sort();
    out
}
