//! JSON scene-graph file. Keys and array order are fixed so identical graphs
//! always produce identical bytes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GraphError, ObjectId, ObjectNode, RoomId, RoomNode, SceneGraph};

/// Malformed scene-graph input. `location` is either `line L, column C` for
/// syntax errors or a JSON path for semantic ones.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.location, self.message)
    }
}

impl ParseError {
    fn at(location: impl Into<String>, message: impl fmt::Display) -> Self {
        ParseError {
            location: location.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn from_json(e: &serde_json::Error) -> Self {
        ParseError::at(format!("line {}, column {}", e.line(), e.column()), e)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    rooms: Vec<RoomNode>,
    objects: Vec<ObjectNode>,
    belongs_to: BTreeMap<ObjectId, RoomId>,
    access: Vec<(RoomId, RoomId)>,
    epoch: f64,
}

impl SceneGraph {
    fn to_file(&self) -> GraphFile {
        GraphFile {
            rooms: self.rooms.values().cloned().collect(),
            objects: self.objects.values().cloned().collect(),
            belongs_to: self.belongs_to.clone(),
            access: self.access.iter().cloned().collect(),
            epoch: self.epoch,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_file()).expect("scene graph is always serializable")
    }

    /// Pretty-printed UTF-8 JSON.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.to_file()).expect("scene graph is always serializable");
        out.push(b'\n');
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<SceneGraph, GraphError> {
        let file: GraphFile = serde_json::from_slice(bytes).map_err(|e| ParseError::from_json(&e))?;
        Self::from_file(file).map_err(GraphError::Parse)
    }

    pub fn from_json_value(v: serde_json::Value) -> Result<SceneGraph, GraphError> {
        let file: GraphFile =
            serde_json::from_value(v).map_err(|e| ParseError::at("<value>", e))?;
        Self::from_file(file).map_err(GraphError::Parse)
    }

    fn from_file(file: GraphFile) -> Result<SceneGraph, ParseError> {
        if !(file.epoch.is_finite()) {
            return Err(ParseError::at("epoch", "must be finite"));
        }
        let mut g = SceneGraph::with_epoch(file.epoch);
        for (i, r) in file.rooms.into_iter().enumerate() {
            g.add_room(r.id, &r.label, r.pose, r.bbox)
                .map_err(|e| ParseError::at(format!("rooms[{i}]"), e))?;
        }
        for (i, (a, b)) in file.access.iter().enumerate() {
            let la = g.rooms.get(a).map(|r| r.label.clone());
            let lb = g.rooms.get(b).map(|r| r.label.clone());
            match (la, lb) {
                (Some(la), Some(lb)) => g
                    .add_access(&la, &lb)
                    .map_err(|e| ParseError::at(format!("access[{i}]"), e))?,
                _ => return Err(ParseError::at(format!("access[{i}]"), "unknown room id")),
            }
        }
        let mut edges = file.belongs_to;
        for (i, node) in file.objects.into_iter().enumerate() {
            let room = match edges.remove(&node.id) {
                Some(rid) => Some(
                    g.rooms
                        .get(&rid)
                        .map(|r| r.label.clone())
                        .ok_or_else(|| ParseError::at(format!("belongs_to.{}", node.id), "unknown room id"))?,
                ),
                None => None,
            };
            g.insert_object(node, room.as_deref())
                .map_err(|e| ParseError::at(format!("objects[{i}]"), e))?;
        }
        if let Some((obj, _)) = edges.into_iter().next() {
            return Err(ParseError::at(format!("belongs_to.{obj}"), "edge from unknown object"));
        }
        Ok(g)
    }
}
