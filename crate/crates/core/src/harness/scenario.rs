use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{parse_task, TaskSpec};
use crate::decay::{DecayTable, DEFAULT_STALE_THRESHOLD};
use crate::geometry::Pose;
use crate::graph::SceneGraph;
use crate::perception::PerceptionConfig;
use crate::sim::{DetectorFailureConfig, House, VirtualAction};

use super::score::Change;

/// Malformed or inconsistent scenario. `location` names the offending part
/// of the file (a JSON path or `line L, column C`).
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ScenarioError {
    pub file: String,
    pub location: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.file, self.location, self.message)
    }
}

impl ScenarioError {
    pub fn new(file: impl Into<String>, location: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError {
            file: file.into(),
            location: location.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanStatement {
    pub at: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionEntry {
    pub mission: String,
    pub pick_time: f64,
    pub place_time: f64,
    pub place_pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub at: f64,
    pub pose: Pose,
}

/// Scenario file as written on disk. Paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub house: String,
    #[serde(default = "from_house")]
    pub initial_graph: String,
    #[serde(default)]
    pub virtual_actions: Vec<VirtualAction>,
    #[serde(default)]
    pub human_statements: Vec<HumanStatement>,
    #[serde(default)]
    pub mission: Option<MissionEntry>,
    #[serde(default)]
    pub trajectory: Vec<Waypoint>,
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub failures: DetectorFailureConfig,
    #[serde(default)]
    pub decay_table: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub stale_threshold: f64,
    /// Hand-written ground truth replacing the derived one.
    #[serde(default)]
    pub annotations: Option<String>,
}

fn from_house() -> String {
    "from_house".into()
}

fn default_threshold() -> f64 {
    DEFAULT_STALE_THRESHOLD
}

/// Everything a run needs, loaded and checked.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub file: ScenarioFile,
    pub house: House,
    pub decay: DecayTable,
    pub initial: SceneGraph,
    pub task: Option<TaskSpec>,
    pub annotations: Option<Vec<AnnotatedChange>>,
}

/// One hand-annotated ground-truth change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedChange {
    pub at: f64,
    #[serde(flatten)]
    pub change: Change,
    pub expected: super::score::Module,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::new(&name, "file", e))?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
            ScenarioError::new(&name, format!("line {}, column {}", e.line(), e.column()), e)
        })?;
        Scenario::from_file(path, file)
    }

    pub fn from_file(path: &Path, file: ScenarioFile) -> Result<Scenario, ScenarioError> {
        let name = path.display().to_string();
        let err = |loc: &str, m: &dyn fmt::Display| ScenarioError::new(&name, loc, m);
        let base = path.parent().unwrap_or(Path::new("."));
        let read = |loc: &str, rel: &str| {
            std::fs::read_to_string(base.join(rel)).map_err(|e| err(loc, &format!("{rel}: {e}")))
        };

        let decay = match &file.decay_table {
            Some(rel) => DecayTable::from_json(&read("decay_table", rel)?).map_err(|e| err("decay_table", &e))?,
            None => DecayTable::default(),
        };
        let house = House::from_json(&read("house", &file.house)?).map_err(|e| err("house", &e))?;
        let house_graph = house.to_graph(&decay, 0.0).map_err(|e| err("house", &e))?;
        let initial = if file.initial_graph == "from_house" {
            house_graph
        } else {
            let bytes = read("initial_graph", &file.initial_graph)?;
            SceneGraph::deserialize(bytes.as_bytes()).map_err(|e| err("initial_graph", &e))?
        };

        file.perception.validate().map_err(|e| err("perception", &e))?;
        file.failures.validate().map_err(|e| err("failures", &e))?;
        if !(file.stale_threshold > 0.0 && file.stale_threshold < 1.0) {
            return Err(err("stale_threshold", &"must lie in (0, 1)"));
        }
        let times = file
            .virtual_actions
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("virtual_actions[{i}].at"), a.at))
            .chain(file.human_statements.iter().enumerate().map(|(i, h)| (format!("human_statements[{i}].at"), h.at)))
            .chain(file.trajectory.iter().enumerate().map(|(i, w)| (format!("trajectory[{i}].at"), w.at)));
        for (loc, t) in times {
            if !(t.is_finite() && t >= initial.epoch()) {
                return Err(err(&loc, &format!("time {t} must be finite and not before the epoch")));
            }
        }

        let task = match &file.mission {
            Some(m) => {
                let spec = parse_task(&m.mission).map_err(|e| err("mission.mission", &e))?;
                for room in [&spec.source_room, &spec.target_room] {
                    if initial.room_by_label(room).is_none() {
                        return Err(err("mission.mission", &format!("unknown room `{room}`")));
                    }
                }
                if !(m.pick_time.is_finite() && m.pick_time >= initial.epoch() && m.place_time >= m.pick_time) {
                    return Err(err("mission", &"need epoch <= pick_time <= place_time"));
                }
                let room = initial.assign_room_label(&m.place_pose).map_err(|e| err("mission.place_pose", &e))?;
                if room != spec.target_room {
                    return Err(err(
                        "mission.place_pose",
                        &format!("lies in `{room}`, mission target is `{}`", spec.target_room),
                    ));
                }
                Some(spec)
            }
            None => None,
        };

        let annotations = match &file.annotations {
            Some(rel) => Some(
                serde_json::from_str(&read("annotations", rel)?).map_err(|e| err("annotations", &e))?,
            ),
            None => None,
        };

        Ok(Scenario {
            path: path.to_path_buf(),
            file,
            house,
            decay,
            initial,
            task,
            annotations,
        })
    }
}
