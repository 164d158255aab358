use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, ScenarioError};
use super::score::{score, Change, GroundTruthChange, Metrics, Module};
use crate::action::{ActionError, TaskState};
use crate::decay::{stale_targets, StaleEntry};
use crate::graph::{ObjectId, SceneGraph};
use crate::human::{to_record, Extractor, GrammarExtractor, Lexicon};
use crate::perception::{
    associate, confirm, expected_visible, filter_dynamic, ConfirmationStore, SynonymMatcher,
};
use crate::sim::{synthetic_detect, AppliedAction, DetectorFailureConfig, VirtualActionKind, World};
use crate::update::{apply, Action, ApplyReport, ApplyStatus, PrimitiveCall, Provenance, UpdateRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// A detector record applied through the update language.
    Record,
    Pick,
    Place,
    /// `last_seen` refreshes for nodes seen where expected.
    Observe,
    /// Perception supplying geometry for a provisional node.
    Refine,
}

/// One logged graph interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub at: f64,
    /// Perception frame number, when the entry came from a frame.
    pub frame: Option<u64>,
    pub provenance: Provenance,
    pub kind: EntryKind,
    /// The change this entry asserts, if any.
    pub change: Option<Change>,
    pub record: Option<UpdateRecord>,
    pub report: ApplyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub at: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionAbort {
    pub at: f64,
    pub message: String,
}

/// Time-module output at one waypoint. Logged only; never applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaleLog {
    pub at: f64,
    pub frame: u64,
    pub entries: Vec<StaleEntry>,
}

/// Append-only audit log of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
    pub parse_failures: Vec<ParseFailure>,
    pub mission_aborts: Vec<MissionAbort>,
    pub stale: Vec<StaleLog>,
    pub ground_truth: Vec<GroundTruthChange>,
    pub frames: u64,
}

impl RunLog {
    pub fn deferred(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.report.status, ApplyStatus::Deferred(_)))
    }

    /// Every primitive that changed the graph, in execution order.
    pub fn applied_calls(&self) -> impl Iterator<Item = &PrimitiveCall> {
        self.entries
            .iter()
            .filter(|e| e.report.is_applied())
            .flat_map(|e| e.report.executed.iter())
    }

    /// JSON Lines: one entry per line.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entries serialize") + "\n")
            .collect()
    }
}

/// Command-line adjustments to a loaded scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub failures: Option<DetectorFailureConfig>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub initial: SceneGraph,
    pub graph: SceneGraph,
    pub truth: SceneGraph,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Human(usize),
    Pick,
    Place,
    Waypoint(usize),
}

pub fn run_scenario(path: &Path, overrides: &RunOverrides) -> Result<RunOutcome, ScenarioError> {
    let scenario = Scenario::load(path)?;
    run_loaded(&scenario, overrides)
}

/// Runs `runs` times with seeds `seed, seed + 1, ...` and averages the
/// metrics.
pub fn run_many(path: &Path, overrides: &RunOverrides, runs: usize) -> Result<(Vec<RunOutcome>, Metrics), ScenarioError> {
    let scenario = Scenario::load(path)?;
    let base = overrides.seed.unwrap_or(scenario.file.seed);
    let outcomes = (0..runs.max(1))
        .map(|i| {
            let o = RunOverrides {
                seed: Some(base.wrapping_add(i as u64)),
                ..overrides.clone()
            };
            run_loaded(&scenario, &o)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let all: Vec<Metrics> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    Ok((outcomes, Metrics::average(&all)))
}

/// Event loop. At each distinct time the world first executes due virtual
/// actions; then human statements, mission pick, mission place and
/// waypoints are handled in that order.
pub fn run_loaded(scenario: &Scenario, overrides: &RunOverrides) -> Result<RunOutcome, ScenarioError> {
    let file = &scenario.file;
    let name = scenario.path.display().to_string();
    let sim_err = |e: crate::sim::SimError| ScenarioError::new(&name, "run", e);

    let seed = overrides.seed.unwrap_or(file.seed);
    let failures = overrides.failures.clone().unwrap_or_else(|| file.failures.clone());
    let k = overrides.k.unwrap_or(file.perception.k).max(1);
    let cam = file.perception.camera().map_err(|e| ScenarioError::new(&name, "perception", e))?;
    let gate = file.perception.gate().map_err(|e| ScenarioError::new(&name, "perception", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matcher = SynonymMatcher::default();
    let decay = &scenario.decay;

    let initial = scenario.initial.clone();
    let mut graph = initial.clone();
    let truth_start = scenario
        .house
        .to_graph(decay, initial.epoch())
        .map_err(|e| ScenarioError::new(&name, "house", e))?;
    let mut world = World::new(truth_start, file.virtual_actions.clone(), decay);
    let extractor = GrammarExtractor::new(Lexicon::default().with_rooms(initial.rooms().map(|r| r.label.as_str())));
    let mut store = ConfirmationStore::new(k, gate);
    let mut task = scenario.task.clone().map(TaskState::new);
    let mut truth_held: Option<ObjectId> = None;

    let mut events: Vec<(f64, EventKind)> = Vec::new();
    events.extend(file.human_statements.iter().enumerate().map(|(i, h)| (h.at, EventKind::Human(i))));
    if let Some(m) = &file.mission {
        events.push((m.pick_time, EventKind::Pick));
        events.push((m.place_time, EventKind::Place));
    }
    events.extend(file.trajectory.iter().enumerate().map(|(i, w)| (w.at, EventKind::Waypoint(i))));
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut log = RunLog::default();
    let mut world_changes: Vec<AppliedAction> = Vec::new();
    let mut human_changes: Vec<Change> = Vec::new();
    let mut mission_changes: Vec<GroundTruthChange> = Vec::new();

    for (at, event) in events {
        world_changes.extend(world.step(at).map_err(sim_err)?);
        match event {
            EventKind::Human(i) => {
                let text = &file.human_statements[i].text;
                let parse = extractor.extract(text);
                let Ok(record) = to_record(&parse, at) else {
                    log.parse_failures.push(ParseFailure { at, text: text.clone() });
                    continue;
                };
                human_changes.push(Change::of_record(&record, &record.target_object));
                let report = apply(&mut graph, &record, decay);
                log.entries.push(record_entry(&graph, at, None, EntryKind::Record, record, report));
            }
            EventKind::Pick => {
                let Some(state) = task.as_mut() else { continue };
                match state.on_pick(&mut graph, at) {
                    Ok(pick) => {
                        let spec = &state.spec;
                        let label = graph.object(&pick.id).expect("held node").label.clone();
                        log.entries.push(LogEntry {
                            at,
                            frame: None,
                            provenance: Provenance::Action,
                            kind: EntryKind::Pick,
                            change: Some(Change {
                                action: Action::Moved,
                                object: label,
                                source_room: Some(spec.source_room.clone()),
                                target_room: None,
                            }),
                            record: None,
                            report: ApplyReport::applied(pick.executed, Some(pick.id)),
                        });
                    }
                    Err(e) => log.mission_aborts.push(MissionAbort { at, message: e.to_string() }),
                }
                if let Some(spec) = scenario.task.as_ref() {
                    if let Ok(id) = world.pick(&spec.object_label, &spec.source_room) {
                        let label = world.truth().object(&id).expect("held node").label.clone();
                        mission_changes.push(GroundTruthChange {
                            at,
                            change: Change {
                                action: Action::Moved,
                                object: label,
                                source_room: Some(spec.source_room.clone()),
                                target_room: None,
                            },
                            expected: Module::Action,
                        });
                        truth_held = Some(id);
                    }
                }
            }
            EventKind::Place => {
                let m = file.mission.as_ref().expect("place implies mission");
                if let Some(state) = task.as_mut() {
                    match state.on_place(&mut graph, m.place_pose, at) {
                        Ok(place) => {
                            let report = ApplyReport::applied(place.executed, place.record.target_id.clone());
                            let label = place.record.target_object.clone();
                            log.entries.push(LogEntry {
                                at,
                                frame: None,
                                provenance: Provenance::Action,
                                kind: EntryKind::Place,
                                change: Some(Change::of_record(&place.record, &label)),
                                record: Some(place.record),
                                report,
                            });
                        }
                        Err(ActionError::IllegalPhase { .. }) => {}
                        Err(e) => log.mission_aborts.push(MissionAbort { at, message: e.to_string() }),
                    }
                }
                if let (Some(id), Some(spec)) = (truth_held.take(), scenario.task.as_ref()) {
                    world.place(&id, &spec.target_room, m.place_pose, at).map_err(sim_err)?;
                    let label = world.truth().object(&id).expect("placed node").label.clone();
                    mission_changes.push(GroundTruthChange {
                        at,
                        change: Change {
                            action: Action::Moved,
                            object: label,
                            source_room: Some(spec.source_room.clone()),
                            target_room: Some(spec.target_room.clone()),
                        },
                        expected: Module::Action,
                    });
                }
            }
            EventKind::Waypoint(i) => {
                log.frames += 1;
                let frame = log.frames;
                let pose = file.trajectory[i].pose;
                let observed = filter_dynamic(synthetic_detect(&world, &pose, &cam, &failures, &mut rng), decay);
                let expected = expected_visible(&graph, &pose, &cam);
                let result = associate(&expected, &observed, &graph, &gate, &matcher);
                let confirmed = confirm(&mut store, &result, &graph, frame, at, &matcher);

                if !confirmed.observed.is_empty() {
                    let mut executed = Vec::new();
                    for id in &confirmed.observed {
                        if graph.touch(id, at).is_ok() {
                            executed.push(PrimitiveCall::Observe { id: id.clone(), now: at });
                        }
                    }
                    log.entries.push(LogEntry {
                        at,
                        frame: Some(frame),
                        provenance: Provenance::Perception,
                        kind: EntryKind::Observe,
                        change: None,
                        record: None,
                        report: ApplyReport::applied(executed, None),
                    });
                }
                for record in confirmed.records {
                    let refine = record.action == Action::Moved
                        && record
                            .target_id
                            .as_ref()
                            .and_then(|id| graph.object(id))
                            .map(|n| n.pose_provisional)
                            .unwrap_or(false);
                    let kind = if refine { EntryKind::Refine } else { EntryKind::Record };
                    let report = apply(&mut graph, &record, decay);
                    log.entries.push(record_entry(&graph, at, Some(frame), kind, record, report));
                }
                let stale = stale_targets(&graph, at, file.stale_threshold);
                log.stale.push(StaleLog {
                    at,
                    frame,
                    entries: stale.entries,
                });
            }
        }
    }
    let last_action = file.virtual_actions.iter().map(|a| a.at).fold(world.clock(), f64::max);
    world_changes.extend(world.step(last_action).map_err(sim_err)?);

    log.ground_truth = match &scenario.annotations {
        Some(list) => list
            .iter()
            .map(|a| GroundTruthChange {
                at: a.at,
                change: a.change.clone(),
                expected: a.expected,
            })
            .collect(),
        None => derive_ground_truth(&world_changes, &human_changes, mission_changes),
    };
    let metrics = score(&log, &log.ground_truth);
    Ok(RunOutcome {
        log,
        initial,
        graph,
        truth: world.truth().clone(),
        metrics,
    })
}

fn record_entry(
    graph: &SceneGraph,
    at: f64,
    frame: Option<u64>,
    kind: EntryKind,
    record: UpdateRecord,
    report: ApplyReport,
) -> LogEntry {
    let change = report.is_applied().then(|| {
        let label = report
            .resolved_id
            .as_ref()
            .and_then(|id| graph.object(id))
            .map(|n| n.label.clone())
            .unwrap_or_else(|| record.target_object.clone());
        Change::of_record(&record, &label)
    });
    LogEntry {
        at,
        frame,
        provenance: record.provenance,
        kind,
        change,
        record: Some(record),
        report,
    }
}

/// Real changes from the world's action log and the mission. A change a
/// human statement also describes is expected to be caught by the text
/// module; other changes by perception.
pub fn derive_ground_truth(
    world: &[AppliedAction],
    human: &[Change],
    mission: Vec<GroundTruthChange>,
) -> Vec<GroundTruthChange> {
    let mut out: Vec<GroundTruthChange> = world
        .iter()
        .map(|a| {
            let action = match a.action.kind {
                VirtualActionKind::RemoveObject { .. } => Action::Removed,
                VirtualActionKind::MoveObject { .. } => Action::Moved,
                VirtualActionKind::AddObject { .. } => Action::Added,
            };
            let change = Change {
                action,
                object: a.label.clone(),
                source_room: a.source_room.clone(),
                target_room: a.target_room.clone(),
            };
            let expected = if human.contains(&change) { Module::Text } else { Module::RgbD };
            GroundTruthChange {
                at: a.action.at,
                change,
                expected,
            }
        })
        .chain(mission)
        .collect();
    out.sort_by(|a, b| a.at.total_cmp(&b.at));
    out
}
