//! Scenario runner and scoring.
//!
//! A scenario pairs a simulated house with scripted events: virtual actions
//! by other people, human statements, one pick-and-place mission and a robot
//! trajectory. Running it drives every detector against the model graph,
//! logs each interaction, and scores the log against the changes that
//! really happened.

mod run;
mod scenario;
mod score;

pub use run::{
    derive_ground_truth, run_loaded, run_many, run_scenario, EntryKind, LogEntry, MissionAbort, ParseFailure,
    RunLog, RunOutcome, RunOverrides, StaleLog,
};
pub use scenario::{AnnotatedChange, HumanStatement, MissionEntry, Scenario, ScenarioError, ScenarioFile, Waypoint};
pub use score::{score, Change, GroundTruthChange, Metrics, Module, Row};
