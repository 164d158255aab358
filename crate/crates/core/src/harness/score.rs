use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::{EntryKind, RunLog};
use crate::update::{Action, Provenance, UpdateRecord};

/// Module a success or failure is credited to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Module {
    #[serde(rename = "text")]
    Text,
    #[serde(rename = "rgb-d")]
    RgbD,
    #[serde(rename = "action")]
    Action,
    #[serde(rename = "time")]
    Time,
}

impl Module {
    pub const ALL: [Module; 4] = [Module::Text, Module::RgbD, Module::Action, Module::Time];

    pub fn name(self) -> &'static str {
        match self {
            Module::Text => "Text",
            Module::RgbD => "RGB-D",
            Module::Action => "Action",
            Module::Time => "Time",
        }
    }
}

impl From<Provenance> for Module {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Human => Module::Text,
            Provenance::Perception => Module::RgbD,
            Provenance::Action => Module::Action,
            Provenance::Time => Module::Time,
        }
    }
}

/// What changed, independent of node ids and geometry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Change {
    pub action: Action,
    pub object: String,
    #[serde(default)]
    pub source_room: Option<String>,
    #[serde(default)]
    pub target_room: Option<String>,
}

impl Change {
    /// The change a record describes. Removals carry no target room and
    /// additions no source room.
    pub fn of_record(record: &UpdateRecord, label: &str) -> Change {
        Change {
            action: record.action,
            object: label.to_string(),
            source_room: match record.action {
                Action::Added => None,
                _ => record.source_room.clone(),
            },
            target_room: match record.action {
                Action::Removed => None,
                _ => record.target_room.clone(),
            },
        }
    }
}

/// A real change and the module expected to catch it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthChange {
    pub at: f64,
    pub change: Change,
    pub expected: Module,
}

/// One update-type row. Rates are percentages of `events`, the real changes
/// of this type plus applied records of this type that match none of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub update: Action,
    pub events: f64,
    /// `None` when nothing of this type happened or was claimed.
    pub success: Option<f64>,
    pub failures: BTreeMap<Module, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runs: usize,
    pub rows: Vec<Row>,
}

const ROW_ORDER: [Action; 3] = [Action::Added, Action::Removed, Action::Moved];

impl Metrics {
    pub fn row(&self, update: Action) -> &Row {
        self.rows.iter().find(|r| r.update == update).expect("every row present")
    }

    /// Mean over runs. Rows without events in a run do not contribute to
    /// that row's success mean.
    pub fn average(all: &[Metrics]) -> Metrics {
        let runs = all.iter().map(|m| m.runs).sum();
        let rows = ROW_ORDER
            .iter()
            .map(|&update| {
                let rows: Vec<&Row> = all.iter().map(|m| m.row(update)).collect();
                let n = rows.len().max(1) as f64;
                let scored: Vec<f64> = rows.iter().filter_map(|r| r.success).collect();
                Row {
                    update,
                    events: rows.iter().map(|r| r.events).sum::<f64>() / n,
                    success: (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64),
                    failures: Module::ALL
                        .iter()
                        .map(|&m| (m, rows.iter().map(|r| r.failures[&m]).sum::<f64>() / n))
                        .collect(),
                }
            })
            .collect();
        Metrics { runs, rows }
    }

    /// Text table: one row per update type, success then per-module failure.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "Update", "Success", "Text", "RGB-D", "Action", "Time"
        );
        for r in &self.rows {
            let name = match r.update {
                Action::Added => "Add",
                Action::Removed => "Remove",
                Action::Moved => "Move",
            };
            let pct = |v: Option<f64>| v.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "-".into());
            let _ = write!(s, "{:<8} {:>9}", name, pct(r.success));
            for m in Module::ALL {
                let f = if r.success.is_some() { Some(r.failures[&m]) } else { None };
                let _ = write!(s, " {:>9}", pct(f));
            }
            s.push('\n');
        }
        let _ = writeln!(s, "runs: {}", self.runs);
        s
    }
}

/// Scores one run. A real change succeeds when an applied record describes
/// it; otherwise the miss is charged to the module expected to catch it.
/// Applied records describing no real change are charged to their own
/// module. Perception refinements of provisional nodes and observation
/// refreshes are not scored.
pub fn score(log: &RunLog, ground_truth: &[GroundTruthChange]) -> Metrics {
    let claims: Vec<(Change, Module)> = log
        .entries
        .iter()
        .filter(|e| e.report.is_applied() && !matches!(e.kind, EntryKind::Observe | EntryKind::Refine))
        .filter_map(|e| e.change.clone().map(|c| (c, Module::from(e.provenance))))
        .collect();
    let mut used = vec![false; claims.len()];
    let rows = ROW_ORDER
        .iter()
        .map(|&update| {
            let mut failures: BTreeMap<Module, f64> = Module::ALL.iter().map(|&m| (m, 0.0)).collect();
            let mut hits = 0usize;
            let mut events = 0usize;
            for gt in ground_truth.iter().filter(|g| g.change.action == update) {
                events += 1;
                let found = claims
                    .iter()
                    .enumerate()
                    .position(|(i, (c, _))| !used[i] && *c == gt.change);
                match found {
                    Some(i) => {
                        used[i] = true;
                        hits += 1;
                    }
                    None => *failures.get_mut(&gt.expected).expect("all modules") += 1.0,
                }
            }
            for (i, (c, m)) in claims.iter().enumerate() {
                if c.action == update && !used[i] {
                    events += 1;
                    *failures.get_mut(m).expect("all modules") += 1.0;
                }
            }
            let total = events as f64;
            Row {
                update,
                events: total,
                success: (events > 0).then(|| 100.0 * hits as f64 / total),
                failures: failures
                    .into_iter()
                    .map(|(m, f)| (m, if events > 0 { 100.0 * f / total } else { 0.0 }))
                    .collect(),
            }
        })
        .collect();
    Metrics { runs: 1, rows }
}
