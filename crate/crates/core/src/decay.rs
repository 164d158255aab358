//! Object persistence over unobserved time.
//!
//! The probability that an object still sits within the static tolerance of
//! its last observed pose after `Δt` seconds is `2 / (1 + exp(λ·Δt))`, with
//! `λ` a per-class decay rate. Objects whose probability drops below a
//! threshold become targets for active re-observation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::graph::{normalize_label, ObjectId, SceneGraph};

/// Default probability below which an object is nominated for re-observation.
pub const DEFAULT_STALE_THRESHOLD: f64 = 0.5;

const DEFAULT_TABLE_JSON: &str = include_str!("../data/decay_table.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecayError {
    #[error("now ({now}) precedes last_seen ({last_seen})")]
    ClockSkew { now: f64, last_seen: f64 },
    #[error("decay rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("anchor `{anchor}` referenced by `{label}` is not defined")]
    UnknownAnchor { label: String, anchor: String },
    #[error("malformed decay table: {0}")]
    Malformed(String),
}

/// Weighted SE(3) distance: `sqrt(|Δt|² + (w·θ)²)` with `θ` the geodesic
/// angle of the relative rotation. `rot_weight` is in meters per radian;
/// zero gives a purely translational distance.
pub fn pose_distance(a: &Pose, b: &Pose, rot_weight: f64) -> f64 {
    let dt = (a.translation() - b.translation()).norm();
    if rot_weight == 0.0 {
        return dt;
    }
    let dr = rot_weight * a.rotation_angle_to(b);
    dt.hypot(dr)
}

/// `2 / (1 + exp(rate·(now − last_seen)))`, always in `(0, 1]`.
pub fn persistence_probability(decay_rate: f64, now: f64, last_seen: f64) -> Result<f64, DecayError> {
    if !(decay_rate.is_finite() && decay_rate >= 0.0) {
        return Err(DecayError::InvalidRate(decay_rate));
    }
    if now < last_seen {
        return Err(DecayError::ClockSkew { now, last_seen });
    }
    let x = decay_rate * (now - last_seen);
    // 2e^{-x}/(1+e^{-x}) stays finite for large x; the floor keeps the
    // result strictly positive once e^{-x} underflows.
    let e = (-x).exp();
    Ok((2.0 * e / (1.0 + e)).max(f64::MIN_POSITIVE))
}

/// Elapsed time at which the persistence probability reaches one half.
pub fn half_probability_elapsed(decay_rate: f64) -> f64 {
    3f64.ln() / decay_rate
}

/// Source of per-class decay rates. The shipped implementation is
/// [`DecayTable`]; an external estimator can be substituted.
pub trait DecayEstimator {
    /// Decay rate in 1/s for a normalized label.
    fn decay_rate(&self, label: &str) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnit {
    #[default]
    PerSecond,
    PerHour,
}

impl RateUnit {
    fn to_per_second(self, r: f64) -> f64 {
        match self {
            RateUnit::PerSecond => r,
            RateUnit::PerHour => r / 3600.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayTableFile {
    default: f64,
    anchors: BTreeMap<String, f64>,
    #[serde(default)]
    members: BTreeMap<String, String>,
    #[serde(default)]
    unit: RateUnit,
}

/// Discretized decay rates: a handful of representative anchor labels, and
/// other labels mapped onto an anchor. Rates are held in 1/s.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    default_rate: f64,
    anchors: BTreeMap<String, f64>,
    members: BTreeMap<String, String>,
}

impl Default for DecayTable {
    fn default() -> Self {
        DecayTable::from_json(DEFAULT_TABLE_JSON).expect("shipped decay table is valid")
    }
}

impl DecayTable {
    pub fn new(default_rate: f64) -> Result<Self, DecayError> {
        if !(default_rate.is_finite() && default_rate >= 0.0) {
            return Err(DecayError::InvalidRate(default_rate));
        }
        Ok(DecayTable {
            default_rate,
            anchors: BTreeMap::new(),
            members: BTreeMap::new(),
        })
    }

    pub fn with_anchor(mut self, label: &str, rate: f64) -> Result<Self, DecayError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(DecayError::InvalidRate(rate));
        }
        self.anchors.insert(normalize_label(label), rate);
        Ok(self)
    }

    pub fn with_member(mut self, label: &str, anchor: &str) -> Result<Self, DecayError> {
        let anchor = normalize_label(anchor);
        if !self.anchors.contains_key(&anchor) {
            return Err(DecayError::UnknownAnchor {
                label: label.to_string(),
                anchor,
            });
        }
        self.members.insert(normalize_label(label), anchor);
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self, DecayError> {
        let file: DecayTableFile =
            serde_json::from_str(text).map_err(|e| DecayError::Malformed(e.to_string()))?;
        let mut table = DecayTable::new(file.unit.to_per_second(file.default))?;
        for (label, rate) in file.anchors {
            table = table.with_anchor(&label, file.unit.to_per_second(rate))?;
        }
        for (label, anchor) in file.members {
            table = table.with_member(&label, &anchor)?;
        }
        Ok(table)
    }

    pub fn default_rate(&self) -> f64 {
        self.default_rate
    }

    pub fn anchors(&self) -> impl Iterator<Item = (&str, f64)> {
        self.anchors.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Table lookup: anchor rate, else the rate of the label's anchor, else
    /// the default.
    pub fn lambda_for(&self, label: &str) -> f64 {
        let label = normalize_label(label);
        if let Some(r) = self.anchors.get(&label) {
            return *r;
        }
        self.members
            .get(&label)
            .and_then(|a| self.anchors.get(a))
            .copied()
            .unwrap_or(self.default_rate)
    }
}

impl DecayEstimator for DecayTable {
    fn decay_rate(&self, label: &str) -> f64 {
        self.lambda_for(label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaleEntry {
    pub id: ObjectId,
    pub probability: f64,
    pub last_seen: f64,
}

/// Objects likely to have been disturbed since they were last seen, least
/// persistent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaleReport {
    pub entries: Vec<StaleEntry>,
    pub threshold: f64,
}

/// Attached dynamic objects whose persistence probability at `now` is below
/// `threshold`, ascending by probability then id. An object whose
/// `last_seen` lies in the future is treated as just observed.
pub fn stale_targets(graph: &SceneGraph, now: f64, threshold: f64) -> StaleReport {
    let mut entries: Vec<StaleEntry> = graph
        .objects()
        .filter(|o| o.attached && o.is_dynamic())
        .filter_map(|o| {
            let p = persistence_probability(o.decay_rate, now.max(o.last_seen), o.last_seen).ok()?;
            (p < threshold).then(|| StaleEntry {
                id: o.id.clone(),
                probability: p,
                last_seen: o.last_seen,
            })
        })
        .collect();
    entries.sort_by(|a, b| a.probability.total_cmp(&b.probability).then_with(|| a.id.cmp(&b.id)));
    StaleReport { entries, threshold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox3;
    use std::f64::consts::PI;

    #[test]
    fn probability_closed_form_points() {
        assert_eq!(persistence_probability(0.0, 1e6, 0.0).unwrap(), 1.0);
        assert_eq!(persistence_probability(3.0, 5.0, 5.0).unwrap(), 1.0);
        let half = persistence_probability(1.0, 3f64.ln(), 0.0).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
        assert!(matches!(
            persistence_probability(1.0, 1.0, 2.0),
            Err(DecayError::ClockSkew { .. })
        ));
        assert!(persistence_probability(1.0, 1e9, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn distance_examples() {
        let a = Pose::identity();
        assert_eq!(pose_distance(&a, &a, 1.0), 0.0);
        let b = Pose::from_translation([1.0, 0.0, 0.0]);
        for w in [0.0, 0.5, 3.0] {
            assert!((pose_distance(&a, &b, w) - 1.0).abs() < 1e-15);
        }
        let c = Pose::from_yaw(PI, [0.0; 3]);
        assert!((pose_distance(&a, &c, 1.0) - PI).abs() < 1e-9);
        assert_eq!(pose_distance(&a, &c, 0.0), 0.0);
    }

    #[test]
    fn shipped_table_lookups() {
        let t = DecayTable::default();
        assert_eq!(t.lambda_for("refrigerator"), 0.0);
        assert_eq!(t.lambda_for("Refrigerator"), 0.0);
        assert!((t.lambda_for("banana") - 0.5 / 3600.0).abs() < 1e-18);
        assert!((t.lambda_for("tv remote") - 0.05 / 3600.0).abs() < 1e-18);
        assert_eq!(t.lambda_for("gizmo"), t.default_rate());
    }

    #[test]
    fn table_rejects_dangling_member() {
        let err = DecayTable::from_json(r#"{"default":0.1,"anchors":{"a":1},"members":{"b":"c"}}"#);
        assert!(matches!(err, Err(DecayError::UnknownAnchor { .. })));
        assert!(matches!(
            DecayTable::from_json(r#"{"default":-1,"anchors":{}}"#),
            Err(DecayError::InvalidRate(_))
        ));
    }

    fn graph_with(objs: &[(&str, f64, f64)]) -> SceneGraph {
        let mut g = SceneGraph::new();
        g.add_room("room-a".into(), "a", Pose::from_translation([0.0; 3]), BBox3::cube(10.0).unwrap())
            .unwrap();
        for (label, rate, seen) in objs {
            g.add_object("a", label, Pose::identity(), BBox3::cube(0.1).unwrap(), *rate, *seen)
                .unwrap();
        }
        g
    }

    #[test]
    fn stale_examples() {
        let g = graph_with(&[("banana", 0.5, 10.0), ("fridge", 0.0, 0.0), ("book", 0.01, 10.0)]);
        assert!(stale_targets(&g, 10.0, 0.5).entries.is_empty());

        let now = 10.0 + half_probability_elapsed(0.5) + 0.1;
        let r = stale_targets(&g, now, 0.5);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].id.as_str(), "banana-1");

        let r = stale_targets(&g, 1e7, 0.999_999);
        assert!(r.entries.iter().all(|e| e.id.as_str() != "fridge-1"));
        assert_eq!(r.entries.len(), 2);
    }
}
