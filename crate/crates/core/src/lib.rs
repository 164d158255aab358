//! Keeps a two-layer (room/object) 3D scene graph consistent with a changing
//! environment.
//!
//! Four change detectors feed one record format:
//!
//! * [`human`] turns spoken or typed change statements into records,
//! * [`action`] follows a pick-and-place mission and detaches/reattaches the
//!   carried object,
//! * [`perception`] compares what the graph says should be visible with what
//!   a detector reports,
//! * [`decay`] estimates how likely each object is to still be where it was
//!   last seen.
//!
//! [`update`] applies records through the primitives of [`graph`]. [`sim`]
//! and [`harness`] provide a deterministic ground-truth world and a scenario
//! runner that scores the logged updates against it.

pub mod action;
pub mod decay;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod human;
pub mod perception;
pub mod sim;
pub mod update;

pub use geometry::{BBox3, Pose};
pub use graph::{GraphError, ObjectId, ObjectNode, RoomId, RoomNode, SceneGraph};
pub use update::{apply, ApplyReport, ApplyStatus, UpdateRecord};
