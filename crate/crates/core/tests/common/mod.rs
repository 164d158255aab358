#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use sgu_core::{BBox3, ObjectId, Pose, SceneGraph};

pub const LABELS: [&str; 8] = ["mug", "cup", "book", "banana", "towel", "lamp", "tv remote", "pillow"];
pub const ROOMS: [&str; 4] = ["kitchen", "bedroom", "living room", "bathroom"];

pub fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scenarios").join(name)
}

/// Rooms are 4 m cubes-ish laid side by side along x, so room `i` spans
/// `x in [4i, 4i + 4]`.
pub fn room_span(i: usize) -> [f64; 2] {
    [4.0 * i as f64, 4.0 * i as f64 + 4.0]
}

pub fn random_pose_in<R: Rng>(rng: &mut R, room: usize) -> Pose {
    let [x0, x1] = room_span(room);
    Pose::from_yaw(
        rng.gen_range(-3.1..3.1),
        [rng.gen_range(x0 + 0.01..x1 - 0.01), rng.gen_range(0.01..3.99), rng.gen_range(0.01..2.99)],
    )
}

pub fn random_bbox<R: Rng>(rng: &mut R) -> BBox3 {
    BBox3::new([rng.gen_range(0.02..1.0), rng.gen_range(0.02..1.0), rng.gen_range(0.02..1.0)]).unwrap()
}

/// Random valid graph: 1 to 4 rooms, up to 10 objects, some detached, random
/// access edges.
pub fn random_graph<R: Rng>(rng: &mut R) -> SceneGraph {
    let mut g = SceneGraph::with_epoch(rng.gen_range(0.0..10.0));
    let n_rooms = rng.gen_range(1..=4);
    for (i, label) in ROOMS.iter().take(n_rooms).enumerate() {
        let [x0, _] = room_span(i);
        g.add_room(
            format!("room-{i}").as_str().into(),
            label,
            Pose::from_translation([x0 + 2.0, 2.0, 1.5]),
            BBox3::new([4.0, 4.0, 3.0]).unwrap(),
        )
        .unwrap();
    }
    for (a, ra) in ROOMS[..n_rooms].iter().enumerate() {
        for rb in &ROOMS[a + 1..n_rooms] {
            if rng.gen_bool(0.5) {
                g.add_access(ra, rb).unwrap();
            }
        }
    }
    for _ in 0..rng.gen_range(0..=10) {
        let room = rng.gen_range(0..n_rooms);
        let rate = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(1e-6..1.0) };
        let id = g
            .add_object(
                ROOMS[room],
                LABELS[rng.gen_range(0..LABELS.len())],
                random_pose_in(rng, room),
                random_bbox(rng),
                rate,
                g.epoch() + rng.gen_range(0.0..100.0),
            )
            .unwrap();
        if rng.gen_bool(0.15) {
            g.detach(&id).unwrap();
        }
    }
    g
}

pub fn attached(g: &SceneGraph) -> Vec<ObjectId> {
    g.objects().filter(|o| o.attached).map(|o| o.id.clone()).collect()
}
