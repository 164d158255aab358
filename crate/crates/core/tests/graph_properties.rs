mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgu_core::decay::{persistence_probability, pose_distance, stale_targets, DecayTable};
use sgu_core::update::{apply, replay, Action, Provenance, UpdateRecord};
use sgu_core::graph::GRAPH_EQ_TOLERANCE;
use sgu_core::{Pose, SceneGraph};

fn random_step(g: &mut SceneGraph, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n_rooms = g.rooms().count();
    let room = rng.gen_range(0..n_rooms);
    let now = g.epoch() + rng.gen_range(0.0..200.0);
    let ids: Vec<_> = g.objects().map(|o| o.id.clone()).collect();
    let pick = |rng: &mut ChaCha8Rng| ids.get(rng.gen_range(0..ids.len().max(1))).cloned();
    let before = g.clone();
    let result = match rng.gen_range(0..6) {
        0 => g
            .add_object(ROOMS[room], LABELS[rng.gen_range(0..LABELS.len())], random_pose_in(rng, room), random_bbox(rng), 0.1, now)
            .map(|_| ()),
        1 => match pick(rng) {
            Some(id) => g.remove_object(ROOMS[room], &id).map(|_| ()),
            None => Ok(()),
        },
        2 => match pick(rng) {
            Some(id) => {
                let to = rng.gen_range(0..n_rooms);
                g.move_object(ROOMS[room], ROOMS[to], &id, random_pose_in(rng, to), now)
            }
            None => Ok(()),
        },
        3 => match pick(rng) {
            Some(id) => g.detach(&id),
            None => Ok(()),
        },
        4 => match pick(rng) {
            Some(id) => g.reattach(&id, ROOMS[room], random_pose_in(rng, room), now),
            None => Ok(()),
        },
        _ => g.add_object("nowhere", "mug", Pose::identity(), random_bbox(rng), 0.1, now).map(|_| ()),
    };
    if result.is_err() && *g != before {
        return Err(format!("failed primitive changed the graph: {result:?}"));
    }
    g.check_invariants()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn primitive_sequences_keep_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = random_graph(&mut rng);
        for _ in 0..10 {
            prop_assert_eq!(random_step(&mut g, &mut rng), Ok(()));
        }
    }

    #[test]
    fn move_equals_remove_then_add(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng);
        let ids = attached(&g);
        prop_assume!(!ids.is_empty());
        let id = &ids[rng.gen_range(0..ids.len())];
        let node = g.object(id).unwrap().clone();
        let src = g.room_of(id).unwrap().label.clone();
        let n_rooms = g.rooms().count();
        let to = rng.gen_range(0..n_rooms);
        let pose = random_pose_in(&mut rng, to);
        let now = node.last_seen + 1.0;

        let mut moved = g.clone();
        moved.move_object(&src, ROOMS[to], id, pose, now).unwrap();
        let mut rebuilt = g.clone();
        let gone = rebuilt.remove_object(&src, id).unwrap();
        rebuilt.add_object(ROOMS[to], &gone.label, pose, gone.bbox, gone.decay_rate, now).unwrap();
        prop_assert_eq!(moved.structural_diff(&rebuilt, GRAPH_EQ_TOLERANCE), None);
    }

    #[test]
    fn find_is_a_filter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng);
        let label = LABELS[rng.gen_range(0..LABELS.len())];
        let room = g.rooms().next().unwrap().label.clone();
        let mut oracle: Vec<_> = g
            .objects()
            .filter(|o| o.attached && o.label == label && g.room_of(&o.id).map(|r| r.label == room).unwrap_or(false))
            .map(|o| o.id.clone())
            .collect();
        oracle.sort();
        prop_assert_eq!(g.find(label, Some(&room)).unwrap(), oracle);
    }

    #[test]
    fn applied_records_replay_and_failed_ones_leave_no_trace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_graph(&mut rng);
        let table = DecayTable::default();
        let mut g = start.clone();
        let mut calls = Vec::new();
        for _ in 0..6 {
            let action = [Action::Added, Action::Moved, Action::Removed][rng.gen_range(0..3)];
            let room = ROOMS[rng.gen_range(0..4)];
            let other = ROOMS[rng.gen_range(0..4)];
            let mut rec = UpdateRecord::new(action, LABELS[rng.gen_range(0..LABELS.len())], Provenance::Human, g.epoch() + 50.0)
                .from_room(room)
                .to_room(other);
            let n_rooms = g.rooms().count();
            if let Some(i) = ROOMS.iter().position(|r| *r == other).filter(|&i| i < n_rooms && rng.gen_bool(0.5)) {
                rec = rec.with_pose(random_pose_in(&mut rng, i));
            }
            let before = g.clone();
            let report = apply(&mut g, &rec, &table);
            if report.is_applied() {
                calls.extend(report.executed);
                prop_assert_eq!(g.check_invariants(), Ok(()));
            } else {
                prop_assert_eq!(g.serialize(), before.serialize());
            }
        }
        let mut replayed = start.clone();
        replay(&mut replayed, &calls).unwrap();
        prop_assert_eq!(replayed, g);
    }

    #[test]
    fn stale_matches_brute_force(seed in any::<u64>(), threshold in 0.01f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng);
        let now = g.epoch() + rng.gen_range(0.0..300.0);
        let mut oracle: Vec<(f64, String)> = g
            .objects()
            .filter(|o| o.attached && o.decay_rate > 0.0)
            .map(|o| {
                let dt = (now - o.last_seen).max(0.0);
                (2.0 / (1.0 + (o.decay_rate * dt).exp()), o.id.to_string())
            })
            .filter(|(p, _)| *p < threshold)
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = stale_targets(&g, now, threshold);
        prop_assert_eq!(got.entries.len(), oracle.len());
        for (e, (p, id)) in got.entries.iter().zip(&oracle) {
            prop_assert_eq!(e.id.as_str(), id.as_str());
            prop_assert!((e.probability - p).abs() < 1e-12);
        }
    }

    #[test]
    fn pose_distance_is_a_pseudometric(seed in any::<u64>(), w in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = [0, 0, 0].map(|_| random_pose_in(&mut rng, 0));
        prop_assert_eq!(pose_distance(&a, &a, w), 0.0);
        prop_assert!((pose_distance(&a, &b, w) - pose_distance(&b, &a, w)).abs() < 1e-12);
        prop_assert!(pose_distance(&a, &c, w) <= pose_distance(&a, &b, w) + pose_distance(&b, &c, w) + 1e-9);
    }

    #[test]
    fn persistence_decreases(rate in 1e-4f64..10.0, t1 in 0.0f64..5.0, dt in 1e-3f64..5.0) {
        let p1 = persistence_probability(rate, t1, 0.0).unwrap();
        let p2 = persistence_probability(rate, t1 + dt, 0.0).unwrap();
        prop_assert!(p2 < p1);
        prop_assert!(p2 > 0.0 && p1 <= 1.0);
    }
}
