use super::*;
use proptest::prelude::*;

pub(crate) fn meta_with_labels(labels: PhaseMap<PhaseLabel>) -> CycleMeta {
    CycleMeta {
        cycle_id: "obj0_gp0_f080_p01".into(),
        object_id: "obj0".into(),
        grasp_point_id: "gp0".into(),
        grip_force_n: 80.0,
        pose_id: 1,
        phase_labels: labels,
        phase_boundaries: PhaseMap {
            grasp: (1.0, 3.0),
            pose: (3.0, 6.0),
            shake: (6.0, 8.0),
            retract: (8.0, 10.0),
        },
        raw: None,
    }
}

fn tiny_cycle(labels: PhaseMap<PhaseLabel>) -> GraspCycle {
    let meta = meta_with_labels(labels);
    let ts: Vec<f64> = (0..101).map(|i| i as f64 * 0.1).collect();
    let frames: Vec<Array2<f32>> = ts.iter().map(|_| Array2::zeros((4, 4))).collect();
    let rgb: Vec<Array3<f32>> = ts.iter().map(|_| Array3::zeros((4, 4, 3))).collect();
    let wrench: Vec<[f64; 6]> = ts.iter().map(|_| [0.0; 6]).collect();
    GraspCycle {
        meta,
        streams: CycleStreams {
            tactile: TimeSeries::new(ts.clone(), frames),
            rgb: TimeSeries::new(ts.clone(), rgb),
            wrench: TimeSeries::new(ts, wrench),
            pre_contact_tactile: Array2::zeros((4, 4)),
        },
    }
}

fn all_pass() -> PhaseMap<PhaseLabel> {
    PhaseMap::uniform(PhaseLabel::Pass)
}

#[test]
fn binary_label_collapses_to_two_classes() {
    assert_eq!(binary_label(PhaseLabel::Pass), BinaryLabel::Stable);
    assert_eq!(binary_label(PhaseLabel::Slip), BinaryLabel::NotStable);
    assert_eq!(binary_label(PhaseLabel::Drop), BinaryLabel::NotStable);
    assert_eq!(binary_label(PhaseLabel::NotPresent), BinaryLabel::NotStable);
}

#[test]
fn phase_order_is_total() {
    assert!(Phase::Grasp < Phase::Pose);
    assert!(Phase::Pose < Phase::Shake);
    assert!(Phase::Shake < Phase::Retract);
}

#[test]
fn filter_usable_drops_pose_drop_cycles() {
    let mut labels = all_pass();
    labels.set(Phase::Pose, PhaseLabel::Drop);
    labels.set(Phase::Shake, PhaseLabel::NotPresent);
    labels.set(Phase::Retract, PhaseLabel::NotPresent);
    let dropped = tiny_cycle(labels);

    let mut labels = all_pass();
    labels.set(Phase::Grasp, PhaseLabel::Slip);
    let slipped = tiny_cycle(labels);

    let dataset = Dataset {
        cycles: vec![dropped, slipped.clone()],
        provenance: Provenance::Synthetic,
    };
    let usable = filter_usable(&dataset);
    assert_eq!(usable.cycles.len(), 1);
    assert_eq!(usable.cycles[0].meta.cycle_id, slipped.meta.cycle_id);
}

#[test]
fn filter_usable_on_empty_dataset_is_empty() {
    let dataset = Dataset {
        cycles: vec![],
        provenance: Provenance::Synthetic,
    };
    assert!(filter_usable(&dataset).cycles.is_empty());
}

#[test]
fn validate_flags_not_present_without_drop() {
    let mut labels = all_pass();
    labels.set(Phase::Shake, PhaseLabel::NotPresent);
    let violations = validate_meta(&meta_with_labels(labels));
    assert!(violations.iter().any(|v| v.rule.contains("NotPresent without prior Drop")),
        "got: {violations:?}");
}

#[test]
fn validate_accepts_well_formed_cycle() {
    assert!(validate_cycle(&tiny_cycle(all_pass())).is_empty());
}

#[test]
fn validate_flags_overlapping_boundaries() {
    let mut meta = meta_with_labels(all_pass());
    meta.phase_boundaries.pose = (2.5, 6.0); // starts before grasp ends
    let violations = validate_meta(&meta);
    assert!(violations.iter().any(|v| v.rule.contains("overlap")), "got: {violations:?}");
}

#[test]
fn validate_flags_boundary_gap_and_bad_force() {
    let mut meta = meta_with_labels(all_pass());
    meta.phase_boundaries.shake = (6.5, 8.0);
    meta.grip_force_n = 0.0;
    let violations = validate_meta(&meta);
    assert!(violations.iter().any(|v| v.rule.contains("gap")));
    assert!(violations.iter().any(|v| v.field == "grip_force_n"));
}

#[test]
fn validate_flags_short_streams() {
    let mut cycle = tiny_cycle(all_pass());
    cycle.streams.wrench.timestamps.truncate(50);
    cycle.streams.wrench.values.truncate(50);
    let violations = validate_cycle(&cycle);
    assert!(violations.iter().any(|v| v.field == "wrench"), "got: {violations:?}");
}

fn arb_phase_label() -> impl Strategy<Value = PhaseLabel> {
    prop_oneof![
        Just(PhaseLabel::Pass),
        Just(PhaseLabel::Slip),
        Just(PhaseLabel::Drop),
        Just(PhaseLabel::NotPresent),
    ]
}

proptest! {
    #[test]
    fn labels_roundtrip_through_encoding(label in arb_phase_label()) {
        let json = serde_json::to_string(&label).unwrap();
        let back: PhaseLabel = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(label, back);
        // Binary collapse is stable under re-encoding.
        prop_assert_eq!(binary_label(label), binary_label(back));
    }

    #[test]
    fn filter_usable_is_idempotent(labels in proptest::collection::vec(
        (arb_phase_label(), arb_phase_label(), arb_phase_label(), arb_phase_label()), 0..12))
    {
        let cycles: Vec<GraspCycle> = labels
            .iter()
            .enumerate()
            .map(|(i, &(g, p, s, r))| {
                let mut c = tiny_cycle(PhaseMap { grasp: g, pose: p, shake: s, retract: r });
                c.meta.cycle_id = format!("c{i}");
                c
            })
            .collect();
        let dataset = Dataset { cycles, provenance: Provenance::Synthetic };
        let once = filter_usable(&dataset);
        let twice = filter_usable(&once);
        let ids = |d: &Dataset| d.cycles.iter().map(|c| c.meta.cycle_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&once), ids(&twice));
    }

    #[test]
    fn valid_metas_bound_not_present_by_prior_drops(labels in proptest::collection::vec(
        (arb_phase_label(), arb_phase_label(), arb_phase_label(), arb_phase_label()), 1..24))
    {
        let metas: Vec<CycleMeta> = labels
            .iter()
            .map(|&(g, p, s, r)| meta_with_labels(PhaseMap { grasp: g, pose: p, shake: s, retract: r }))
            .filter(|m| validate_meta(m).is_empty())
            .collect();
        for (k, phase) in Phase::ALL.iter().enumerate() {
            let not_present = metas
                .iter()
                .filter(|m| m.phase_labels.get(*phase) == PhaseLabel::NotPresent)
                .count();
            let drops_before: usize = metas
                .iter()
                .map(|m| {
                    Phase::ALL[..k]
                        .iter()
                        .filter(|ph| m.phase_labels.get(**ph) == PhaseLabel::Drop)
                        .count()
                        .min(1)
                })
                .sum();
            prop_assert!(not_present <= drops_before,
                "phase {:?}: {} NotPresent vs {} prior drops", phase, not_present, drops_before);
        }
    }
}

#[test]
fn cycle_roundtrips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cycle = tiny_cycle(all_pass());
    cycle.streams.tactile.values[3][(1, 2)] = 0.75;
    cycle.streams.wrench.values[10] = [1.0, -2.0, 3.0, 0.1, -0.2, 0.3];
    let dataset = Dataset {
        cycles: vec![cycle.clone()],
        provenance: Provenance::Synthetic,
    };
    save_dataset(&dataset, dir.path(), None).unwrap();

    let metas = load_metas(dir.path()).unwrap();
    assert_eq!(metas.len(), 1);
    assert_eq!(metas[0], cycle.meta);

    let loaded = load_cycle(dir.path(), &cycle.meta.cycle_id).unwrap();
    assert_eq!(loaded, cycle);

    let full = load_dataset(dir.path()).unwrap();
    assert_eq!(full.cycles.len(), 1);
    assert_eq!(full.provenance, Provenance::Synthetic);
}

#[test]
fn nearest_index_picks_closest_sample() {
    let series = TimeSeries::new(vec![0.0, 1.0, 2.0, 3.0], vec![10, 11, 12, 13]);
    assert_eq!(series.nearest(-5.0), Some(&10));
    assert_eq!(series.nearest(0.49), Some(&10));
    assert_eq!(series.nearest(0.51), Some(&11));
    assert_eq!(series.nearest(1.5), Some(&11)); // tie resolves to earlier
    assert_eq!(series.nearest(99.0), Some(&13));
}

#[test]
fn ingest_maps_alias_fields_and_preserves_unknowns() {
    let src = tempfile::tempdir().unwrap();
    let dest = tempfile::tempdir().unwrap();
    let index = serde_json::json!([
        {
            "id": "t001",
            "object": "flashlight",
            "grasp_location": "tail",
            "force": 80,
            "pose": 7,
            "labels": { "grasp": "Pass", "pose": "Pass", "shake": "Slip", "retract": "Pass" },
            "operator": "a1",
            "session": 3
        },
        {
            "id": "t002",
            "object": "flashlight",
            "force": "15",
            "pose": 2,
            "grasp_label": "pass",
            "pose_label": "drop",
            "shake_label": "not present",
            "retract_label": "not_present"
        }
    ]);
    std::fs::write(src.path().join("index.json"), index.to_string()).unwrap();

    let metas = ingest::ingest(src.path(), dest.path()).unwrap();
    assert_eq!(metas.len(), 2);

    let t1 = &metas[0];
    assert_eq!(t1.cycle_id, "t001");
    assert_eq!(t1.object_id, "flashlight");
    assert_eq!(t1.grasp_point_id, "tail");
    assert_eq!(t1.grip_force_n, 80.0);
    assert_eq!(t1.pose_id, 7);
    assert_eq!(t1.phase_labels.shake, PhaseLabel::Slip);
    let raw = t1.raw.as_ref().unwrap();
    assert_eq!(raw["operator"], "a1");
    assert_eq!(raw["session"], 3);

    let t2 = &metas[1];
    assert_eq!(t2.phase_labels.pose, PhaseLabel::Drop);
    assert_eq!(t2.phase_labels.shake, PhaseLabel::NotPresent);
    assert!(validate_meta(t2).is_empty());

    // Ingested tree is loadable through the normal path.
    let reloaded = load_metas(dest.path()).unwrap();
    assert_eq!(reloaded, metas);
}

#[test]
fn ingest_rejects_unknown_labels() {
    let src = tempfile::tempdir().unwrap();
    let dest = tempfile::tempdir().unwrap();
    let index = serde_json::json!([
        { "id": "t1", "object": "cup", "force": 5, "pose": 1,
          "labels": { "grasp": "wobble", "pose": "pass", "shake": "pass", "retract": "pass" } }
    ]);
    std::fs::write(src.path().join("index.json"), index.to_string()).unwrap();
    let err = ingest::ingest(src.path(), dest.path()).unwrap_err();
    assert!(err.to_string().contains("wobble"));
}
