use super::*;
use crate::posespace::{generate_pose_space, PoseSpaceConfig};
use crate::simulate::{simulate_cycle, GraspPoint, ObjectSpec, SimConfig};
use approx::assert_relative_eq;
use ndarray::Array1;
use proptest::prelude::*;

fn easy_object() -> ObjectSpec {
    ObjectSpec {
        object_id: "cube".into(),
        mass: 0.2,
        friction_coeff: 0.6,
        patch_halfwidth: 0.009,
        grasp_points: vec![GraspPoint {
            id: "gp0".into(),
            com_offset: [0.01, 0.001, -0.005],
        }],
        min_lift_force: 5.0,
        imprint_gain: 0.8,
        color: [0.2, 0.6, 0.8],
    }
}

fn synthetic_cycle(cfg: &SimConfig) -> GraspCycle {
    let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
    simulate_cycle(&easy_object(), "gp0", 80.0, &poses[2], cfg, 42).unwrap()
}

#[test]
fn twenty_steps_over_nineteen_seconds_space_by_one() {
    // Grasp [1, 5], pose end at 20 → span 19 s.
    let mut cfg = SimConfig::default();
    cfg.grasp_duration = 4.0;
    cfg.transit_duration = 10.0;
    cfg.hold_duration = 5.0;
    let cycle = synthetic_cycle(&cfg);
    let ts = sample_timesteps(&cycle, 20, Span::GraspToPoseEnd).unwrap();
    assert_eq!(ts.len(), 20);
    assert_relative_eq!(ts[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(ts[19], 20.0, epsilon = 1e-12);
    for w in ts.windows(2) {
        assert_relative_eq!(w[1] - w[0], 1.0, epsilon = 1e-9);
    }
}

#[test]
fn two_steps_are_the_endpoints() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let ts = sample_timesteps(&cycle, 2, Span::GraspToPoseEnd).unwrap();
    let (start, _) = cycle.meta.phase_boundaries.get(Phase::Grasp);
    let (_, end) = cycle.meta.phase_boundaries.get(Phase::Pose);
    assert_eq!(ts, vec![start, end]);
}

#[test]
fn timesteps_increase_monotonically() {
    let cycle = synthetic_cycle(&SimConfig::default());
    for span in [Span::GraspToPoseEnd, Span::GraspToReleaseEnd] {
        let ts = sample_timesteps(&cycle, 20, span).unwrap();
        assert_eq!(ts.len(), 20);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn single_timestep_is_rejected() {
    let cycle = synthetic_cycle(&SimConfig::default());
    assert!(sample_timesteps(&cycle, 1, Span::GraspToPoseEnd).is_err());
}

#[test]
fn uncovered_span_names_the_stream() {
    let mut cycle = synthetic_cycle(&SimConfig::default());
    cycle.streams.wrench.timestamps.truncate(10);
    cycle.streams.wrench.values.truncate(10);
    let err = sample_timesteps(&cycle, 20, Span::GraspToPoseEnd).unwrap_err();
    assert!(err.to_string().contains("wrench"), "error was: {err}");
}

#[test]
fn tactile_delta_of_identical_frames_is_zero() {
    let frame = ndarray::Array2::<f32>::from_elem((6, 6), 0.33);
    let delta = tactile_delta(&frame, &frame).unwrap();
    assert!(delta.iter().all(|&x| x == 0.0));
}

#[test]
fn tactile_delta_rejects_shape_mismatch() {
    let a = ndarray::Array2::<f32>::zeros((6, 6));
    let b = ndarray::Array2::<f32>::zeros((6, 5));
    assert!(tactile_delta(&a, &b).is_err());
}

#[test]
fn tactile_delta_recovers_the_imprint_blob() {
    let cycle = synthetic_cycle(&SimConfig::default());
    // A frame well into the pose hold, firmly imprinted.
    let frame = cycle.streams.tactile.nearest(5.5).unwrap();
    let delta = tactile_delta(frame, &cycle.streams.pre_contact_tactile).unwrap();
    let peak = delta.iter().cloned().fold(f32::MIN, f32::max);
    assert!(peak > 0.3, "imprint should dominate the delta, peak {peak}");
    // Peak sits near the image center (the blob), not at a random corner.
    let (mut pr, mut pc) = (0, 0);
    let mut best = f32::MIN;
    for ((r, c), &v) in delta.indexed_iter() {
        if v > best {
            best = v;
            pr = r;
            pc = c;
        }
    }
    let (h, w) = delta.dim();
    assert!((pr as i64 - h as i64 / 2).abs() <= 3 && (pc as i64 - w as i64 / 2).abs() <= 3,
        "blob peak at ({pr},{pc}) too far from center");
}

fn embedders(d: usize) -> (RandomProjectionEmbedder, RandomProjectionEmbedder) {
    (
        RandomProjectionEmbedder::for_tactile(d, 1),
        RandomProjectionEmbedder::for_rgb(d, 1),
    )
}

#[test]
fn assembled_dimensions_follow_the_layout_contract() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(64);
    let t_only = assemble(&cycle, &et, &ev, Modalities::T, 20, Span::GraspToPoseEnd).unwrap();
    assert_eq!(t_only.matrix.dim(), (20, 64 + 6 + 1));
    let both = assemble(&cycle, &et, &ev, Modalities::VT, 20, Span::GraspToPoseEnd).unwrap();
    assert_eq!(both.matrix.dim(), (20, 64 + 64 + 6 + 1));
}

#[test]
fn grip_force_column_is_constant() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(16);
    let seq = assemble(&cycle, &et, &ev, Modalities::VT, 20, Span::GraspToPoseEnd).unwrap();
    let force_col = seq.matrix.column(seq.matrix.ncols() - 1);
    for &v in force_col.iter() {
        assert_eq!(v, cycle.meta.grip_force_n);
    }
}

#[test]
fn no_modality_is_rejected() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(8);
    let none = Modalities { vision: false, tactile: false };
    assert!(assemble(&cycle, &et, &ev, none, 20, Span::GraspToPoseEnd).is_err());
}

#[test]
fn assembly_is_deterministic() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(16);
    let a = assemble(&cycle, &et, &ev, Modalities::VT, 20, Span::GraspToPoseEnd).unwrap();
    let b = assemble(&cycle, &et, &ev, Modalities::VT, 20, Span::GraspToPoseEnd).unwrap();
    assert_eq!(a, b);
}

#[test]
fn projection_matches_direct_assembly() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(16);
    let both = assemble(&cycle, &et, &ev, Modalities::VT, 20, Span::GraspToPoseEnd).unwrap();
    let layout = FeatureLayout { d_tactile: 16, d_rgb: 16 };
    for want in [Modalities::T, Modalities::V, Modalities::VT] {
        let projected = project_modalities(&both, layout, want).unwrap();
        let direct = assemble(&cycle, &et, &ev, want, 20, Span::GraspToPoseEnd).unwrap();
        assert_eq!(projected, direct, "projection mismatch for {:?}", want.label());
    }
}

fn seq_from(matrix: Array2<f64>) -> FeatureSequence {
    FeatureSequence {
        matrix,
        label_shake: BinaryLabel::Stable,
        label_pose: BinaryLabel::Stable,
        cycle_id: "c".into(),
        pose_id: 1,
    }
}

#[test]
fn fit_apply_standardizes_the_fitting_set() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(8);
    let seqs: Vec<FeatureSequence> = (0..6)
        .map(|i| {
            let mut s = assemble(&cycle, &et, &ev, Modalities::VT, 10, Span::GraspToPoseEnd).unwrap();
            // Vary rows so columns are not constant across the set.
            s.matrix.mapv_inplace(|x| x * (1.0 + 0.1 * i as f64) + 0.01 * i as f64);
            s
        })
        .collect();
    let std = fit_standardizer(&seqs).unwrap();
    let out = apply_all(&std, &seqs).unwrap();

    let d = out[0].matrix.ncols();
    let n: usize = out.iter().map(|s| s.matrix.nrows()).sum();
    for j in 0..d {
        let mut sum = 0.0;
        for s in &out {
            sum += s.matrix.column(j).sum();
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < 1e-9, "dim {j} mean {mean}");
        let mut sq = 0.0;
        for s in &out {
            for &x in s.matrix.column(j) {
                sq += (x - mean) * (x - mean);
            }
        }
        let sd = (sq / n as f64).sqrt();
        if std.std[j] > STD_FLOOR {
            assert!((sd - 1.0).abs() < 1e-6, "dim {j} std {sd}");
        }
    }
}

#[test]
fn constant_columns_map_to_exactly_zero() {
    let mut m = Array2::zeros((4, 3));
    for i in 0..4 {
        m[(i, 0)] = 7.25; // constant
        m[(i, 1)] = i as f64;
        m[(i, 2)] = -3.0 * i as f64 + 0.5;
    }
    let seqs = vec![seq_from(m)];
    let std = fit_standardizer(&seqs).unwrap();
    let out = apply_standardizer(&std, &seqs[0]).unwrap();
    for i in 0..4 {
        assert_eq!(out.matrix[(i, 0)], 0.0);
    }
}

#[test]
fn single_row_sequence_becomes_all_zero() {
    let m = Array2::from_shape_vec((1, 3), vec![2.0, -1.0, 5.5]).unwrap();
    let seqs = vec![seq_from(m)];
    let std = fit_standardizer(&seqs).unwrap();
    let out = apply_standardizer(&std, &seqs[0]).unwrap();
    assert!(out.matrix.iter().all(|&x| x == 0.0));
}

#[test]
fn identity_standardizer_is_a_no_op() {
    let m = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let seq = seq_from(m);
    let out = apply_standardizer(&Standardizer::identity(2), &seq).unwrap();
    assert_eq!(out.matrix, seq.matrix);
}

#[test]
fn refit_on_standardized_output_is_identity() {
    let cycle = synthetic_cycle(&SimConfig::default());
    let (et, ev) = embedders(8);
    let seqs: Vec<FeatureSequence> = (0..5)
        .map(|i| {
            let mut s = assemble(&cycle, &et, &ev, Modalities::T, 10, Span::GraspToPoseEnd).unwrap();
            s.matrix.mapv_inplace(|x| x * (1.0 + 0.3 * i as f64) - 0.2 * i as f64);
            s
        })
        .collect();
    let first = fit_standardizer(&seqs).unwrap();
    let out = apply_all(&first, &seqs).unwrap();
    let second = fit_standardizer(&out).unwrap();
    for j in 0..second.dimension() {
        assert!(second.mean[j].abs() < 1e-9);
        if first.std[j] > STD_FLOOR {
            assert!((second.std[j] - 1.0).abs() < 1e-6, "dim {j}: {}", second.std[j]);
        }
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let std = Standardizer::identity(4);
    let seq = seq_from(Array2::zeros((2, 3)));
    assert!(apply_standardizer(&std, &seq).is_err());
}

#[test]
fn empty_fitting_set_is_rejected() {
    assert!(fit_standardizer(&[]).is_err());
}

#[test]
fn standardizer_roundtrips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("std.json");
    let s = Standardizer {
        mean: vec![1.5, -0.25, 1e-17],
        std: vec![2.0, STD_FLOOR, 0.125],
    };
    s.save(&path).unwrap();
    let back = Standardizer::load(&path).unwrap();
    assert_eq!(s, back);
}

proptest! {
    // Standardization is a per-coordinate monotone map with positive scale,
    // so within-column order relations survive it.
    #[test]
    fn standardization_preserves_per_dimension_order(
        rows in proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, 3), 2..12)
    ) {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let m = Array2::from_shape_vec((n, 3), flat).unwrap();
        let seqs = vec![seq_from(m.clone())];
        let std = fit_standardizer(&seqs).unwrap();
        let out = apply_standardizer(&std, &seqs[0]).unwrap();
        for j in 0..3 {
            if std.std[j] <= STD_FLOOR {
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    let before = m[(a, j)].partial_cmp(&m[(b, j)]).unwrap();
                    let after = out.matrix[(a, j)].partial_cmp(&out.matrix[(b, j)]).unwrap();
                    // Ties may break either way under floating point, but
                    // strict orderings must not reverse.
                    if before != std::cmp::Ordering::Equal && after != std::cmp::Ordering::Equal {
                        prop_assert_eq!(before, after);
                    }
                }
            }
        }
    }
}
