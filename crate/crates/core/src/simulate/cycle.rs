//! Full grasp-cycle synthesis and dataset generation.
//!
//! A cycle's timeline (seconds from data-collection start, which begins one
//! second before grasping):
//!
//! ```text
//! 0.0        1.0        contact    lift       3.0        5.0     6.0      8.0       10.0
//! |-- idle --|-- close --|-- hold --|-- lift --|- transit -|- hold -|- shake -|- retract -|
//!            grasp phase ............          pose phase .........  shake     retract
//! ```
//!
//! Labels are decided by thresholding the worst-mode margin of each phase:
//! positive → Pass, within the slip band → Slip, deeper → Drop; phases after
//! a drop are NotPresent. The exact margins also drive the renderers, so
//! sensor streams and labels always agree.

use std::collections::HashMap;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::posespace::HoldingPose;
use crate::rng::{fnv1a64, rng_for, splitmix64};
use crate::schema::{
    CycleMeta, CycleSource, CycleStreams, Dataset, GraspCycle, Phase, PhaseLabel, PhaseMap,
    Provenance, TimeSeries,
};

use super::margin::{margins_for_load, shake_margin};
use super::rgb::render_rgb;
use super::tactile::{render_tactile, ImprintParams, MarginTimeline, Motion, Segment};
use super::{ObjectSpec, SimConfig};

/// The fixed high grip force every grasp point is also sampled at.
pub const HIGH_GRIP_FORCE: f64 = 80.0;

/// Idle time recorded before the grasp phase starts.
const PRE_GRASP: f64 = 1.0;

pub fn cycle_id(object_id: &str, grasp_point_id: &str, grip_force: f64, pose_id: u8) -> String {
    format!("{object_id}_{grasp_point_id}_f{:03}_p{pose_id:02}", grip_force.round() as u32)
}

fn label_for_margin(margin: f64, slip_band: f64) -> PhaseLabel {
    if margin > 0.0 {
        PhaseLabel::Pass
    } else if margin > -slip_band {
        PhaseLabel::Slip
    } else {
        PhaseLabel::Drop
    }
}

/// Seed-derived geometry shared by the label path and the render path.
struct CycleGeometry {
    transit_dir: Vector3<f64>,
    retract_dir: Vector3<f64>,
    center_jitter: (f64, f64),
}

fn geometry(seed: u64) -> CycleGeometry {
    let mut rng = rng_for(seed, "geometry");
    let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let phi2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let jr: f64 = rng.random::<f64>() * 3.0 - 1.5;
    let jc: f64 = rng.random::<f64>() * 3.0 - 1.5;
    CycleGeometry {
        transit_dir: Vector3::new(phi.cos(), phi.sin(), 0.0),
        retract_dir: Vector3::new(phi2.cos(), phi2.sin(), 0.0),
        center_jitter: (jr, jc),
    }
}

struct PhaseOutcome {
    boundaries: PhaseMap<(f64, f64)>,
    labels: PhaseMap<PhaseLabel>,
    timeline: MarginTimeline,
}

/// Compute margins, labels, and the margin timeline for one cycle.
fn evaluate_cycle(
    obj: &ObjectSpec,
    grasp_point: &str,
    grip_force: f64,
    pose: &HoldingPose,
    cfg: &SimConfig,
    geom: &CycleGeometry,
) -> Result<PhaseOutcome> {
    let gp = obj.grasp_point(grasp_point)?;
    let com = Vector3::from(gp.com_offset);
    let reference = UnitQuaternion::identity();
    let gravity_vec = Vector3::new(0.0, 0.0, -cfg.gravity);

    let grasp_start = PRE_GRASP;
    let grasp_end = grasp_start + cfg.grasp_duration;
    let contact = grasp_start + 0.25 * cfg.grasp_duration;
    let lift_start = grasp_start + 0.5 * cfg.grasp_duration;
    let transit_end = grasp_end + cfg.transit_duration;
    let pose_end = transit_end + cfg.hold_duration;
    let shake_end = pose_end + cfg.shake.duration;
    let retract_end = shake_end + cfg.retract_duration;

    let boundaries = PhaseMap {
        grasp: (grasp_start, grasp_end),
        pose: (grasp_end, pose_end),
        shake: (pose_end, shake_end),
        retract: (shake_end, retract_end),
    };

    let margins_at = |orientation: &UnitQuaternion<f64>, pseudo: Vector3<f64>| {
        margins_for_load(
            obj.mass,
            obj.friction_coeff,
            obj.patch_halfwidth,
            com,
            orientation,
            gravity_vec + pseudo,
            grip_force,
            0.0,
        )
    };

    // Lifting adds a downward inertial load.
    let lift_pseudo = Vector3::new(0.0, 0.0, -cfg.lift_accel);
    let transit_pseudo = geom.transit_dir * cfg.transit_accel;
    let retract_pseudo = geom.retract_dir * cfg.transit_accel;

    let m_hold_ref = margins_at(&reference, Vector3::zeros()).worst();
    let m_lift = margins_at(&reference, lift_pseudo).worst();
    let m_transit = margins_at(&pose.orientation, transit_pseudo).worst();
    let m_hold_pose = margins_at(&pose.orientation, Vector3::zeros()).worst();
    let m_shake = shake_margin(obj, grasp_point, grip_force, pose, &cfg.shake, cfg.gravity)?
        .worst();
    let m_retract = margins_at(&reference, retract_pseudo).worst().min(m_hold_ref);

    let phase_margin = PhaseMap {
        grasp: m_hold_ref.min(m_lift),
        pose: m_transit.min(m_hold_pose),
        shake: m_shake,
        retract: m_retract,
    };

    let mut labels = PhaseMap::uniform(PhaseLabel::Pass);
    let mut dropped = false;
    for phase in Phase::ALL {
        if dropped {
            labels.set(phase, PhaseLabel::NotPresent);
            continue;
        }
        let label = label_for_margin(phase_margin.get(phase), cfg.slip_band);
        labels.set(phase, label);
        if label == PhaseLabel::Drop {
            dropped = true;
        }
    }

    let mut segments = vec![
        Segment {
            t0: contact,
            t1: lift_start,
            phase: Some(Phase::Grasp),
            margin: m_hold_ref,
            motion: Motion::Constant(Vector3::zeros()),
            orientation: reference,
        },
        Segment {
            t0: lift_start,
            t1: grasp_end,
            phase: Some(Phase::Grasp),
            margin: m_lift,
            motion: Motion::Constant(lift_pseudo),
            orientation: reference,
        },
        Segment {
            t0: grasp_end,
            t1: transit_end,
            phase: Some(Phase::Pose),
            margin: m_transit,
            motion: Motion::Constant(transit_pseudo),
            orientation: pose.orientation,
        },
        Segment {
            t0: transit_end,
            t1: pose_end,
            phase: Some(Phase::Pose),
            margin: m_hold_pose,
            motion: Motion::Constant(Vector3::zeros()),
            orientation: pose.orientation,
        },
        Segment {
            t0: pose_end,
            t1: shake_end,
            phase: Some(Phase::Shake),
            margin: m_shake,
            motion: Motion::Shake {
                amplitude: cfg.shake.lin_accel_amplitude,
                rot_impulse: cfg.shake.rot_impulse,
            },
            orientation: pose.orientation,
        },
        Segment {
            t0: shake_end,
            t1: retract_end,
            phase: Some(Phase::Retract),
            margin: m_retract,
            motion: Motion::Constant(retract_pseudo),
            orientation: reference,
        },
    ];

    // Truncate at the drop, if any: the object leaves the gripper a little
    // into the offending segment and the imprint fades out within the phase.
    let mut drop_time = None;
    let mut drop_fade_end = 0.0;
    if let Some(idx) = segments
        .iter()
        .position(|s| s.margin <= -cfg.slip_band && !matches!(s.motion, Motion::Absent))
    {
        let seg = &segments[idx];
        let td = seg.t0 + 0.15 * (seg.t1 - seg.t0);
        let phase_end = seg
            .phase
            .map(|p| boundaries.get(p).1)
            .unwrap_or(seg.t1);
        drop_time = Some(td);
        drop_fade_end = (td + 0.3).min(phase_end);
        let t1 = segments[idx].t1;
        segments[idx].t1 = td;
        segments.insert(
            idx + 1,
            Segment {
                t0: td,
                t1,
                phase: segments[idx].phase,
                margin: 0.0,
                motion: Motion::Absent,
                orientation: segments[idx].orientation,
            },
        );
        for seg in segments.iter_mut().skip(idx + 2) {
            seg.motion = Motion::Absent;
        }
    }

    Ok(PhaseOutcome {
        boundaries,
        labels,
        timeline: MarginTimeline {
            segments,
            contact_time: contact,
            drop_time,
            drop_fade_end,
            release_time: retract_end,
            micro_band: cfg.micro_band,
            slip_band: cfg.slip_band,
        },
    })
}

/// Labels and metadata only — no stream rendering. Exactly the labels
/// [`simulate_cycle`] would attach.
pub fn plan_meta(
    obj: &ObjectSpec,
    grasp_point: &str,
    grip_force: f64,
    pose: &HoldingPose,
    cfg: &SimConfig,
    seed: u64,
) -> Result<CycleMeta> {
    let geom = geometry(seed);
    let outcome = evaluate_cycle(obj, grasp_point, grip_force, pose, cfg, &geom)?;
    Ok(CycleMeta {
        cycle_id: cycle_id(&obj.object_id, grasp_point, grip_force, pose.pose_id),
        object_id: obj.object_id.clone(),
        grasp_point_id: grasp_point.to_string(),
        grip_force_n: grip_force,
        pose_id: pose.pose_id,
        phase_labels: outcome.labels,
        phase_boundaries: outcome.boundaries,
        raw: None,
    })
}

/// Synthesize one labeled cycle with all sensor streams. Deterministic:
/// the same inputs and seed produce a byte-identical cycle.
pub fn simulate_cycle(
    obj: &ObjectSpec,
    grasp_point: &str,
    grip_force: f64,
    pose: &HoldingPose,
    cfg: &SimConfig,
    seed: u64,
) -> Result<GraspCycle> {
    cfg.validate()?;
    obj.validate()?;
    if !(grip_force > 0.0) {
        return Err(Error::Config(format!("grip_force must be > 0, got {grip_force}")));
    }

    let geom = geometry(seed);
    let outcome = evaluate_cycle(obj, grasp_point, grip_force, pose, cfg, &geom)?;
    let gp = obj.grasp_point(grasp_point)?;
    let com = Vector3::from(gp.com_offset);

    let (_, retract_end) = outcome.boundaries.get(Phase::Retract);
    let dt = 1.0 / cfg.sample_rate_hz;
    let n_samples = (retract_end * cfg.sample_rate_hz).round() as usize + 1;
    let timestamps: Vec<f64> = (0..n_samples).map(|i| i as f64 * dt).collect();

    let imprint = ImprintParams {
        height: cfg.tactile_size.0,
        width: cfg.tactile_size.1,
        center_row: cfg.tactile_size.0 as f64 / 2.0 + geom.center_jitter.0,
        center_col: cfg.tactile_size.1 as f64 / 2.0 + geom.center_jitter.1,
        sigma_row: obj.patch_halfwidth * 450.0,
        sigma_col: obj.patch_halfwidth * 330.0,
        amplitude: obj.imprint_gain * (0.30 + 0.70 * (grip_force / HIGH_GRIP_FORCE).sqrt()),
        noise_sigma: cfg.tactile_noise,
        slip_shift_rows: cfg.tactile_size.0 as f64 * 0.25,
        slip_fade: 0.5,
        micro_dim: 0.25,
    };

    let mut tactile_frames = Vec::with_capacity(n_samples);
    for (i, &t) in timestamps.iter().enumerate() {
        let mut rng = rng_for(seed, &format!("tactile/{i}"));
        tactile_frames.push(render_tactile(&outcome.timeline, &imprint, t, &mut rng));
    }
    let mut pre_rng = rng_for(seed, "tactile/pre");
    let pre_contact = render_tactile(
        &outcome.timeline,
        &imprint,
        0.5 * outcome.timeline.contact_time,
        &mut pre_rng,
    );

    let object_radius_px = (obj.patch_halfwidth * 500.0).clamp(2.0, 6.0);
    let mut rgb_frames = Vec::with_capacity(n_samples);
    for (i, &t) in timestamps.iter().enumerate() {
        let mut rng = rng_for(seed, &format!("rgb/{i}"));
        let seg = segment_at(&outcome.timeline, t);
        let orientation = seg.map(|s| s.orientation).unwrap_or_else(UnitQuaternion::identity);
        let in_hand = t >= outcome.timeline.contact_time && outcome.timeline.object_present(t);
        rgb_frames.push(render_rgb(
            &orientation,
            obj.color,
            object_radius_px,
            in_hand,
            cfg.rgb_size,
            cfg.rgb_noise,
            &mut rng,
        ));
    }

    let mut wrench_rng = rng_for(seed, "wrench");
    let wrench: Vec<[f64; 6]> = timestamps
        .iter()
        .map(|&t| wrench_at(&outcome.timeline, t, obj, com, cfg, &mut wrench_rng))
        .collect();

    Ok(GraspCycle {
        meta: CycleMeta {
            cycle_id: cycle_id(&obj.object_id, grasp_point, grip_force, pose.pose_id),
            object_id: obj.object_id.clone(),
            grasp_point_id: grasp_point.to_string(),
            grip_force_n: grip_force,
            pose_id: pose.pose_id,
            phase_labels: outcome.labels,
            phase_boundaries: outcome.boundaries,
            raw: None,
        },
        streams: CycleStreams {
            tactile: TimeSeries::new(timestamps.clone(), tactile_frames),
            rgb: TimeSeries::new(timestamps.clone(), rgb_frames),
            wrench: TimeSeries::new(timestamps, wrench),
            pre_contact_tactile: pre_contact,
        },
    })
}

fn segment_at<'a>(timeline: &'a MarginTimeline, t: f64) -> Option<&'a Segment> {
    timeline
        .segments
        .iter()
        .find(|s| t >= s.t0 && t < s.t1)
        .or_else(|| {
            timeline
                .segments
                .last()
                .filter(|s| (t - s.t1).abs() < 1e-9)
        })
}

/// Gravity-plus-inertia wrench in the gripper frame, with sensor noise.
fn wrench_at(
    timeline: &MarginTimeline,
    t: f64,
    obj: &ObjectSpec,
    com: Vector3<f64>,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> [f64; 6] {
    // Noise is drawn unconditionally to keep the stream aligned with time.
    let mut noise = [0.0; 6];
    for (i, n) in noise.iter_mut().enumerate() {
        let sigma = if i < 3 {
            cfg.wrench_force_noise
        } else {
            cfg.wrench_torque_noise
        };
        *n = (rng.random::<f64>() * 2.0 - 1.0) * 1.732 * sigma;
    }

    let seg = match segment_at(timeline, t) {
        Some(s) if t >= timeline.contact_time => s,
        _ => return noise,
    };
    let pseudo = match seg.motion {
        Motion::Absent => return noise,
        Motion::Constant(v) => v,
        Motion::Shake { amplitude, .. } => {
            let w = std::f64::consts::TAU * cfg.shake_freq_hz * (t - seg.t0);
            Vector3::new(w.sin(), (w + 2.1).sin(), (w + 4.2).sin()) * amplitude
        }
    };
    let load = Vector3::new(0.0, 0.0, -cfg.gravity) + pseudo;
    let force = seg.orientation.inverse_transform_vector(&load) * obj.mass;
    let mut torque = com.cross(&force);
    if let Motion::Shake { rot_impulse, .. } = seg.motion {
        // Decaying rotational burst at the start of the stability check.
        let dt = t - seg.t0;
        let d_perp_sq = com.y * com.y + com.z * com.z;
        torque.x += obj.mass * d_perp_sq * rot_impulse
            * (-3.0 * dt).exp()
            * (std::f64::consts::TAU * 4.0 * dt).cos();
    }
    [
        force.x + noise[0],
        force.y + noise[1],
        force.z + noise[2],
        torque.x + noise[3],
        torque.y + noise[4],
        torque.z + noise[5],
    ]
}

/// One planned generation unit of a dataset sweep.
#[derive(Debug, Clone)]
pub struct CyclePlan {
    pub cycle_id: String,
    pub object_index: usize,
    pub grasp_point_id: String,
    pub grip_force: f64,
    pub pose_id: u8,
    pub seed: u64,
}

/// Enumerate every (grasp point × {min lift force, 80 N} × 16 poses)
/// combination with a per-cycle derived seed. Order is deterministic and
/// each cycle's seed depends only on its identity, so cycles can be
/// generated independently in any order.
pub fn plan_cycles(
    catalog: &[ObjectSpec],
    poses: &[HoldingPose],
    master_seed: u64,
) -> Result<Vec<CyclePlan>> {
    if catalog.is_empty() {
        return Err(Error::Config("object catalog is empty".into()));
    }
    let mut plans = Vec::new();
    for (oi, obj) in catalog.iter().enumerate() {
        obj.validate()?;
        for gp in &obj.grasp_points {
            for force in [obj.min_lift_force, HIGH_GRIP_FORCE] {
                for pose in poses {
                    let id = cycle_id(&obj.object_id, &gp.id, force, pose.pose_id);
                    plans.push(CyclePlan {
                        seed: splitmix64(master_seed ^ fnv1a64(id.as_bytes())),
                        cycle_id: id,
                        object_index: oi,
                        grasp_point_id: gp.id.clone(),
                        grip_force: force,
                        pose_id: pose.pose_id,
                    });
                }
            }
        }
    }
    Ok(plans)
}

/// Per-phase label counts, tracked while generating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub pass: usize,
    pub slip: usize,
    pub drop: usize,
    pub not_present: usize,
}

impl LabelCounts {
    pub fn add(&mut self, label: PhaseLabel) {
        match label {
            PhaseLabel::Pass => self.pass += 1,
            PhaseLabel::Slip => self.slip += 1,
            PhaseLabel::Drop => self.drop += 1,
            PhaseLabel::NotPresent => self.not_present += 1,
        }
    }
}

/// Generator-side bookkeeping of emitted labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTally {
    pub grasp: LabelCounts,
    pub pose: LabelCounts,
    pub shake: LabelCounts,
    pub retract: LabelCounts,
    pub total_cycles: usize,
}

impl LabelTally {
    pub fn record(&mut self, meta: &CycleMeta) {
        self.grasp.add(meta.phase_labels.get(Phase::Grasp));
        self.pose.add(meta.phase_labels.get(Phase::Pose));
        self.shake.add(meta.phase_labels.get(Phase::Shake));
        self.retract.add(meta.phase_labels.get(Phase::Retract));
        self.total_cycles += 1;
    }

    pub fn counts(&self, phase: Phase) -> LabelCounts {
        match phase {
            Phase::Grasp => self.grasp,
            Phase::Pose => self.pose,
            Phase::Shake => self.shake,
            Phase::Retract => self.retract,
        }
    }
}

/// Generate a full in-memory dataset. Best for small catalogs; for big
/// sweeps prefer [`synthesize_to_dir`] or [`SyntheticSource`], which render
/// one cycle at a time.
pub fn synthesize_dataset(
    catalog: &[ObjectSpec],
    poses: &[HoldingPose],
    cfg: &SimConfig,
    master_seed: u64,
) -> Result<(Dataset, LabelTally)> {
    let plans = plan_cycles(catalog, poses, master_seed)?;
    let mut cycles = Vec::with_capacity(plans.len());
    let mut tally = LabelTally::default();
    for plan in &plans {
        let obj = &catalog[plan.object_index];
        let pose = pose_by_id(poses, plan.pose_id)?;
        let cycle = simulate_cycle(
            obj,
            &plan.grasp_point_id,
            plan.grip_force,
            pose,
            cfg,
            plan.seed,
        )?;
        tally.record(&cycle.meta);
        cycles.push(cycle);
    }
    Ok((
        Dataset {
            cycles,
            provenance: Provenance::Synthetic,
        },
        tally,
    ))
}

/// Generate and save a dataset cycle-by-cycle (flat memory use).
pub fn synthesize_to_dir(
    catalog: &[ObjectSpec],
    poses: &[HoldingPose],
    cfg: &SimConfig,
    master_seed: u64,
    root: &std::path::Path,
    config_echo: Option<serde_json::Value>,
) -> Result<(Vec<CycleMeta>, LabelTally)> {
    let plans = plan_cycles(catalog, poses, master_seed)?;
    std::fs::create_dir_all(root.join("cycles")).map_err(|e| Error::io(root, e))?;

    let mut metas = Vec::with_capacity(plans.len());
    let mut tally = LabelTally::default();
    for plan in &plans {
        let obj = &catalog[plan.object_index];
        let pose = pose_by_id(poses, plan.pose_id)?;
        let cycle = simulate_cycle(
            obj,
            &plan.grasp_point_id,
            plan.grip_force,
            pose,
            cfg,
            plan.seed,
        )?;
        tally.record(&cycle.meta);
        crate::schema::save_cycle_to(root, &cycle)?;
        metas.push(cycle.meta);
    }

    crate::schema::write_dataset_record(root, Provenance::Synthetic, metas.len(), config_echo)?;
    Ok((metas, tally))
}

fn pose_by_id<'a>(poses: &'a [HoldingPose], pose_id: u8) -> Result<&'a HoldingPose> {
    poses
        .iter()
        .find(|p| p.pose_id == pose_id)
        .ok_or_else(|| Error::Invalid(format!("pose id {pose_id} not in pose space")))
}

/// A cycle source that renders cycles on demand from their plans: metadata
/// for the whole sweep is cheap, streams are synthesized per request.
pub struct SyntheticSource {
    catalog: Vec<ObjectSpec>,
    poses: Vec<HoldingPose>,
    cfg: SimConfig,
    plans: HashMap<String, CyclePlan>,
    metas: Vec<CycleMeta>,
    tally: LabelTally,
}

impl SyntheticSource {
    pub fn new(
        catalog: Vec<ObjectSpec>,
        poses: Vec<HoldingPose>,
        cfg: SimConfig,
        master_seed: u64,
    ) -> Result<Self> {
        let plan_list = plan_cycles(&catalog, &poses, master_seed)?;
        let mut metas = Vec::with_capacity(plan_list.len());
        let mut tally = LabelTally::default();
        let mut plans = HashMap::with_capacity(plan_list.len());
        for plan in plan_list {
            let obj = &catalog[plan.object_index];
            let pose = pose_by_id(&poses, plan.pose_id)?;
            let meta = plan_meta(
                obj,
                &plan.grasp_point_id,
                plan.grip_force,
                pose,
                &cfg,
                plan.seed,
            )?;
            tally.record(&meta);
            metas.push(meta);
            plans.insert(plan.cycle_id.clone(), plan);
        }
        Ok(SyntheticSource {
            catalog,
            poses,
            cfg,
            plans,
            metas,
            tally,
        })
    }

    pub fn tally(&self) -> &LabelTally {
        &self.tally
    }
}

impl CycleSource for SyntheticSource {
    fn metas(&self) -> &[CycleMeta] {
        &self.metas
    }

    fn load_cycle(&self, cycle_id: &str) -> Result<GraspCycle> {
        let plan = self
            .plans
            .get(cycle_id)
            .ok_or_else(|| Error::Invalid(format!("unknown cycle `{cycle_id}`")))?;
        let obj = &self.catalog[plan.object_index];
        let pose = pose_by_id(&self.poses, plan.pose_id)?;
        simulate_cycle(
            obj,
            &plan.grasp_point_id,
            plan.grip_force,
            pose,
            &self.cfg,
            plan.seed,
        )
    }
}
