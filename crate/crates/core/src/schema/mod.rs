//! Domain types and label algebra for grasp-cycle data, plus the on-disk
//! dataset schema shared by the generator, the feature pipeline, and the
//! evaluation protocols.
//!
//! All types here are immutable values after construction and can be shared
//! freely across workers.

mod store;

pub mod ingest;

pub use store::{
    list_cycle_ids, load_cycle, load_dataset, load_metas, save_cycle_to, save_dataset,
    write_dataset_record, DiskSource, DATASET_FILE,
};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

/// Per-phase stability annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLabel {
    /// Firm hold, no relative motion.
    Pass,
    /// Still in contact, but rotational or translational slip occurred.
    Slip,
    /// Object fell off the gripper during this phase.
    Drop,
    /// Object already fell in an earlier phase.
    NotPresent,
}

/// The four stages of a grasp cycle, totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Grasp,
    Pose,
    Shake,
    Retract,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Grasp, Phase::Pose, Phase::Shake, Phase::Retract];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Grasp => "grasp",
            Phase::Pose => "pose",
            Phase::Shake => "shake",
            Phase::Retract => "retract",
        }
    }
}

/// Collapsed two-class stability label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    Stable,
    NotStable,
}

impl BinaryLabel {
    /// Class index used by the classifiers (`Stable` = 0).
    pub fn class_index(self) -> usize {
        match self {
            BinaryLabel::Stable => 0,
            BinaryLabel::NotStable => 1,
        }
    }

    pub fn from_class_index(idx: usize) -> BinaryLabel {
        if idx == 0 {
            BinaryLabel::Stable
        } else {
            BinaryLabel::NotStable
        }
    }
}

/// Collapse a per-phase annotation to the two-class target. Total function:
/// only a firm hold counts as stable.
pub fn binary_label(label: PhaseLabel) -> BinaryLabel {
    match label {
        PhaseLabel::Pass => BinaryLabel::Stable,
        PhaseLabel::Slip | PhaseLabel::Drop | PhaseLabel::NotPresent => BinaryLabel::NotStable,
    }
}

/// A value attached to each of the four phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap<T> {
    pub grasp: T,
    pub pose: T,
    pub shake: T,
    pub retract: T,
}

impl<T: Copy> PhaseMap<T> {
    pub fn uniform(value: T) -> Self {
        PhaseMap {
            grasp: value,
            pose: value,
            shake: value,
            retract: value,
        }
    }

    pub fn get(&self, phase: Phase) -> T {
        match phase {
            Phase::Grasp => self.grasp,
            Phase::Pose => self.pose,
            Phase::Shake => self.shake,
            Phase::Retract => self.retract,
        }
    }

    pub fn set(&mut self, phase: Phase, value: T) {
        match phase {
            Phase::Grasp => self.grasp = value,
            Phase::Pose => self.pose = value,
            Phase::Shake => self.shake = value,
            Phase::Retract => self.retract = value,
        }
    }
}

/// Cycle metadata: everything about a trial except the sensor streams.
///
/// This is the unit the split protocols and the statistics reporter operate
/// on; streams are loaded lazily per cycle when features are assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMeta {
    pub cycle_id: String,
    pub object_id: String,
    pub grasp_point_id: String,
    pub grip_force_n: f64,
    pub pose_id: u8,
    #[serde(rename = "labels")]
    pub phase_labels: PhaseMap<PhaseLabel>,
    /// Seconds relative to cycle start, `(start, end)` per phase.
    pub phase_boundaries: PhaseMap<(f64, f64)>,
    /// Unknown fields preserved verbatim by the ingestion adapter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<serde_json::Value>,
}

/// One time-indexed sensor stream. Timestamps are seconds relative to cycle
/// start and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub timestamps: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> TimeSeries<T> {
    pub fn new(timestamps: Vec<f64>, values: Vec<T>) -> Self {
        assert_eq!(timestamps.len(), values.len(), "timestamp/value length mismatch");
        TimeSeries { timestamps, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the sample closest in time to `t` (ties resolve to the
    /// earlier sample).
    pub fn nearest_index(&self, t: f64) -> Option<usize> {
        if self.timestamps.is_empty() {
            return None;
        }
        let idx = self
            .timestamps
            .partition_point(|&ts| ts < t)
            .min(self.timestamps.len() - 1);
        if idx > 0 && (t - self.timestamps[idx - 1]) <= (self.timestamps[idx] - t) {
            Some(idx - 1)
        } else {
            Some(idx)
        }
    }

    pub fn nearest(&self, t: f64) -> Option<&T> {
        self.nearest_index(t).map(|i| &self.values[i])
    }

    /// Whether the stream's timestamps span `[start, end]`.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        const TOL: f64 = 1e-9;
        match (self.timestamps.first(), self.timestamps.last()) {
            (Some(&a), Some(&b)) => a <= start + TOL && b >= end - TOL,
            _ => false,
        }
    }
}

/// Sensor streams of one cycle. Tactile and RGB frames are `H×W` and
/// `H×W×3` float images; wrench samples are `[fx, fy, fz, tx, ty, tz]`
/// in N and N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStreams {
    pub tactile: TimeSeries<Array2<f32>>,
    pub rgb: TimeSeries<Array3<f32>>,
    pub wrench: TimeSeries<[f64; 6]>,
    pub pre_contact_tactile: Array2<f32>,
}

/// One full grasp trial: metadata plus sensor streams.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCycle {
    pub meta: CycleMeta,
    pub streams: CycleStreams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Ingested,
}

/// An in-memory collection of cycles with unique ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub cycles: Vec<GraspCycle>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn metas(&self) -> Vec<CycleMeta> {
        self.cycles.iter().map(|c| c.meta.clone()).collect()
    }
}

/// A named invariant violation found by validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: &str, rule: impl Into<String>) -> Violation {
    Violation {
        field: field.to_string(),
        rule: rule.into(),
    }
}

/// Check metadata-level invariants: label algebra, phase boundary layout,
/// force positivity, pose id range.
pub fn validate_meta(meta: &CycleMeta) -> Vec<Violation> {
    let mut out = Vec::new();

    if !(meta.grip_force_n > 0.0) {
        out.push(violation(
            "grip_force_n",
            format!("must be > 0, got {}", meta.grip_force_n),
        ));
    }
    if !(1..=16).contains(&meta.pose_id) {
        out.push(violation("pose_id", format!("must be in 1..16, got {}", meta.pose_id)));
    }

    // NotPresent is only legal after a Drop in an earlier phase.
    let mut dropped = false;
    for phase in Phase::ALL {
        let label = meta.phase_labels.get(phase);
        if label == PhaseLabel::NotPresent && !dropped {
            out.push(violation(
                &format!("labels.{}", phase.name()),
                "NotPresent without prior Drop",
            ));
        }
        if label == PhaseLabel::Drop {
            dropped = true;
        }
    }

    // Boundaries: ordered per phase order, non-overlapping, contiguous.
    const TOL: f64 = 1e-9;
    for phase in Phase::ALL {
        let (start, end) = meta.phase_boundaries.get(phase);
        if !(end > start) {
            out.push(violation(
                &format!("phase_boundaries.{}", phase.name()),
                format!("empty or reversed interval ({start}, {end})"),
            ));
        }
    }
    for pair in Phase::ALL.windows(2) {
        let (_, prev_end) = meta.phase_boundaries.get(pair[0]);
        let (next_start, _) = meta.phase_boundaries.get(pair[1]);
        if next_start < prev_end - TOL {
            out.push(violation("phase_boundaries", "phase boundaries overlap"));
        } else if (next_start - prev_end).abs() > TOL {
            out.push(violation(
                "phase_boundaries",
                format!(
                    "gap between {} and {} ({prev_end} -> {next_start})",
                    pair[0].name(),
                    pair[1].name()
                ),
            ));
        }
    }

    out
}

/// Check all cycle invariants: metadata invariants plus stream coverage of
/// `[grasp.start − 1 s, retract.end]`. The returned list is empty iff the
/// cycle is schema-valid.
pub fn validate_cycle(cycle: &GraspCycle) -> Vec<Violation> {
    let mut out = validate_meta(&cycle.meta);

    let (grasp_start, _) = cycle.meta.phase_boundaries.get(Phase::Grasp);
    let (_, retract_end) = cycle.meta.phase_boundaries.get(Phase::Retract);
    let span = (grasp_start - 1.0, retract_end);

    let streams: [(&str, bool); 3] = [
        ("tactile", cycle.streams.tactile.covers(span.0, span.1)),
        ("rgb", cycle.streams.rgb.covers(span.0, span.1)),
        ("wrench", cycle.streams.wrench.covers(span.0, span.1)),
    ];
    for (name, covered) in streams {
        if !covered {
            out.push(violation(
                name,
                format!("stream must cover [{:.3}, {:.3}] s", span.0, span.1),
            ));
        }
    }

    for (name, ts) in [
        ("tactile", &cycle.streams.tactile.timestamps),
        ("rgb", &cycle.streams.rgb.timestamps),
    ] {
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            out.push(violation(name, "timestamps must be strictly increasing"));
        }
    }
    if cycle
        .streams
        .wrench
        .timestamps
        .windows(2)
        .any(|w| w[1] <= w[0])
    {
        out.push(violation("wrench", "timestamps must be strictly increasing"));
    }

    out
}

/// Whether a cycle survives the usability filter: the object must not have
/// been dropped during the grasp or pose phase (otherwise it is absent for
/// the shake phase the task predicts).
pub fn is_usable(meta: &CycleMeta) -> bool {
    meta.phase_labels.get(Phase::Grasp) != PhaseLabel::Drop
        && meta.phase_labels.get(Phase::Pose) != PhaseLabel::Drop
}

/// Drop cycles where the object was dropped during grasp or pose. Order is
/// preserved; idempotent.
pub fn filter_usable(dataset: &Dataset) -> Dataset {
    Dataset {
        cycles: dataset
            .cycles
            .iter()
            .filter(|c| is_usable(&c.meta))
            .cloned()
            .collect(),
        provenance: dataset.provenance,
    }
}

/// Metadata-level counterpart of [`filter_usable`].
pub fn filter_usable_metas(metas: &[CycleMeta]) -> Vec<CycleMeta> {
    metas.iter().filter(|m| is_usable(m)).cloned().collect()
}

/// Uniform access to a dataset's cycles, whether they live on disk, in
/// memory, or are synthesized on demand. Metadata for all cycles is always
/// available; full streams load per cycle.
pub trait CycleSource {
    fn metas(&self) -> &[CycleMeta];
    fn load_cycle(&self, cycle_id: &str) -> crate::error::Result<GraspCycle>;
}

/// [`CycleSource`] view over an in-memory [`Dataset`].
pub struct MemorySource {
    dataset: Dataset,
    metas: Vec<CycleMeta>,
}

impl MemorySource {
    pub fn new(dataset: Dataset) -> Self {
        let metas = dataset.metas();
        MemorySource { dataset, metas }
    }
}

impl CycleSource for MemorySource {
    fn metas(&self) -> &[CycleMeta] {
        &self.metas
    }

    fn load_cycle(&self, cycle_id: &str) -> crate::error::Result<GraspCycle> {
        self.dataset
            .cycles
            .iter()
            .find(|c| c.meta.cycle_id == cycle_id)
            .cloned()
            .ok_or_else(|| crate::error::Error::Invalid(format!("unknown cycle `{cycle_id}`")))
    }
}

#[cfg(test)]
mod tests;
