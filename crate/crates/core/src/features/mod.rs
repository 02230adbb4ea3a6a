//! Feature extraction: grasp cycles → fixed-length standardized sequences.
//!
//! Each cycle is sampled at `n` evenly spaced timesteps (default 20) from
//! the start of the grasp to the end of the pose phase (the whole-cycle
//! span exists for the detection-style ceiling model). Per timestep the row
//! is, in fixed order:
//!
//! ```text
//! [ tactile embedding | rgb embedding | wrench (6) | grip force (1) ]
//! ```
//!
//! with the image blocks present iff their modality is selected. Tactile
//! frames are embedded as deltas against the cycle's pre-contact frame.
//! The grip force column is constant across rows. Standardization is fitted
//! on the training split only (see [`fit_standardizer`]).

mod embed;
mod standardize;

pub use embed::{
    write_embeddings, EmbeddingRecord, FileEmbedder, FrameKey, ImageData, ImageEmbedder,
    RandomProjectionEmbedder,
};
pub use standardize::{
    apply_all, apply_standardizer, fit_standardizer, Standardizer, STD_FLOOR,
};

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::schema::{binary_label, BinaryLabel, GraspCycle, Phase};

/// Which sensor window feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    /// Grasp start → pose end: the prediction task's input window.
    GraspToPoseEnd,
    /// Grasp start → retract end: the whole-cycle (detection) window.
    GraspToReleaseEnd,
}

/// Image-modality selection; the wrench and grip force are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modalities {
    pub vision: bool,
    pub tactile: bool,
}

impl Modalities {
    pub const V: Modalities = Modalities { vision: true, tactile: false };
    pub const T: Modalities = Modalities { vision: false, tactile: true };
    pub const VT: Modalities = Modalities { vision: true, tactile: true };

    pub fn validate(&self) -> Result<()> {
        if !self.vision && !self.tactile {
            return Err(Error::Config("at least one image modality must be selected".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match (self.vision, self.tactile) {
            (true, true) => "v+t",
            (true, false) => "v",
            (false, true) => "t",
            (false, false) => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Modalities> {
        match s.to_ascii_lowercase().replace(['+', '_', '-'], "").as_str() {
            "v" | "vision" => Ok(Modalities::V),
            "t" | "tactile" => Ok(Modalities::T),
            "vt" | "tv" | "both" => Ok(Modalities::VT),
            other => Err(Error::Config(format!("unknown modalities `{other}` (use v, t, or vt)"))),
        }
    }
}

/// Column layout of an assembled row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub d_tactile: usize,
    pub d_rgb: usize,
}

impl FeatureLayout {
    pub const WRENCH_DIMS: usize = 6;

    pub fn total(&self) -> usize {
        self.d_tactile + self.d_rgb + Self::WRENCH_DIMS + 1
    }

    /// Column range of the tactile block.
    pub fn tactile_cols(&self) -> std::ops::Range<usize> {
        0..self.d_tactile
    }

    pub fn rgb_cols(&self) -> std::ops::Range<usize> {
        self.d_tactile..self.d_tactile + self.d_rgb
    }

    pub fn wrench_cols(&self) -> std::ops::Range<usize> {
        let s = self.d_tactile + self.d_rgb;
        s..s + Self::WRENCH_DIMS
    }

    pub fn force_col(&self) -> usize {
        self.total() - 1
    }
}

/// A `T×D` standardized (or raw) feature matrix with the cycle's binary
/// targets attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub matrix: Array2<f64>,
    pub label_shake: BinaryLabel,
    pub label_pose: BinaryLabel,
    pub cycle_id: String,
    pub pose_id: u8,
}

impl FeatureSequence {
    pub fn timesteps(&self) -> usize {
        self.matrix.nrows()
    }

    /// Whether the pose- and shake-phase targets differ (the hard minority).
    pub fn labels_differ(&self) -> bool {
        self.label_pose != self.label_shake
    }
}

/// `n` evenly spaced timestamps over the span, endpoints included. Errors
/// if any sensor stream fails to cover the span, naming the stream.
pub fn sample_timesteps(cycle: &GraspCycle, n: usize, span: Span) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 timesteps, got {n}")));
    }
    let (start, _) = cycle.meta.phase_boundaries.get(Phase::Grasp);
    let end = match span {
        Span::GraspToPoseEnd => cycle.meta.phase_boundaries.get(Phase::Pose).1,
        Span::GraspToReleaseEnd => cycle.meta.phase_boundaries.get(Phase::Retract).1,
    };
    for (name, covered) in [
        ("tactile", cycle.streams.tactile.covers(start, end)),
        ("rgb", cycle.streams.rgb.covers(start, end)),
        ("wrench", cycle.streams.wrench.covers(start, end)),
    ] {
        if !covered {
            return Err(Error::SpanNotCovered {
                stream: name.into(),
                start,
                end,
            });
        }
    }
    let step = (end - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Elementwise difference against the pre-contact frame.
pub fn tactile_delta(
    frame: &Array2<f32>,
    pre_contact: &Array2<f32>,
) -> Result<Array2<f32>> {
    if frame.dim() != pre_contact.dim() {
        return Err(Error::ShapeMismatch(format!(
            "tactile frame {:?} vs pre-contact {:?}",
            frame.dim(),
            pre_contact.dim()
        )));
    }
    Ok(frame - pre_contact)
}

/// Assemble one cycle into a feature sequence. `emb_tactile` / `emb_rgb`
/// are consulted only for selected modalities, but the layout they imply is
/// part of the row contract (tactile block first, then rgb).
pub fn assemble(
    cycle: &GraspCycle,
    emb_tactile: &dyn ImageEmbedder,
    emb_rgb: &dyn ImageEmbedder,
    modalities: Modalities,
    n: usize,
    span: Span,
) -> Result<FeatureSequence> {
    modalities.validate()?;
    let timestamps = sample_timesteps(cycle, n, span)?;

    let d_tactile = if modalities.tactile { emb_tactile.dimension() } else { 0 };
    let d_rgb = if modalities.vision { emb_rgb.dimension() } else { 0 };
    let layout = FeatureLayout { d_tactile, d_rgb };
    let mut matrix = Array2::zeros((n, layout.total()));

    for (i, &t) in timestamps.iter().enumerate() {
        let mut col = 0usize;
        if modalities.tactile {
            let frame = cycle
                .streams
                .tactile
                .nearest(t)
                .ok_or_else(|| Error::Invalid("empty tactile stream".into()))?;
            let delta = tactile_delta(frame, &cycle.streams.pre_contact_tactile)?;
            let v = emb_tactile.embed(
                &FrameKey {
                    cycle_id: &cycle.meta.cycle_id,
                    stream: "tactile",
                    timestamp: t,
                },
                &ImageData::Gray(delta.view()),
            )?;
            for x in v {
                matrix[(i, col)] = x;
                col += 1;
            }
        }
        if modalities.vision {
            let frame = cycle
                .streams
                .rgb
                .nearest(t)
                .ok_or_else(|| Error::Invalid("empty rgb stream".into()))?;
            let v = emb_rgb.embed(
                &FrameKey {
                    cycle_id: &cycle.meta.cycle_id,
                    stream: "rgb",
                    timestamp: t,
                },
                &ImageData::Rgb(frame.view()),
            )?;
            for x in v {
                matrix[(i, col)] = x;
                col += 1;
            }
        }
        let wrench = cycle
            .streams
            .wrench
            .nearest(t)
            .ok_or_else(|| Error::Invalid("empty wrench stream".into()))?;
        for &w in wrench.iter() {
            matrix[(i, col)] = w;
            col += 1;
        }
        matrix[(i, col)] = cycle.meta.grip_force_n;
    }

    for row in matrix.rows() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite feature in cycle `{}`",
                cycle.meta.cycle_id
            )));
        }
    }

    Ok(FeatureSequence {
        matrix,
        label_shake: binary_label(cycle.meta.phase_labels.get(Phase::Shake)),
        label_pose: binary_label(cycle.meta.phase_labels.get(Phase::Pose)),
        cycle_id: cycle.meta.cycle_id.clone(),
        pose_id: cycle.meta.pose_id,
    })
}

/// Project a sequence assembled with both modalities onto a subset, using
/// the layout it was built with. The result is identical to assembling with
/// the subset directly.
pub fn project_modalities(
    seq: &FeatureSequence,
    layout: FeatureLayout,
    want: Modalities,
) -> Result<FeatureSequence> {
    want.validate()?;
    if seq.matrix.ncols() != layout.total() {
        return Err(Error::ShapeMismatch(format!(
            "sequence `{}` has {} dims, layout implies {}",
            seq.cycle_id,
            seq.matrix.ncols(),
            layout.total()
        )));
    }
    let mut cols: Vec<usize> = Vec::new();
    if want.tactile {
        cols.extend(layout.tactile_cols());
    }
    if want.vision {
        cols.extend(layout.rgb_cols());
    }
    cols.extend(layout.wrench_cols());
    cols.push(layout.force_col());
    let matrix = seq.matrix.select(Axis(1), &cols);
    Ok(FeatureSequence {
        matrix,
        ..seq.clone()
    })
}

#[cfg(test)]
mod tests;
