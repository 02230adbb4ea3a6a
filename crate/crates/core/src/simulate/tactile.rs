//! Tactile imprint renderer.
//!
//! The imprint is an anisotropic Gaussian blob on a noisy background. While
//! the hold is firm the blob is stationary; while the object slips the blob
//! drifts toward the top of the sensor and its amplitude decays with the
//! accumulated slip; when the object drops the imprint fades to nothing
//! within the phase. Shallow positive margins produce a slight settling dim
//! (pre-slip creep) without moving the imprint.

use nalgebra::{UnitQuaternion, Vector3};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::schema::Phase;

/// Commanded motion during a timeline segment, as the inertial
/// pseudo-acceleration the object experiences (world frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// No object in the gripper (pre-contact or post-drop).
    Absent,
    Constant(Vector3<f64>),
    /// Sinusoidal arm shaking plus the rotational impulse.
    Shake { amplitude: f64, rot_impulse: f64 },
}

/// One homogeneous stretch of the cycle: fixed orientation, load case, and
/// stability margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub phase: Option<Phase>,
    /// Worst-mode margin while this segment's load is active.
    pub margin: f64,
    pub motion: Motion,
    pub orientation: UnitQuaternion<f64>,
}

/// Margin history of a full cycle, the renderers' ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTimeline {
    pub segments: Vec<Segment>,
    pub contact_time: f64,
    /// Instant the object fell off, if it did.
    pub drop_time: Option<f64>,
    /// End of the post-drop fade; always within the dropping phase.
    pub drop_fade_end: f64,
    pub release_time: f64,
    pub micro_band: f64,
    pub slip_band: f64,
}

/// Pre-slip creep dim rate, 1/s at zero margin.
const MICRO_RATE: f64 = 0.12;
/// True slip accumulation, 1/s scaled by slip severity.
const SLIP_RATE: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlipState {
    /// Pre-slip creep exposure (dimensionless).
    pub micro: f64,
    /// Accumulated true slip (dimensionless).
    pub slip: f64,
}

impl MarginTimeline {
    /// Integrate creep and slip up to time `t`. Piecewise-constant margins
    /// make the integral exact.
    pub fn slip_state(&self, t: f64) -> SlipState {
        let mut state = SlipState::default();
        for seg in &self.segments {
            if seg.t0 >= t {
                break;
            }
            if matches!(seg.motion, Motion::Absent) {
                continue;
            }
            let dur = (t.min(seg.t1) - seg.t0).max(0.0);
            if dur == 0.0 {
                continue;
            }
            let m = seg.margin;
            if m >= self.micro_band {
                continue;
            }
            if m >= 0.0 {
                state.micro += dur * MICRO_RATE * (1.0 - m / self.micro_band);
            } else {
                state.micro += dur * MICRO_RATE;
                let severity = (-m / self.slip_band).min(1.5);
                state.slip += dur * SLIP_RATE * (0.25 + 0.75 * severity);
            }
        }
        state
    }

    /// Whether the object is still in the gripper at `t` (drop fade aside).
    pub fn object_present(&self, t: f64) -> bool {
        match self.drop_time {
            Some(td) => t < td,
            None => t < self.release_time,
        }
    }
}

/// Blob geometry and intensity of one cycle's imprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprintParams {
    pub height: usize,
    pub width: usize,
    pub center_row: f64,
    pub center_col: f64,
    pub sigma_row: f64,
    pub sigma_col: f64,
    /// Peak intensity of the firm imprint.
    pub amplitude: f64,
    pub noise_sigma: f64,
    /// Rows the blob moves toward the top per unit accumulated slip.
    pub slip_shift_rows: f64,
    /// Amplitude fraction lost per unit accumulated slip.
    pub slip_fade: f64,
    /// Amplitude fraction lost per unit creep exposure (capped at 1 unit).
    pub micro_dim: f64,
}

/// Intensity multiplier for a given slip state; non-increasing in both
/// accumulators.
pub(crate) fn amplitude_multiplier(params: &ImprintParams, state: SlipState) -> f64 {
    let micro = (1.0 - params.micro_dim * state.micro.min(1.0)).max(0.0);
    let slip = (1.0 - params.slip_fade * state.slip).max(0.0);
    micro * slip
}

/// Render the tactile frame at time `t`. `rng` supplies the per-frame sensor
/// noise; callers derive it from the cycle seed and the frame index so the
/// frame is a pure function of `(cycle, t)`.
pub fn render_tactile(
    timeline: &MarginTimeline,
    params: &ImprintParams,
    t: f64,
    rng: &mut impl Rng,
) -> Array2<f32> {
    let noise = Normal::new(0.0, params.noise_sigma.max(1e-12)).expect("valid sigma");
    let mut img = Array2::from_shape_fn((params.height, params.width), |_| {
        noise.sample(rng) as f32
    });

    if t < timeline.contact_time || t >= timeline.release_time {
        return img;
    }

    // Post-drop: fade linearly to zero by drop_fade_end, nothing afterwards.
    let drop_factor = match timeline.drop_time {
        Some(td) if t >= td => {
            let fade_len = (timeline.drop_fade_end - td).max(1e-9);
            (1.0 - (t - td) / fade_len).max(0.0)
        }
        _ => 1.0,
    };
    if drop_factor <= 0.0 {
        return img;
    }

    let state = timeline.slip_state(t);
    let amp = params.amplitude * amplitude_multiplier(params, state) * drop_factor;
    if amp <= 0.0 {
        return img;
    }

    let center_row = params.center_row - params.slip_shift_rows * state.slip;
    let inv_2sr = 1.0 / (2.0 * params.sigma_row * params.sigma_row);
    let inv_2sc = 1.0 / (2.0 * params.sigma_col * params.sigma_col);
    for r in 0..params.height {
        let dr = r as f64 - center_row;
        for c in 0..params.width {
            let dc = c as f64 - params.center_col;
            let v = amp * (-(dr * dr * inv_2sr + dc * dc * inv_2sc)).exp();
            img[(r, c)] += v as f32;
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ImprintParams {
        ImprintParams {
            height: 24,
            width: 24,
            center_row: 12.0,
            center_col: 12.0,
            sigma_row: 3.0,
            sigma_col: 2.2,
            amplitude: 0.8,
            noise_sigma: 0.004,
            slip_shift_rows: 6.0,
            slip_fade: 0.5,
            micro_dim: 0.25,
        }
    }

    fn firm_timeline() -> MarginTimeline {
        MarginTimeline {
            segments: vec![Segment {
                t0: 1.5,
                t1: 10.0,
                phase: Some(Phase::Grasp),
                margin: 0.6,
                motion: Motion::Constant(Vector3::zeros()),
                orientation: UnitQuaternion::identity(),
            }],
            contact_time: 1.5,
            drop_time: None,
            drop_fade_end: 0.0,
            release_time: 10.0,
            micro_band: 0.10,
            slip_band: 0.15,
        }
    }

    fn argmax(img: &Array2<f32>) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f32::MIN;
        for ((r, c), &v) in img.indexed_iter() {
            if v > best_v {
                best_v = v;
                best = (r, c);
            }
        }
        best
    }

    #[test]
    fn pre_contact_frame_is_background_only() {
        let tl = firm_timeline();
        let img = render_tactile(&tl, &params(), 0.5, &mut ChaCha8Rng::seed_from_u64(1));
        let max = img.iter().cloned().fold(f32::MIN, f32::max);
        assert!(max < 0.02, "pre-contact frame should be noise only, max {max}");
    }

    #[test]
    fn firm_hold_keeps_blob_stationary() {
        let tl = firm_timeline();
        let p = params();
        let first = render_tactile(&tl, &p, 1.6, &mut ChaCha8Rng::seed_from_u64(2));
        let last = render_tactile(&tl, &p, 9.9, &mut ChaCha8Rng::seed_from_u64(3));
        let (r0, c0) = argmax(&first);
        let (r1, c1) = argmax(&last);
        assert!(r0.abs_diff(r1) <= 1 && c0.abs_diff(c1) <= 1,
            "blob moved from ({r0},{c0}) to ({r1},{c1}) during a firm hold");
    }

    #[test]
    fn slip_moves_blob_toward_top_and_dims_it() {
        let mut tl = firm_timeline();
        tl.segments[0].margin = -0.08; // inside the slip band
        let p = params();
        let early = render_tactile(&tl, &p, 1.6, &mut ChaCha8Rng::seed_from_u64(4));
        let late = render_tactile(&tl, &p, 6.0, &mut ChaCha8Rng::seed_from_u64(5));
        let (r0, _) = argmax(&early);
        let (r1, _) = argmax(&late);
        assert!(r1 < r0, "slipping blob should drift toward row 0: {r0} -> {r1}");
        let peak_early = early.iter().cloned().fold(f32::MIN, f32::max);
        let peak_late = late.iter().cloned().fold(f32::MIN, f32::max);
        assert!(peak_late < peak_early, "slipping imprint should attenuate");
    }

    #[test]
    fn drop_erases_imprint_by_fade_end() {
        let mut tl = firm_timeline();
        tl.drop_time = Some(4.0);
        tl.drop_fade_end = 4.4;
        let p = params();
        let img = render_tactile(&tl, &p, 4.5, &mut ChaCha8Rng::seed_from_u64(6));
        let max = img.iter().cloned().fold(f32::MIN, f32::max);
        assert!(max < 5.0 * p.noise_sigma as f32, "imprint must vanish after the drop, max {max}");
    }

    #[test]
    fn amplitude_multiplier_is_non_increasing_in_slip() {
        let p = params();
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let s = SlipState {
                micro: 0.3,
                slip: i as f64 * 0.05,
            };
            let mult = amplitude_multiplier(&p, s);
            assert!(mult <= prev + 1e-12);
            prev = mult;
        }
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let s = SlipState {
                micro: i as f64 * 0.05,
                slip: 0.2,
            };
            let mult = amplitude_multiplier(&p, s);
            assert!(mult <= prev + 1e-12);
            prev = mult;
        }
    }

    #[test]
    fn creep_dims_but_does_not_move_the_blob() {
        let mut tl = firm_timeline();
        tl.segments[0].margin = 0.02; // shallow positive margin
        let p = params();
        let early = render_tactile(&tl, &p, 1.6, &mut ChaCha8Rng::seed_from_u64(7));
        let late = render_tactile(&tl, &p, 9.5, &mut ChaCha8Rng::seed_from_u64(8));
        let (r0, c0) = argmax(&early);
        let (r1, c1) = argmax(&late);
        assert!(r0.abs_diff(r1) <= 1 && c0.abs_diff(c1) <= 1);
        let peak_early = early.iter().cloned().fold(f32::MIN, f32::max);
        let peak_late = late.iter().cloned().fold(f32::MIN, f32::max);
        assert!(peak_late < peak_early, "creep should dim the imprint");
    }
}
