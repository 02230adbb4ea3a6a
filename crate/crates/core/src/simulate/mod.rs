//! Physics-lite synthetic grasp-cycle generator.
//!
//! A quasi-static friction model stands in for the physical robot: a
//! parallel-jaw grip provides translational friction capacity `2·μ·F` and
//! torsional capacity `(2/3)·2·μ·F·a` about the grasp axis (uniform-pressure
//! contact patch of radius `a`). Gravity plus commanded pseudo-accelerations
//! load the grasp; the normalized surplus of capacity over demand is the
//! stability margin that decides the per-phase labels and drives the sensor
//! renderers. Labels come from thresholding the margin: positive is a firm
//! hold, a shallow deficit is slip, a deep one is drop.
//!
//! Cycles are generated from per-cycle derived seeds, so generation is
//! order-independent and safely parallelizable.

mod catalog;
mod cycle;
mod margin;
mod rgb;
mod tactile;

pub use catalog::default_catalog;
pub use cycle::{
    plan_cycles, plan_meta, simulate_cycle, synthesize_dataset, synthesize_to_dir, CyclePlan,
    LabelCounts, LabelTally, SyntheticSource,
};
pub use margin::{shake_margin, stability_margin};
pub use rgb::render_rgb;
pub use tactile::{render_tactile, ImprintParams, MarginTimeline, Motion, Segment};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grasp location on an object, with the center-of-mass offset (meters,
/// gripper frame: x along the finger-closing axis, z along the approach
/// axis) seen from that location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPoint {
    pub id: String,
    pub com_offset: [f64; 3],
}

/// One object in the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub object_id: String,
    /// kg
    pub mass: f64,
    /// Coulomb friction coefficient of the finger/object pairing.
    pub friction_coeff: f64,
    /// Effective contact patch radius, meters.
    pub patch_halfwidth: f64,
    pub grasp_points: Vec<GraspPoint>,
    /// Smallest of {5, 15, 40} N that lifts the object.
    pub min_lift_force: f64,
    /// Peak tactile imprint intensity relative to a full-pressure imprint;
    /// softer/high-friction surfaces imprint more.
    #[serde(default = "default_imprint_gain")]
    pub imprint_gain: f64,
    /// Schematic render color.
    #[serde(default = "default_color")]
    pub color: [f32; 3],
}

fn default_imprint_gain() -> f64 {
    0.8
}

fn default_color() -> [f32; 3] {
    [0.8, 0.4, 0.2]
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::Config(format!(
                "object {}: mass must be > 0",
                self.object_id
            )));
        }
        if !(self.friction_coeff > 0.0) {
            return Err(Error::Config(format!(
                "object {}: friction_coeff must be > 0",
                self.object_id
            )));
        }
        if !(self.patch_halfwidth > 0.0) {
            return Err(Error::Config(format!(
                "object {}: patch_halfwidth must be > 0",
                self.object_id
            )));
        }
        if self.grasp_points.is_empty() {
            return Err(Error::Config(format!(
                "object {}: needs at least one grasp point",
                self.object_id
            )));
        }
        Ok(())
    }

    pub fn grasp_point(&self, id: &str) -> Result<&GraspPoint> {
        self.grasp_points
            .iter()
            .find(|gp| gp.id == id)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "object {} has no grasp point `{id}`",
                    self.object_id
                ))
            })
    }
}

/// Disturbance applied during the stability check: a rotational impulse
/// about the gripper axis followed by arm shaking along all three axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShakeProfile {
    /// rad/s² about the gripper axis.
    pub rot_impulse: f64,
    /// m/s² peak per world axis.
    pub lin_accel_amplitude: f64,
    /// seconds.
    pub duration: f64,
}

impl Default for ShakeProfile {
    fn default() -> Self {
        ShakeProfile {
            rot_impulse: 45.0,
            lin_accel_amplitude: 3.5,
            duration: 2.0,
        }
    }
}

impl ShakeProfile {
    fn validate(&self) -> Result<()> {
        if self.rot_impulse < 0.0 || self.lin_accel_amplitude < 0.0 || self.duration < 0.0 {
            return Err(Error::Config("shake profile fields must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Normalized surplus of friction capacity over demand,
/// `(capacity − demand) / capacity`, per failure mode. Positive means the
/// grasp holds that mode; both must hold for a firm grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMargin {
    pub translational: f64,
    pub rotational: f64,
}

impl StabilityMargin {
    /// The binding margin across both modes.
    pub fn worst(&self) -> f64 {
        self.translational.min(self.rotational)
    }

    pub fn holds(&self) -> bool {
        self.worst() > 0.0
    }
}

/// Generator configuration: load model, disturbance, sensor geometry,
/// noise levels, and the cycle timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// m/s²; 0 switches gravity off entirely.
    pub gravity: f64,
    /// Margin band below 0 labeled Slip; anything deeper is Drop.
    pub slip_band: f64,
    /// Positive-margin band in which pre-slip creep dims the imprint.
    pub micro_band: f64,
    /// Upward acceleration while lifting, m/s².
    pub lift_accel: f64,
    /// Horizontal pseudo-acceleration while moving between poses, m/s².
    pub transit_accel: f64,
    pub shake: ShakeProfile,
    /// Shared sample rate of all sensor streams, Hz.
    pub sample_rate_hz: f64,
    pub tactile_size: (usize, usize),
    pub rgb_size: (usize, usize),
    pub tactile_noise: f64,
    pub rgb_noise: f64,
    pub wrench_force_noise: f64,
    pub wrench_torque_noise: f64,
    pub grasp_duration: f64,
    pub transit_duration: f64,
    pub hold_duration: f64,
    pub retract_duration: f64,
    /// Oscillation frequency of the linear shake, Hz.
    pub shake_freq_hz: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gravity: 9.81,
            slip_band: 0.15,
            micro_band: 0.10,
            lift_accel: 2.0,
            transit_accel: 1.5,
            shake: ShakeProfile::default(),
            sample_rate_hz: 5.0,
            tactile_size: (24, 24),
            rgb_size: (24, 24),
            tactile_noise: 0.01,
            rgb_noise: 0.02,
            wrench_force_noise: 0.08,
            wrench_torque_noise: 0.004,
            grasp_duration: 2.0,
            transit_duration: 2.0,
            hold_duration: 1.0,
            retract_duration: 2.0,
            shake_freq_hz: 3.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slip_band > 0.0) {
            return Err(Error::Config("slip_band must be > 0".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample_rate_hz must be > 0".into()));
        }
        if self.gravity < 0.0 {
            return Err(Error::Config("gravity must be >= 0".into()));
        }
        self.shake.validate()?;
        for (name, v) in [
            ("grasp_duration", self.grasp_duration),
            ("transit_duration", self.transit_duration),
            ("hold_duration", self.hold_duration),
            ("retract_duration", self.retract_duration),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

// Calibration harness for the default catalog and shake profile: prints the
// label mix a 26-object sweep produces. Run with --ignored --nocapture when
// retuning.
#[cfg(test)]
mod tuning {
    use crate::posespace::{generate_pose_space, PoseSpaceConfig};
    use crate::schema::{binary_label, is_usable, Phase, PhaseLabel};
    use crate::simulate::{default_catalog, plan_cycles, plan_meta, SimConfig};

    #[test]
    #[ignore]
    fn print_label_mix() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let cfg = SimConfig::default();
        let catalog = default_catalog(26, 7);
        let plans = plan_cycles(&catalog, &poses, 7).unwrap();
        let metas: Vec<_> = plans.iter().map(|p| {
            plan_meta(&catalog[p.object_index], &p.grasp_point_id, p.grip_force,
                poses.iter().find(|x| x.pose_id == p.pose_id).unwrap(), &cfg, p.seed).unwrap()
        }).collect();
        let n = metas.len() as f64;
        for phase in [Phase::Grasp, Phase::Pose, Phase::Shake] {
            let mut c = [0usize; 4];
            for m in &metas {
                match m.phase_labels.get(phase) {
                    PhaseLabel::Pass => c[0] += 1,
                    PhaseLabel::Slip => c[1] += 1,
                    PhaseLabel::Drop => c[2] += 1,
                    PhaseLabel::NotPresent => c[3] += 1,
                }
            }
            println!("{:?}: pass {} slip {} drop {} np {} | slip+drop {:.2}%",
                phase, c[0], c[1], c[2], c[3], 100.0*(c[1]+c[2]) as f64/n);
        }
        let usable: Vec<_> = metas.iter().filter(|m| is_usable(m)).collect();
        println!("usable: {} / {} = {:.2}%", usable.len(), metas.len(), 100.0*usable.len() as f64/n);
        let diff = usable.iter().filter(|m| {
            binary_label(m.phase_labels.get(Phase::Pose)) != binary_label(m.phase_labels.get(Phase::Shake))
        }).count();
        println!("pose/shake label differs (usable): {} / {} = {:.2}%", diff, usable.len(),
            100.0*diff as f64/usable.len() as f64);
        let shake_unstable = usable.iter().filter(|m| {
            binary_label(m.phase_labels.get(Phase::Shake)) == crate::schema::BinaryLabel::NotStable
        }).count();
        println!("shake NotStable (usable): {:.2}%", 100.0*shake_unstable as f64/usable.len() as f64);
    }
}
