//! The 16-pose holding-pose sample space.
//!
//! Pose 1 is the reference pose (gripper facing straight down); poses 2–16
//! form three groups of five, each group generated by rotating the
//! end-effector about a fixed world axis in fixed-degree increments:
//!
//! * group 1 tilts about world-x (uses gravity to settle rotational play),
//! * group 2 tilts about world-y (counterbalances gravity for off-center
//!   mass), and
//! * group 3 starts from a 90° pitch and raises the object overhead in
//!   elevation increments.
//!
//! The id → group partition is contiguous: {1} reference, {2..6} G1,
//! {7..11} G2, {12..16} G3. Split protocols and manifests rely on it.

use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POSE_COUNT: u8 = 16;
pub const POSES_PER_GROUP: u8 = 5;

/// Pose group membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseGroup {
    Reference,
    G1,
    G2,
    G3,
}

impl PoseGroup {
    pub const HELD_OUT_CHOICES: [PoseGroup; 3] = [PoseGroup::G1, PoseGroup::G2, PoseGroup::G3];

    pub fn name(self) -> &'static str {
        match self {
            PoseGroup::Reference => "reference",
            PoseGroup::G1 => "g1",
            PoseGroup::G2 => "g2",
            PoseGroup::G3 => "g3",
        }
    }
}

impl std::fmt::Display for PoseGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One end-effector orientation in the sample space.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldingPose {
    pub pose_id: u8,
    pub group: PoseGroup,
    /// End-effector frame w.r.t. world; unit quaternion.
    pub orientation: UnitQuaternion<f64>,
    /// 0..4 within a group; 0 for the reference pose.
    pub index_in_group: u8,
}

impl HoldingPose {
    /// Direction the gripper approaches along, in world coordinates.
    /// The reference pose faces straight down: (0, 0, −1).
    pub fn approach_direction(&self) -> Vector3<f64> {
        self.orientation * Vector3::new(0.0, 0.0, -1.0)
    }
}

/// Generator parameters for one non-reference group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    /// World-frame rotation axis (normalized at use).
    pub axis: [f64; 3],
    pub start_deg: f64,
    pub increment_deg: f64,
    /// Fixed pitch about world-y composed before the incremental rotation;
    /// 0 for plain single-axis groups.
    #[serde(default)]
    pub pre_pitch_deg: f64,
}

/// Full sample-space configuration: one spec per non-reference group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSpaceConfig {
    pub groups: [GroupSpec; 3],
}

impl Default for PoseSpaceConfig {
    fn default() -> Self {
        PoseSpaceConfig {
            groups: [
                GroupSpec {
                    axis: [1.0, 0.0, 0.0],
                    start_deg: 30.0,
                    increment_deg: 30.0,
                    pre_pitch_deg: 0.0,
                },
                GroupSpec {
                    axis: [0.0, 1.0, 0.0],
                    start_deg: 30.0,
                    increment_deg: 30.0,
                    pre_pitch_deg: 0.0,
                },
                GroupSpec {
                    axis: [1.0, 0.0, 0.0],
                    start_deg: 15.0,
                    increment_deg: 15.0,
                    pre_pitch_deg: 90.0,
                },
            ],
        }
    }
}

impl PoseSpaceConfig {
    fn validate(&self) -> Result<()> {
        for (i, g) in self.groups.iter().enumerate() {
            let norm = Vector3::from(g.axis).norm();
            if norm < 1e-12 {
                return Err(Error::Config(format!("group {} axis has zero norm", i + 1)));
            }
            if g.increment_deg == 0.0 {
                return Err(Error::Config(format!(
                    "group {} increment must be nonzero",
                    i + 1
                )));
            }
            if !g.start_deg.is_finite() || !g.increment_deg.is_finite() {
                return Err(Error::Config(format!("group {} angles must be finite", i + 1)));
            }
        }
        Ok(())
    }
}

/// Group membership of a pose id under the fixed contiguous partition.
pub fn pose_group(pose_id: u8) -> Result<PoseGroup> {
    match pose_id {
        1 => Ok(PoseGroup::Reference),
        2..=6 => Ok(PoseGroup::G1),
        7..=11 => Ok(PoseGroup::G2),
        12..=16 => Ok(PoseGroup::G3),
        _ => Err(Error::Invalid(format!("pose_id {pose_id} out of range 1..16"))),
    }
}

/// Pose ids belonging to a group.
pub fn group_pose_ids(group: PoseGroup) -> Vec<u8> {
    match group {
        PoseGroup::Reference => vec![1],
        PoseGroup::G1 => (2..=6).collect(),
        PoseGroup::G2 => (7..=11).collect(),
        PoseGroup::G3 => (12..=16).collect(),
    }
}

/// Generate the full 16-pose sample space. Deterministic given `cfg`.
pub fn generate_pose_space(cfg: &PoseSpaceConfig) -> Result<Vec<HoldingPose>> {
    cfg.validate()?;

    let reference = UnitQuaternion::identity();
    let mut poses = vec![HoldingPose {
        pose_id: 1,
        group: PoseGroup::Reference,
        orientation: reference,
        index_in_group: 0,
    }];

    let world_y = Unit::new_normalize(Vector3::new(0.0, 1.0, 0.0));
    for (gi, spec) in cfg.groups.iter().enumerate() {
        let group = PoseGroup::HELD_OUT_CHOICES[gi];
        let axis = Unit::new_normalize(Vector3::from(spec.axis));
        let pre = UnitQuaternion::from_axis_angle(&world_y, spec.pre_pitch_deg.to_radians());
        for k in 0..POSES_PER_GROUP {
            let angle = (spec.start_deg + k as f64 * spec.increment_deg).to_radians();
            let orientation = UnitQuaternion::from_axis_angle(&axis, angle) * pre * reference;
            poses.push(HoldingPose {
                pose_id: 2 + gi as u8 * POSES_PER_GROUP + k,
                group,
                orientation,
                index_in_group: k,
            });
        }
    }

    debug_assert_eq!(poses.len(), POSE_COUNT as usize);
    Ok(poses)
}

/// Serializable pose-space table row, embedded in dataset metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseRecord {
    pub pose_id: u8,
    pub group: PoseGroup,
    pub axis: [f64; 3],
    pub angle_deg: f64,
    /// Orientation as (w, x, y, z).
    pub quaternion: [f64; 4],
}

/// Flatten the pose space to its on-disk table form.
pub fn pose_table(cfg: &PoseSpaceConfig, poses: &[HoldingPose]) -> Vec<PoseRecord> {
    poses
        .iter()
        .map(|p| {
            let (axis, angle_deg) = match p.group {
                PoseGroup::Reference => ([0.0, 0.0, 1.0], 0.0),
                PoseGroup::G1 | PoseGroup::G2 | PoseGroup::G3 => {
                    let gi = match p.group {
                        PoseGroup::G1 => 0,
                        PoseGroup::G2 => 1,
                        _ => 2,
                    };
                    let spec = &cfg.groups[gi];
                    (
                        spec.axis,
                        spec.start_deg + p.index_in_group as f64 * spec.increment_deg,
                    )
                }
            };
            let q = p.orientation.quaternion();
            PoseRecord {
                pose_id: p.pose_id,
                group: p.group,
                axis,
                angle_deg,
                quaternion: [q.w, q.i, q.j, q.k],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_space_has_sixteen_poses_in_expected_groups() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        assert_eq!(poses.len(), 16);
        let count = |g: PoseGroup| poses.iter().filter(|p| p.group == g).count();
        assert_eq!(count(PoseGroup::Reference), 1);
        assert_eq!(count(PoseGroup::G1), 5);
        assert_eq!(count(PoseGroup::G2), 5);
        assert_eq!(count(PoseGroup::G3), 5);
        assert_eq!(poses[0].pose_id, 1);
        assert_eq!(poses[0].group, PoseGroup::Reference);
    }

    #[test]
    fn zero_increment_is_rejected() {
        let mut cfg = PoseSpaceConfig::default();
        cfg.groups[1].increment_deg = 0.0;
        assert!(matches!(generate_pose_space(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn zero_axis_is_rejected() {
        let mut cfg = PoseSpaceConfig::default();
        cfg.groups[2].axis = [0.0, 0.0, 0.0];
        assert!(matches!(generate_pose_space(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn reference_pose_faces_downwards() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let dir = poses[0].approach_direction();
        assert_relative_eq!(dir.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(dir.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(dir.z, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn orientations_are_unit_norm() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        for p in &poses {
            assert!((p.orientation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_group_partition_matches_declared_ranges() {
        assert_eq!(pose_group(1).unwrap(), PoseGroup::Reference);
        assert_eq!(pose_group(2).unwrap(), PoseGroup::G1);
        assert_eq!(pose_group(6).unwrap(), PoseGroup::G1);
        assert_eq!(pose_group(7).unwrap(), PoseGroup::G2);
        assert_eq!(pose_group(11).unwrap(), PoseGroup::G2);
        assert_eq!(pose_group(12).unwrap(), PoseGroup::G3);
        assert_eq!(pose_group(16).unwrap(), PoseGroup::G3);
        assert!(pose_group(0).is_err());
        assert!(pose_group(17).is_err());
    }

    #[test]
    fn every_id_maps_to_exactly_one_group() {
        for id in 1..=16u8 {
            let g = pose_group(id).unwrap();
            assert!(group_pose_ids(g).contains(&id));
            for other in [
                PoseGroup::Reference,
                PoseGroup::G1,
                PoseGroup::G2,
                PoseGroup::G3,
            ] {
                if other != g {
                    assert!(!group_pose_ids(other).contains(&id));
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = PoseSpaceConfig::default();
        let a = generate_pose_space(&cfg).unwrap();
        let b = generate_pose_space(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_orientations_are_pairwise_distinct() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let min_sep_deg = 1.0f64;
        for i in 0..poses.len() {
            for j in (i + 1)..poses.len() {
                let angle = poses[i]
                    .orientation
                    .angle_to(&poses[j].orientation)
                    .to_degrees();
                assert!(
                    angle > min_sep_deg,
                    "poses {} and {} are only {angle:.3}° apart",
                    poses[i].pose_id,
                    poses[j].pose_id
                );
            }
        }
    }

    #[test]
    fn group_ids_match_generated_groups() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        for p in &poses {
            assert_eq!(pose_group(p.pose_id).unwrap(), p.group);
        }
    }

    #[test]
    fn pose_table_roundtrips_to_json() {
        let cfg = PoseSpaceConfig::default();
        let poses = generate_pose_space(&cfg).unwrap();
        let table = pose_table(&cfg, &poses);
        assert_eq!(table.len(), 16);
        let json = serde_json::to_string(&table).unwrap();
        let back: Vec<PoseRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 16);
        assert_eq!(back[6].pose_id, 7);
        assert_eq!(back[6].group, PoseGroup::G2);
    }
}
