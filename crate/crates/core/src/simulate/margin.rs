//! Closed-form quasi-static stability margins for a parallel-jaw grasp.
//!
//! Frames: the gripper closes along its local x axis, so friction acts in
//! the finger plane spanned by local y and z; torsional friction resists
//! torque about local x. Loads are specified in the world frame and rotated
//! into the gripper frame by the holding pose.

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::Result;
use crate::posespace::HoldingPose;

use super::{ObjectSpec, ShakeProfile, StabilityMargin};

/// Torsional capacity factor of a uniform-pressure circular patch:
/// ∫ μ p r dA = (2/3)·μ·N·a.
const PATCH_TORSION_FACTOR: f64 = 2.0 / 3.0;

/// Margins for an explicit load. `extra_axial_torque` augments the demand
/// about the grasp axis (used for rotational disturbances).
pub(crate) fn margins_for_load(
    mass: f64,
    friction_coeff: f64,
    patch_halfwidth: f64,
    com_offset: Vector3<f64>,
    orientation: &UnitQuaternion<f64>,
    load_world: Vector3<f64>,
    grip_force: f64,
    extra_axial_torque: f64,
) -> StabilityMargin {
    let force_grip = orientation.inverse_transform_vector(&load_world) * mass;

    // Friction from two finger patches carries the in-plane force.
    let in_plane = (force_grip.y * force_grip.y + force_grip.z * force_grip.z).sqrt();
    let trans_capacity = 2.0 * friction_coeff * grip_force;
    let translational = (trans_capacity - in_plane) / trans_capacity;

    let torque = com_offset.cross(&force_grip);
    let axial = torque.x.abs() + extra_axial_torque;
    let rot_capacity = PATCH_TORSION_FACTOR * trans_capacity * patch_halfwidth;
    let rotational = (rot_capacity - axial) / rot_capacity;

    StabilityMargin {
        translational,
        rotational,
    }
}

/// Stability margin of holding `obj` at `pose` under gravity plus an
/// inertial pseudo-acceleration `accel` (world frame; it adds to gravity,
/// so a downward component loads the grasp).
pub fn stability_margin(
    obj: &ObjectSpec,
    grasp_point: &str,
    grip_force: f64,
    pose: &HoldingPose,
    accel: Vector3<f64>,
    gravity: f64,
) -> Result<StabilityMargin> {
    let gp = obj.grasp_point(grasp_point)?;
    let load = Vector3::new(0.0, 0.0, -gravity) + accel;
    Ok(margins_for_load(
        obj.mass,
        obj.friction_coeff,
        obj.patch_halfwidth,
        Vector3::from(gp.com_offset),
        &pose.orientation,
        load,
        grip_force,
        0.0,
    ))
}

/// Worst-case margin during the stability check: the linear shake is probed
/// along ±each world axis on top of gravity, and the rotational impulse adds
/// an inertial torque `m·d⊥²·α` about the grasp axis (point-mass inertia of
/// the center of mass at distance d⊥ from the axis).
pub fn shake_margin(
    obj: &ObjectSpec,
    grasp_point: &str,
    grip_force: f64,
    pose: &HoldingPose,
    shake: &ShakeProfile,
    gravity: f64,
) -> Result<StabilityMargin> {
    let gp = obj.grasp_point(grasp_point)?;
    let com = Vector3::from(gp.com_offset);
    let d_perp_sq = com.y * com.y + com.z * com.z;
    let impulse_torque = obj.mass * d_perp_sq * shake.rot_impulse;

    let gravity_vec = Vector3::new(0.0, 0.0, -gravity);
    let mut worst = margins_for_load(
        obj.mass,
        obj.friction_coeff,
        obj.patch_halfwidth,
        com,
        &pose.orientation,
        gravity_vec,
        grip_force,
        impulse_torque,
    );
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        for sign in [-1.0, 1.0] {
            let load = gravity_vec + axis * (sign * shake.lin_accel_amplitude);
            let m = margins_for_load(
                obj.mass,
                obj.friction_coeff,
                obj.patch_halfwidth,
                com,
                &pose.orientation,
                load,
                grip_force,
                impulse_torque,
            );
            worst.translational = worst.translational.min(m.translational);
            worst.rotational = worst.rotational.min(m.rotational);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posespace::{generate_pose_space, PoseSpaceConfig};
    use crate::simulate::GraspPoint;
    use approx::assert_relative_eq;

    fn test_object(com: [f64; 3]) -> ObjectSpec {
        ObjectSpec {
            object_id: "test".into(),
            mass: 1.0,
            friction_coeff: 0.5,
            patch_halfwidth: 0.008,
            grasp_points: vec![GraspPoint {
                id: "gp0".into(),
                com_offset: com,
            }],
            min_lift_force: 15.0,
            imprint_gain: 0.8,
            color: [0.5, 0.5, 0.5],
        }
    }

    fn reference_pose() -> HoldingPose {
        generate_pose_space(&PoseSpaceConfig::default()).unwrap()[0].clone()
    }

    #[test]
    fn centered_object_has_full_rotational_margin() {
        let obj = test_object([0.0, 0.0, 0.0]);
        let m = stability_margin(
            &obj,
            "gp0",
            80.0,
            &reference_pose(),
            Vector3::zeros(),
            9.81,
        )
        .unwrap();
        assert_relative_eq!(m.rotational, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reference_hold_margin_matches_hand_computation() {
        // 1 kg at 80 N with μ = 0.5: capacity 2·0.5·80 = 80 N, demand 9.81 N,
        // margin (80 − 9.81)/80 = 0.8773750.
        let obj = test_object([0.0, 0.0, 0.0]);
        let m = stability_margin(
            &obj,
            "gp0",
            80.0,
            &reference_pose(),
            Vector3::zeros(),
            9.81,
        )
        .unwrap();
        assert_relative_eq!(m.translational, 0.877375, epsilon = 1e-9);
    }

    #[test]
    fn vanishing_grip_force_sends_margins_negative() {
        let obj = test_object([0.0, 0.005, 0.01]);
        let m = stability_margin(
            &obj,
            "gp0",
            1e-9,
            &reference_pose(),
            Vector3::zeros(),
            9.81,
        )
        .unwrap();
        assert!(m.translational < -1e6);
        assert!(m.rotational < -1e6);
    }

    #[test]
    fn zero_gravity_zero_accel_gives_unit_margins() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let obj = test_object([0.01, 0.004, -0.02]);
        for pose in &poses {
            let m = stability_margin(&obj, "gp0", 15.0, pose, Vector3::zeros(), 0.0).unwrap();
            assert_relative_eq!(m.translational, 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.rotational, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn com_parallel_to_gravity_gives_zero_rotational_demand() {
        // At the reference pose gravity points along −z in the gripper frame;
        // a center of mass offset purely along z produces no torque.
        let obj = test_object([0.0, 0.0, -0.04]);
        let m = stability_margin(
            &obj,
            "gp0",
            15.0,
            &reference_pose(),
            Vector3::zeros(),
            9.81,
        )
        .unwrap();
        assert_relative_eq!(m.rotational, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_grasp_point_is_rejected() {
        let obj = test_object([0.0; 3]);
        assert!(stability_margin(
            &obj,
            "nope",
            15.0,
            &reference_pose(),
            Vector3::zeros(),
            9.81
        )
        .is_err());
    }

    #[test]
    fn margins_increase_with_grip_force() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let obj = test_object([0.01, 0.003, -0.015]);
        for pose in poses.iter().step_by(3) {
            let mut prev = f64::NEG_INFINITY;
            for force in [2.0, 5.0, 15.0, 40.0, 80.0] {
                let m = stability_margin(
                    &obj,
                    "gp0",
                    force,
                    pose,
                    Vector3::new(0.3, -0.2, -1.0),
                    9.81,
                )
                .unwrap();
                assert!(m.worst() > prev, "margin not increasing at force {force}");
                prev = m.worst();
            }
        }
    }

    #[test]
    fn shake_margin_is_no_better_than_static_margin() {
        let poses = generate_pose_space(&PoseSpaceConfig::default()).unwrap();
        let obj = test_object([0.012, -0.004, -0.02]);
        let shake = ShakeProfile::default();
        for pose in &poses {
            let static_m =
                stability_margin(&obj, "gp0", 15.0, pose, Vector3::zeros(), 9.81).unwrap();
            let shake_m = shake_margin(&obj, "gp0", 15.0, pose, &shake, 9.81).unwrap();
            assert!(shake_m.translational <= static_m.translational + 1e-12);
            assert!(shake_m.rotational <= static_m.rotational + 1e-12);
        }
    }
}
