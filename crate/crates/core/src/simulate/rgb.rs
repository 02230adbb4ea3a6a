//! Schematic RGB renderer.
//!
//! The learning pipeline consumes embeddings, so frames are deliberately
//! low-fidelity: a gradient background, a gripper stroke whose on-screen
//! direction follows the holding pose (orthographic camera looking along
//! +y), and the object as a colored disc at the gripper tip that disappears
//! once dropped.

use nalgebra::{UnitQuaternion, Vector3};
use ndarray::Array3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Render one RGB frame (`H×W×3`, values roughly in [0, 1]).
pub fn render_rgb(
    orientation: &UnitQuaternion<f64>,
    object_color: [f32; 3],
    object_radius_px: f64,
    object_present: bool,
    size: (usize, usize),
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Array3<f32> {
    let (h, w) = size;
    let noise = Normal::new(0.0, noise_sigma.max(1e-12)).expect("valid sigma");
    let mut img = Array3::from_shape_fn((h, w, 3), |(r, _, _)| {
        0.10 + 0.15 * (r as f32 / h.max(1) as f32)
    });

    // Screen-space gripper direction: approach vector projected onto the
    // camera plane (x right, z up on screen).
    let approach = orientation * Vector3::new(0.0, 0.0, -1.0);
    let (mut dx, mut dy) = (approach.x, -approach.z); // screen y grows downward
    let norm = (dx * dx + dy * dy).sqrt();
    if norm < 1e-6 {
        // Pose looks straight at the camera; draw the arm coming from above.
        dx = 0.0;
        dy = -1.0;
    } else {
        dx /= norm;
        dy /= norm;
    }

    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let arm_len = h.min(w) as f64 * 0.45;

    // Arm stroke from the tip back along the approach direction.
    let steps = (arm_len * 2.0) as usize;
    for i in 0..=steps {
        let s = i as f64 / steps.max(1) as f64 * arm_len;
        let px = cx - dx * s;
        let py = cy - dy * s;
        stamp(&mut img, px, py, 1.1, [0.55, 0.55, 0.58]);
    }
    // Finger marks perpendicular to the arm at the tip.
    for side in [-1.0, 1.0] {
        let fx = cx + side * -dy * 2.0;
        let fy = cy + side * dx * 2.0;
        stamp(&mut img, fx, fy, 1.0, [0.70, 0.70, 0.72]);
    }

    if object_present {
        let r = object_radius_px.max(1.0);
        let ir = r.ceil() as isize;
        for dr in -ir..=ir {
            for dc in -ir..=ir {
                let dist = ((dr * dr + dc * dc) as f64).sqrt();
                if dist <= r {
                    let px = cx as isize + dc;
                    let py = cy as isize + dr + 2; // object hangs just below the tip
                    put(&mut img, py, px, object_color);
                }
            }
        }
    }

    for v in img.iter_mut() {
        *v += noise.sample(rng) as f32;
    }
    img
}

fn stamp(img: &mut Array3<f32>, x: f64, y: f64, radius: f64, color: [f32; 3]) {
    let ir = radius.ceil() as isize;
    for dr in -ir..=ir {
        for dc in -ir..=ir {
            if ((dr * dr + dc * dc) as f64).sqrt() <= radius {
                put(img, y.round() as isize + dr, x.round() as isize + dc, color);
            }
        }
    }
}

fn put(img: &mut Array3<f32>, row: isize, col: isize, color: [f32; 3]) {
    let (h, w, _) = img.dim();
    if row >= 0 && col >= 0 && (row as usize) < h && (col as usize) < w {
        for ch in 0..3 {
            img[(row as usize, col as usize, ch)] = color[ch];
        }
    }
}
