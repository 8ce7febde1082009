//! Bi-directional blending, phase integration and trajectory control.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TrajPoint;
use crate::math::{decode_rotation, encode_rotation, slerp, slerp2, wrap_angle, Quat, Vec2, Vec3};
use crate::phase::PhaseParams;

/// Cubic smooth-step of the elapsed fraction of the transition.
pub fn smooth_step_lambda(elapsed: f64, total: f64) -> Result<f64> {
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(format!("transition time must be positive, got {total}")));
    }
    let u = (elapsed / total).clamp(0.0, 1.0);
    Ok(u * u * (3.0 - 2.0 * u))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationBlend {
    /// Spherical interpolation of decoded quaternions.
    #[default]
    Slerp,
    /// Linear blend of the forward/up encodings, decoded afterwards.
    Linear6d,
}

/// World-space prediction of one branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub positions: Vec<Vec3>,
    pub rotations: Vec<Quat>,
    pub velocities: Vec<Vec3>,
    pub trajectory: Vec<TrajPoint>,
}

fn lerp3(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    a * (1.0 - t) + b * t
}

fn lerp2(a: &Vec2, b: &Vec2, t: f64) -> Vec2 {
    a * (1.0 - t) + b * t
}

/// Blend two trajectory samples: positions and velocities linearly, directions spherically.
pub fn blend_traj_point(a: &TrajPoint, b: &TrajPoint, t: f64) -> TrajPoint {
    TrajPoint {
        position: lerp2(&a.position, &b.position, t),
        forward: slerp2(&a.forward, &b.forward, t),
        velocity: lerp2(&a.velocity, &b.velocity, t),
    }
}

/// `(1 - lambda) ego + lambda goal`, where `goal` has already been mapped
/// from target space into the ego frame.
pub fn blend_bidirectional(ego: &Branch, goal: &Branch, lambda: f64, mode: RotationBlend) -> Result<Branch> {
    if lambda <= 0.0 {
        return Ok(ego.clone());
    }
    if lambda >= 1.0 {
        return Ok(goal.clone());
    }
    let rotations = match mode {
        RotationBlend::Slerp => ego.rotations.iter().zip(&goal.rotations).map(|(a, b)| slerp(a, b, lambda)).collect(),
        RotationBlend::Linear6d => ego
            .rotations
            .iter()
            .zip(&goal.rotations)
            .map(|(a, b)| {
                let (ea, eb) = (encode_rotation(a), encode_rotation(b));
                let mixed: Vec<f64> = ea.iter().zip(&eb).map(|(x, y)| x * (1.0 - lambda) + y * lambda).collect();
                decode_rotation(&mixed)
            })
            .collect::<Result<_>>()?,
    };
    Ok(Branch {
        positions: ego.positions.iter().zip(&goal.positions).map(|(a, b)| lerp3(a, b, lambda)).collect(),
        rotations,
        velocities: ego.velocities.iter().zip(&goal.velocities).map(|(a, b)| lerp3(a, b, lambda)).collect(),
        trajectory: ego
            .trajectory
            .iter()
            .zip(&goal.trajectory)
            .map(|(a, b)| blend_traj_point(a, b, lambda))
            .collect(),
    })
}

/// Rotate a 2D manifold vector `(A sin theta, A cos theta)` forward by `angle`.
pub fn rotate_phase_vector(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [v[0] * c + v[1] * s, v[1] * c - v[0] * s]
}

/// Advance each future phase state by one frame and pull it toward the
/// network prediction with weight `beta`.
///
/// `current[j]` and `predicted[j]` describe the same future sample; the
/// rotation uses the predicted frequency.
pub fn integrate_phase(current: &[PhaseParams], predicted: &[PhaseParams], dt: f64, beta: f64) -> Vec<PhaseParams> {
    current
        .iter()
        .zip(predicted)
        .map(|(cur, pred)| {
            let mut next = pred.clone();
            for c in 0..cur.channels() {
                let (a, th) = (cur.amplitude[c], cur.phase[c]);
                let v = rotate_phase_vector([a * th.sin(), a * th.cos()], TAU * pred.frequency[c] * dt);
                let rotated = if a > 0.0 { v[0].atan2(v[1]) } else { wrap_angle(th + TAU * pred.frequency[c] * dt) };
                next.phase[c] = wrap_angle(rotated + beta * wrap_angle(pred.phase[c] - rotated));
                next.amplitude[c] = (1.0 - beta) * a + beta * pred.amplitude[c];
                next.bias[c] = cur.bias[c];
            }
            next
        })
        .collect()
}

/// Per-sample blend from the model trajectory toward the desired one with weight `tau`.
pub fn apply_trajectory_control(desired: &[TrajPoint], predicted: &[TrajPoint], tau: f64) -> Vec<TrajPoint> {
    let tau = tau.clamp(0.0, 1.0);
    predicted
        .iter()
        .zip(desired)
        .map(|(p, d)| {
            if tau <= 0.0 {
                *p
            } else if tau >= 1.0 {
                *d
            } else {
                blend_traj_point(p, d, tau)
            }
        })
        .collect()
}
