//! Procedural clips on a 22-bone LaFAN1-style skeleton.
//!
//! The walking generator scripts footstep plants explicitly (feet are
//! stationary in world space during stance) and solves the legs
//! analytically, so contact schedules, periods and root paths are known
//! exactly. Used by tests and as a stand-in corpus when no capture data is
//! available.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::trajectory::{compute_root_trajectory, RootConfig};
use crate::math::{yaw_rotation, Quat, Vec2, Vec3};
use crate::motion::{Bone, MotionClip, Pose, Skeleton};

pub const BONE_NAMES: [&str; 22] = [
    "Hips",
    "LeftUpLeg",
    "LeftLeg",
    "LeftFoot",
    "LeftToe",
    "RightUpLeg",
    "RightLeg",
    "RightFoot",
    "RightToe",
    "Spine",
    "Spine1",
    "Spine2",
    "Neck",
    "Head",
    "LeftShoulder",
    "LeftArm",
    "LeftForeArm",
    "LeftHand",
    "RightShoulder",
    "RightArm",
    "RightForeArm",
    "RightHand",
];

const HIP_WIDTH: f64 = 0.09;
const THIGH: f64 = 0.42;
const SHIN: f64 = 0.42;
const ANKLE_HEIGHT: f64 = 0.08;

/// LaFAN1-like skeleton: faces +Z in rest pose, left is +X, arms in T-pose.
pub fn lafan_like_skeleton() -> Skeleton {
    let parents: [Option<usize>; 22] = [
        None,
        Some(0),
        Some(1),
        Some(2),
        Some(3),
        Some(0),
        Some(5),
        Some(6),
        Some(7),
        Some(0),
        Some(9),
        Some(10),
        Some(11),
        Some(12),
        Some(11),
        Some(14),
        Some(15),
        Some(16),
        Some(11),
        Some(18),
        Some(19),
        Some(20),
    ];
    let offsets = [
        Vec3::zeros(),
        Vec3::new(HIP_WIDTH, -0.05, 0.0),
        Vec3::new(0.0, -THIGH, 0.0),
        Vec3::new(0.0, -SHIN, 0.0),
        Vec3::new(0.0, -0.06, 0.12),
        Vec3::new(-HIP_WIDTH, -0.05, 0.0),
        Vec3::new(0.0, -THIGH, 0.0),
        Vec3::new(0.0, -SHIN, 0.0),
        Vec3::new(0.0, -0.06, 0.12),
        Vec3::new(0.0, 0.10, 0.0),
        Vec3::new(0.0, 0.12, 0.0),
        Vec3::new(0.0, 0.12, 0.0),
        Vec3::new(0.0, 0.15, 0.0),
        Vec3::new(0.0, 0.10, 0.0),
        Vec3::new(0.05, 0.12, 0.0),
        Vec3::new(0.12, 0.0, 0.0),
        Vec3::new(0.28, 0.0, 0.0),
        Vec3::new(0.25, 0.0, 0.0),
        Vec3::new(-0.05, 0.12, 0.0),
        Vec3::new(-0.12, 0.0, 0.0),
        Vec3::new(-0.28, 0.0, 0.0),
        Vec3::new(-0.25, 0.0, 0.0),
    ];
    Skeleton::new(
        BONE_NAMES
            .iter()
            .zip(parents)
            .zip(offsets)
            .map(|((n, p), o)| Bone {
                name: n.to_string(),
                parent: p,
                offset: o,
            })
            .collect(),
    )
    .expect("static skeleton is valid")
}

/// Scripted walking parameters. Speed and turn rate may vary over time.
#[derive(Clone, Debug)]
pub struct GaitParams {
    /// Full gait cycles per second.
    pub cadence: f64,
    /// Fraction of the cycle a foot is planted.
    pub stance: f64,
    pub step_height: f64,
    pub hip_height: f64,
    pub arm_swing: f64,
    /// Gain of the gait-driven spine, head and forearm oscillation.
    pub upper_body: f64,
    pub start_position: Vec2,
    /// Initial heading, radians (0 faces +Z).
    pub start_heading: f64,
    pub speed: Schedule,
    pub turn_rate: Schedule,
}

/// Time-varying scalar: `base + amplitude * sin(2 pi t / period + phase)`.
#[derive(Clone, Copy, Debug)]
pub struct Schedule {
    pub base: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Self {
            base: v,
            amplitude: 0.0,
            period: 1.0,
            phase: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.base + self.amplitude * (TAU * t / self.period + self.phase).sin()
    }
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            cadence: 1.0,
            stance: 0.6,
            step_height: 0.12,
            hip_height: 0.86,
            arm_swing: 0.35,
            upper_body: 1.0,
            start_position: Vec2::zeros(),
            start_heading: 0.0,
            speed: Schedule::constant(1.0),
            turn_rate: Schedule::constant(0.0),
        }
    }
}

impl GaitParams {
    /// Meandering walk with varying speed and turns, for training corpora.
    pub fn varied(seed: u64) -> Self {
        let s = seed as f64;
        Self {
            speed: Schedule {
                base: 0.9,
                amplitude: 0.35,
                period: 9.0 + (s * 1.7) % 4.0,
                phase: s * 0.9,
            },
            turn_rate: Schedule {
                base: 0.0,
                amplitude: 0.7,
                period: 13.0 + (s * 2.3) % 5.0,
                phase: s * 1.3,
            },
            start_heading: s * 0.7,
            ..Self::default()
        }
    }

    pub fn standing() -> Self {
        Self {
            speed: Schedule::constant(0.0),
            step_height: 0.0,
            arm_swing: 0.0,
            upper_body: 0.0,
            ..Self::default()
        }
    }
}

/// Root path sampled at a fine resolution.
struct Path {
    dt: f64,
    positions: Vec<Vec2>,
    headings: Vec<f64>,
}

impl Path {
    fn integrate(p: &GaitParams, duration: f64) -> Self {
        let dt = 1.0 / 600.0;
        let n = (duration / dt).ceil() as usize + 2;
        let mut positions = Vec::with_capacity(n);
        let mut headings = Vec::with_capacity(n);
        let mut pos = p.start_position;
        let mut h = p.start_heading;
        for i in 0..n {
            positions.push(pos);
            headings.push(h);
            let t = i as f64 * dt;
            let v = p.speed.at(t).max(0.0);
            pos += Vec2::new(h.sin(), h.cos()) * v * dt;
            h += p.turn_rate.at(t) * dt;
        }
        Self {
            dt,
            positions,
            headings,
        }
    }

    fn sample(&self, t: f64) -> (Vec2, f64) {
        let x = (t / self.dt).max(0.0);
        let i = (x.floor() as usize).min(self.positions.len() - 2);
        let a = (x - i as f64).clamp(0.0, 1.0);
        (
            self.positions[i] * (1.0 - a) + self.positions[i + 1] * a,
            self.headings[i] * (1.0 - a) + self.headings[i + 1] * a,
        )
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Planned ankle state for one foot.
pub struct FootPlan {
    pub position: Vec3,
    pub heading: f64,
    pub planted: bool,
}

fn landing(path: &Path, side: f64, t_mid: f64) -> (Vec2, f64) {
    let (p, h) = path.sample(t_mid);
    let lateral = Vec2::new(h.cos(), -h.sin()) * (side * HIP_WIDTH);
    (p + lateral, h)
}

/// Ankle plan at time `t` for the foot with cycle offset `offset` and
/// lateral side `side` (+1 left, -1 right).
fn foot_plan(p: &GaitParams, path: &Path, t: f64, offset: f64, side: f64) -> FootPlan {
    let cycle = p.cadence * t + offset;
    let k = cycle.floor();
    let phase = cycle - k;
    let t_start = |k: f64| (k - offset) / p.cadence;
    let mid = |k: f64| t_start(k) + 0.5 * p.stance / p.cadence;
    if phase < p.stance {
        let (xy, h) = landing(path, side, mid(k));
        FootPlan {
            position: Vec3::new(xy.x, ANKLE_HEIGHT, xy.y),
            heading: h,
            planted: true,
        }
    } else {
        let s = (phase - p.stance) / (1.0 - p.stance);
        let (a, ha) = landing(path, side, mid(k));
        let (b, hb) = landing(path, side, mid(k + 1.0));
        let w = smoothstep(s);
        let xy = a * (1.0 - w) + b * w;
        FootPlan {
            position: Vec3::new(xy.x, ANKLE_HEIGHT + p.step_height * (PI * s).sin(), xy.y),
            heading: ha * (1.0 - w) + hb * w,
            planted: false,
        }
    }
}

/// Rotation whose local -Y axis points along `down` with local +Z as close
/// as possible to `front`.
fn aim(down: &Vec3, front: &Vec3) -> Quat {
    let y = -down.normalize();
    let z = (front - y * front.dot(&y)).normalize();
    let x = y.cross(&z);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
}

/// Global thigh and shin rotations placing the ankle at `target`.
fn solve_leg(hip: &Vec3, target: &Vec3, front: &Vec3) -> (Quat, Quat) {
    let to = target - hip;
    let d = to.norm().clamp(1e-6, THIGH + SHIN - 1e-6);
    let u = to.normalize();
    let cos_a = ((THIGH * THIGH + d * d - SHIN * SHIN) / (2.0 * THIGH * d)).clamp(-1.0, 1.0);
    let bend = (front - u * front.dot(&u)).normalize();
    let knee = hip + (u * cos_a + bend * (1.0 - cos_a * cos_a).sqrt()) * THIGH;
    let ankle = hip + u * d;
    (aim(&(knee - hip), front), aim(&(ankle - knee), front))
}

/// Whether each foot is planted at each frame of a generated walk.
pub fn plant_schedule(p: &GaitParams, frames: usize, fps: f64) -> Vec<[bool; 2]> {
    let path = Path::integrate(p, frames as f64 / fps + 1.0);
    (0..frames)
        .map(|f| {
            let t = f as f64 / fps;
            [
                foot_plan(p, &path, t, 0.0, 1.0).planted,
                foot_plan(p, &path, t, 0.5, -1.0).planted,
            ]
        })
        .collect()
}

/// Generate a scripted walk of `frames` frames at 30 fps.
pub fn walk_clip(p: &GaitParams, frames: usize, name: &str) -> MotionClip {
    let fps = 30.0;
    let skeleton = lafan_like_skeleton();
    let path = Path::integrate(p, frames as f64 / fps + 1.0);
    let idx = |n: &str| skeleton.index_of(n).unwrap();
    let (l_up, l_leg, l_foot) = (idx("LeftUpLeg"), idx("LeftLeg"), idx("LeftFoot"));
    let (r_up, r_leg, r_foot) = (idx("RightUpLeg"), idx("RightLeg"), idx("RightFoot"));
    let (l_arm, r_arm) = (idx("LeftArm"), idx("RightArm"));
    let (l_fore, r_fore) = (idx("LeftForeArm"), idx("RightForeArm"));

    let mut poses = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64 / fps;
        let (xy, heading) = path.sample(t);
        let speed = p.speed.at(t).max(0.0);
        let gait = TAU * p.cadence * t;
        let yaw = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), heading);
        let bob = 0.015 * (2.0 * gait).cos() * speed.min(1.0);
        let sway = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.04 * gait.sin() * speed.min(1.0));
        let lean = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.06 * speed);
        let hips_rot = yaw * lean * sway;
        let hips_pos = Vec3::new(xy.x, p.hip_height + bob, xy.y);

        // Start from rest-local rotations, then overwrite globals as solved.
        let mut local = vec![Quat::identity(); skeleton.len()];
        local[0] = hips_rot;
        let ub = p.upper_body;
        local[idx("Spine")] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -0.08 * ub * gait.sin());
        local[idx("Spine2")] = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), -0.03 * ub * gait.sin());
        local[idx("Head")] = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 0.05 * ub * (gait + 0.3).sin());
        let swing = p.arm_swing * gait.sin();
        let down = 75f64.to_radians();
        local[l_arm] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -swing)
            * UnitQuaternion::from_axis_angle(&Vec3::z_axis(), -down);
        local[r_arm] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -swing)
            * UnitQuaternion::from_axis_angle(&Vec3::z_axis(), down);
        local[l_fore] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), 0.3 + 0.2 * ub * gait.sin().max(0.0));
        local[r_fore] = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -0.3 - 0.2 * ub * (-gait.sin()).max(0.0));

        let (_, mut global) = skeleton.forward_kinematics(&hips_pos, &local);
        let front = yaw * Vec3::z();
        for (side, offset, up, leg, foot) in [(1.0, 0.0, l_up, l_leg, l_foot), (-1.0, 0.5, r_up, r_leg, r_foot)] {
            let plan = foot_plan(p, &path, t, offset, side);
            let hip = hips_pos + hips_rot * skeleton.bones()[up].offset;
            let (thigh, shin) = solve_leg(&hip, &plan.position, &front);
            global[up] = thigh;
            global[leg] = shin;
            global[foot] = yaw_rotation(&Vec2::new(plan.heading.sin(), plan.heading.cos()));
            global[foot + 1] = global[foot];
        }
        for i in 1..skeleton.len() {
            let parent = skeleton.parent(i).unwrap();
            local[i] = global[parent].inverse() * global[i];
        }
        poses.push(Pose::from_local(&skeleton, &hips_pos, &local));
    }

    let mut clip = MotionClip::new(name, skeleton, fps, poses).expect("generated clip is valid");
    clip.recompute_velocities();
    let traj = compute_root_trajectory(&clip, &RootConfig::default()).expect("skeleton has root bones");
    clip.set_roots(&traj.transforms());
    clip
}

/// A standing clip with both feet planted.
pub fn standing_clip(frames: usize, name: &str) -> MotionClip {
    walk_clip(&GaitParams::standing(), frames, name)
}

/// Per-channel gains of the sinusoid corpus.
pub const SINE_GAINS: [f64; 6] = [1.0, 0.8, 0.6, 1.0, 0.7, 0.9];
const SINE_OFFSETS: [f64; 6] = [0.0, 0.5, 1.0, 3.14, 3.64, 4.14];

/// A multi-channel sinusoid window with its generating parameters.
pub struct SineWindow {
    /// `[6, len]`
    pub window: Array2<f64>,
    pub frequency: f64,
    pub amplitude: f64,
}

/// Windows of `a * g_d * sin(2 pi f t + phi + o_d)` sampled at 30 fps
/// around a centered time origin, with `f` in [0.5, 4] Hz and `a` in [0.3, 2].
pub fn sine_corpus(count: usize, len: usize, seed: u64) -> Vec<SineWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f = rng.gen_range(0.5..4.0);
            let a = rng.gen_range(0.3..2.0);
            let phi = rng.gen_range(0.0..TAU);
            SineWindow { window: sine_window(f, a, phi, len), frequency: f, amplitude: a }
        })
        .collect()
}

pub fn sine_window(frequency: f64, amplitude: f64, phase: f64, len: usize) -> Array2<f64> {
    let c = (len / 2) as f64;
    Array2::from_shape_fn((SINE_GAINS.len(), len), |(d, n)| {
        let t = (n as f64 - c) / 30.0;
        amplitude * SINE_GAINS[d] * (TAU * frequency * t + phase + SINE_OFFSETS[d]).sin()
    })
}
