//! Autoregressive transition generation.
//!
//! Each step predicts the next frame in the current root frame (ego branch)
//! and in the target's semi-joint frames (goal branch), blends the two with a
//! smooth-step weight, integrates the phase window and feeds the result back.

mod blend;
mod ik;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use blend::{
    apply_trajectory_control, blend_bidirectional, blend_traj_point, integrate_phase, rotate_phase_vector,
    smooth_step_lambda, Branch, RotationBlend,
};
pub use ik::{two_bone, FootChain, FootIk, FootIkConfig};

use crate::error::{Error, Result};
use crate::features::{
    assemble_input, compute_root_trajectory, detect_contacts, time_deltas, FeatureConfig, InputFrame, InputVector, OutputVector, PoseFeatures,
    TimeWindow, TrajPoint, CONTACT_DIM, HALF_SAMPLES, PIVOT,
};
use crate::math::{decode_rotation, encode_rotation, geodesic_angle, Quat, RootTransform, Vec2, Vec3};
use crate::motion::{MotionClip, Pose, Skeleton, LAFAN1_FPS};
use crate::network::Moe;
use crate::phase::{compute_manifold, PhaseParams, PhaseSeries};

/// Frames of per-frame history kept for the past half of the sampling window.
pub const HISTORY_FRAMES: usize = 31;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuntimeConfig {
    /// Weight of the predicted phase against the integrated one.
    pub beta: f64,
    /// `false` disables the goal branch (lambda fixed at 0).
    pub bidirectional: bool,
    pub rotation_blend: RotationBlend,
    pub foot_ik: Option<FootIkConfig>,
    /// In-place steps used to seed the phase window when no phases are known.
    pub warmup_steps: usize,
    /// Mean end-pose position error (cm) above which a warning is attached.
    pub end_error_warning_cm: f64,
    pub features: FeatureConfig,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            bidirectional: true,
            rotation_blend: RotationBlend::Slerp,
            foot_ik: Some(FootIkConfig::default()),
            warmup_steps: 30,
            end_error_warning_cm: 20.0,
            features: FeatureConfig::default(),
        }
    }
}

/// User controls for one transition.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Controls {
    /// Weight toward the desired path, in [0, 1].
    pub tau: f64,
    /// Desired world trajectory, one sample per generated frame; the last
    /// sample is held beyond its end.
    pub path: Option<Vec<TrajPoint>>,
    pub style: Vec<f64>,
}

/// Frames preceding the transition, oldest first; the last one is the start pose.
#[derive(Clone, Debug)]
pub struct StartState {
    pub skeleton: Skeleton,
    pub history: Vec<Pose>,
    /// Phase parameters aligned with `history`, when known.
    pub phases: Option<Vec<PhaseParams>>,
}

impl StartState {
    /// Up to one second of history ending at `frame` of `clip`.
    pub fn from_clip(clip: &MotionClip, frame: usize, phases: Option<&PhaseSeries>) -> Result<Self> {
        if frame >= clip.len() {
            return Err(Error::InvalidArgument(format!("start frame {frame} outside clip of {} frames", clip.len())));
        }
        let first = frame.saturating_sub(HISTORY_FRAMES - 1);
        Ok(Self {
            skeleton: clip.skeleton.clone(),
            history: clip.frames[first..=frame].to_vec(),
            phases: phases.map(|p| p.params[first..=frame].to_vec()),
        })
    }

    /// A single authored pose, held still.
    pub fn from_pose(skeleton: Skeleton, pose: Pose) -> Self {
        Self { skeleton, history: vec![pose], phases: None }
    }
}

/// Result of one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepOutput {
    pub pose: Pose,
    pub contacts: [f64; CONTACT_DIM],
    pub lambda: f64,
    /// Current manifold vector, `2C` floats.
    pub phase: Vec<f64>,
    pub omega: Vec<f64>,
}

/// Single-owner generation state.
#[derive(Clone, Debug)]
pub struct RuntimeState {
    pub skeleton: Skeleton,
    pub pose: Pose,
    pub target: Pose,
    pub target_root: RootTransform,
    pub elapsed: f64,
    pub total: f64,
    pub frames: usize,
    pub step_index: usize,
    pub lambda: f64,
    traj_history: VecDeque<TrajPoint>,
    contact_history: VecDeque<[f64; CONTACT_DIM]>,
    phase_history: VecDeque<PhaseParams>,
    /// Current and future phase states at offsets 0, 5, .., 30 frames.
    phase_future: Vec<PhaseParams>,
    /// World trajectory at the same offsets.
    future_traj: Vec<TrajPoint>,
    ik: Option<FootIk>,
    cfg: RuntimeConfig,
    fps: f64,
}

/// Frame count for a transition of `duration` seconds.
pub fn transition_frames(duration: f64, fps: f64) -> Result<usize> {
    let n = (duration * fps - 1e-9).ceil();
    if !duration.is_finite() || n < 1.0 {
        return Err(Error::InvalidArgument(format!("transition duration {duration} s is shorter than one frame")));
    }
    Ok(n as usize)
}

fn pad_front<T: Clone>(items: Vec<T>, len: usize) -> VecDeque<T> {
    let mut out: VecDeque<T> = items.into_iter().collect();
    while out.len() < len {
        out.push_front(out.front().cloned().expect("non-empty history"));
    }
    while out.len() > len {
        out.pop_front();
    }
    out
}

fn advance(p: &PhaseParams, seconds: f64) -> PhaseParams {
    let mut q = p.clone();
    for c in 0..q.channels() {
        q.phase[c] = crate::math::wrap_angle(q.phase[c] + std::f64::consts::TAU * q.frequency[c] * seconds);
    }
    q
}

impl RuntimeState {
    pub fn new(
        model: &Moe,
        start: &StartState,
        target: &Pose,
        duration: f64,
        controls: &Controls,
        cfg: RuntimeConfig,
    ) -> Result<Self> {
        let fps = LAFAN1_FPS;
        let bones = model.dims.bones;
        if start.history.is_empty() {
            return Err(Error::InvalidArgument("start history is empty".into()));
        }
        for p in start.history.iter().chain([target]) {
            if p.bone_count() != bones {
                return Err(Error::Shape { context: "pose bones", expected: bones, found: p.bone_count() });
            }
        }
        let frames = transition_frames(duration, fps)?;

        let mut history = start.history.clone();
        if history.len() == 1 {
            let mut still = history[0].clone();
            still.velocities = vec![Vec3::zeros(); bones];
            // Held still: two identical frames give zero root velocity.
            history = vec![still.clone(), still];
        }
        let clip = MotionClip::new("history", start.skeleton.clone(), fps, history.clone())?;
        let traj = compute_root_trajectory(&clip, &cfg.features.root)?.points;
        let contacts = detect_contacts(&clip, &cfg.features.contacts)?.labels;
        let pose = {
            let mut p = history.last().unwrap().clone();
            p.root = traj.last().unwrap().root();
            p
        };

        let channels = model.dims.channels;
        let known = start.phases.as_ref().filter(|p| p.len() == history.len() && p[0].channels() == channels);
        let phase_hist = known.cloned().unwrap_or_else(|| vec![PhaseParams::zeros(channels); history.len()]);
        let current = phase_hist.last().unwrap().clone();
        let future = TimeWindow::future(fps);
        let phase_future = future.offsets.iter().map(|&o| advance(&current, o as f64 / fps)).collect();

        // Seed the future trajectory with a straight line toward the target root.
        let here = *traj.last().unwrap();
        let tr = target.root;
        let speed = (tr.position - here.position) / duration;
        let future_traj = future
            .offsets
            .iter()
            .map(|&o| {
                let u = (o as f64 / (frames as f64)).min(1.0);
                TrajPoint {
                    position: here.position + (tr.position - here.position) * u,
                    forward: crate::math::slerp2(&here.forward, &tr.forward, u),
                    velocity: if u < 1.0 { speed } else { Vec2::zeros() },
                }
            })
            .collect();

        let mut state = Self {
            skeleton: start.skeleton.clone(),
            pose,
            target: target.clone(),
            target_root: tr,
            elapsed: 0.0,
            total: duration,
            frames,
            step_index: 0,
            lambda: 0.0,
            traj_history: pad_front(traj, HISTORY_FRAMES),
            contact_history: pad_front(contacts, HISTORY_FRAMES),
            phase_history: pad_front(phase_hist, HISTORY_FRAMES),
            phase_future,
            future_traj,
            ik: cfg.foot_ik.clone().map(FootIk::new),
            cfg,
            fps,
        };
        if known.is_none() {
            for _ in 0..state.cfg.warmup_steps {
                let out = state.predict(model, controls)?.0;
                state.update_phases(&out, channels);
            }
        }
        Ok(state)
    }

    fn input_window(&self) -> (Vec<TrajPoint>, Vec<Vec<f64>>) {
        let wide = TimeWindow::past_future(self.fps);
        let mut traj = Vec::with_capacity(wide.len());
        let mut phases = Vec::with_capacity(wide.len());
        for (k, &o) in wide.offsets.iter().enumerate() {
            if k <= PIVOT {
                let idx = (HISTORY_FRAMES as isize - 1 + o) as usize;
                traj.push(self.traj_history[idx]);
                let p = if k == PIVOT { &self.phase_future[0] } else { &self.phase_history[idx] };
                phases.push(compute_manifold(p));
            } else {
                traj.push(self.future_traj[k - PIVOT]);
                phases.push(compute_manifold(&self.phase_future[k - PIVOT]));
            }
        }
        (traj, phases)
    }

    /// Network input for the current frame.
    pub fn current_input(&self, model: &Moe, controls: &Controls) -> InputVector {
        let wide = TimeWindow::past_future(self.fps);
        let past = TimeWindow::past(self.fps);
        let (traj, phases) = self.input_window();
        let phase_refs: Vec<&[f64]> = phases.iter().map(|p| p.as_slice()).collect();
        let contacts: Vec<[f64; CONTACT_DIM]> =
            past.offsets.iter().map(|&o| self.contact_history[(HISTORY_FRAMES as isize - 1 + o) as usize]).collect();
        let remaining = (self.frames - self.step_index.min(self.frames)) as f64;
        let deltas = time_deltas(&wide, remaining);
        let style = if controls.style.len() == model.dims.style { controls.style.clone() } else { vec![0.0; model.dims.style] };
        assemble_input(&InputFrame {
            trajectory: &traj,
            time_deltas: &deltas,
            pose: &self.pose,
            root: &self.pose.root,
            target: &self.target,
            target_root: &self.target_root,
            contacts: &contacts,
            phases: &phase_refs,
            style: &style,
        })
    }

    fn predict(&self, model: &Moe, controls: &Controls) -> Result<(OutputVector, Vec<f64>)> {
        let input = self.current_input(model, controls);
        let (y, omega) = model.predict(&input.motion(), &input.gating())?;
        Ok((OutputVector::from_slice(&model.dims, &y)?, omega))
    }

    fn update_phases(&mut self, out: &OutputVector, channels: usize) {
        let predicted: Vec<PhaseParams> = (0..HALF_SAMPLES)
            .map(|j| {
                let mut p = PhaseParams::zeros(channels);
                p.set_from_manifold(&out.phases[2 * channels * j..2 * channels * (j + 1)]);
                for c in 0..channels {
                    p.frequency[c] = out.frequencies[channels * j + c].max(0.0);
                    p.amplitude[c] = out.amplitudes[channels * j + c].max(0.0);
                }
                p
            })
            .collect();
        self.phase_future = integrate_phase(&self.phase_future, &predicted, 1.0 / self.fps, self.cfg.beta);
        self.phase_history.pop_front();
        self.phase_history.push_back(self.phase_future[0].clone());
    }

    /// Whether every frame of the transition has been produced.
    pub fn finished(&self) -> bool {
        self.step_index >= self.frames
    }

    /// Produce the next frame.
    pub fn step(&mut self, model: &Moe, controls: &Controls) -> Result<StepOutput> {
        if self.finished() {
            return Err(Error::InvalidArgument("transition already reached its target time".into()));
        }
        let dt = 1.0 / self.fps;
        let (out, omega) = self.predict(model, controls)?;
        let root = self.pose.root;

        let mut out = out;
        let current: Vec<Quat> = self.pose.rotations.clone();
        repair_rotations(&mut out.pose, current.iter().map(|q| root.to_local_rot(q)));
        let inv = self.target_root.rotation().inverse();
        repair_rotations(&mut out.target_pose, current.iter().map(|q| inv * q));
        let (p, r, v) = out.pose.decode(&root)?;
        let ego = Branch { positions: p, rotations: r, velocities: v, trajectory: out.trajectory.iter().map(|t| t.to_world(&root)).collect() };
        let (p, r, v) = out.target_pose.decode_semi_joint(&self.target, &self.target_root)?;
        let goal = Branch {
            positions: p,
            rotations: r,
            velocities: v,
            trajectory: out.target_trajectory.iter().map(|t| t.to_world(&self.target_root)).collect(),
        };
        let elapsed = ((self.step_index + 1) as f64 * dt).min(self.total);
        let lambda = if self.cfg.bidirectional { smooth_step_lambda(elapsed, self.total)? } else { 0.0 };
        let blended = blend_bidirectional(&ego, &goal, lambda, self.cfg.rotation_blend)?;

        let head = blended.trajectory[0];
        let new_root = RootTransform::new(head.position, head.forward);
        let mut pose = Pose { positions: blended.positions, rotations: blended.rotations, velocities: blended.velocities, root: new_root };
        let contacts = out.contacts.map(|c| c.clamp(0.0, 1.0));
        if let Some(ik) = &mut self.ik {
            ik.apply(&self.skeleton, &mut pose, &contacts)?;
        }
        if pose.positions.iter().chain(&pose.velocities).any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("runtime step".into()));
        }

        let future = TimeWindow::future(self.fps);
        let next = self.step_index as isize + 1;
        let mut controlled = match &controls.path {
            Some(path) if !path.is_empty() && controls.tau > 0.0 => {
                let last = path.len() as isize - 1;
                let desired: Vec<TrajPoint> = future
                    .frames(next)
                    .map(|f| {
                        let mut p = path[f.clamp(0, last) as usize];
                        if f > last {
                            p.velocity = Vec2::zeros();
                        }
                        p
                    })
                    .collect();
                apply_trajectory_control(&desired, &blended.trajectory, controls.tau)
            }
            _ => blended.trajectory.clone(),
        };
        controlled[0] = TrajPoint { position: new_root.position, forward: new_root.forward, velocity: head.velocity };
        self.future_traj = controlled;
        let channels = self.phase_future[0].channels();
        self.update_phases(&out, channels);

        self.traj_history.pop_front();
        self.traj_history.push_back(self.future_traj[0]);
        self.contact_history.pop_front();
        self.contact_history.push_back(contacts);
        self.pose = pose;
        self.lambda = lambda;
        self.step_index += 1;
        self.elapsed = elapsed;
        Ok(StepOutput {
            pose: self.pose.clone(),
            contacts,
            lambda,
            phase: compute_manifold(&self.phase_future[0]),
            omega,
        })
    }
}

/// Replace undecodable (degenerate) rotation encodings with `fallback`.
fn repair_rotations(features: &mut PoseFeatures, fallback: impl Iterator<Item = Quat>) {
    for (r, q) in features.rotations.iter_mut().zip(fallback) {
        if decode_rotation(r).is_err() {
            log::debug!("degenerate rotation prediction replaced by the current rotation");
            *r = encode_rotation(&q);
        }
    }
}

/// Mean per-bone position (cm) and rotation (deg) distance between two poses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EndPoseError {
    pub position_cm: f64,
    pub rotation_deg: f64,
}

pub fn end_pose_error(a: &Pose, b: &Pose) -> EndPoseError {
    let n = a.bone_count().max(1) as f64;
    EndPoseError {
        position_cm: a.positions.iter().zip(&b.positions).map(|(p, q)| (p - q).norm()).sum::<f64>() / n * 100.0,
        rotation_deg: a
            .rotations
            .iter()
            .zip(&b.rotations)
            .map(|(p, q)| geodesic_angle(p, q).to_degrees())
            .sum::<f64>()
            / n,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratedTransition {
    pub poses: Vec<Pose>,
    pub contacts: Vec<[f64; CONTACT_DIM]>,
    pub phases: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub end_error: EndPoseError,
    pub warning: Option<String>,
}

/// Generate `ceil(30 d)` frames from `start` toward `target`.
pub fn generate_transition(
    model: &Moe,
    start: &StartState,
    target: &Pose,
    duration: f64,
    controls: &Controls,
    cfg: &RuntimeConfig,
) -> Result<GeneratedTransition> {
    generate_with(model, start, target, duration, controls, cfg, |_, _| true)
}

/// Like [`generate_transition`], calling `on_frame(index, step)` after each
/// frame; returning `false` stops generation early.
pub fn generate_with(
    model: &Moe,
    start: &StartState,
    target: &Pose,
    duration: f64,
    controls: &Controls,
    cfg: &RuntimeConfig,
    mut on_frame: impl FnMut(usize, &StepOutput) -> bool,
) -> Result<GeneratedTransition> {
    let mut state = RuntimeState::new(model, start, target, duration, controls, cfg.clone())?;
    let mut g = GeneratedTransition {
        poses: Vec::with_capacity(state.frames),
        contacts: Vec::with_capacity(state.frames),
        phases: Vec::with_capacity(state.frames),
        lambdas: Vec::with_capacity(state.frames),
        end_error: EndPoseError::default(),
        warning: None,
    };
    while !state.finished() {
        let s = state.step(model, controls)?;
        let keep_going = on_frame(g.poses.len(), &s);
        g.poses.push(s.pose);
        g.contacts.push(s.contacts);
        g.phases.push(s.phase);
        g.lambdas.push(s.lambda);
        if !keep_going {
            break;
        }
    }
    if let Some(last) = g.poses.last() {
        g.end_error = end_pose_error(last, target);
        if g.end_error.position_cm > cfg.end_error_warning_cm {
            let msg = format!(
                "end pose error {:.2} cm exceeds {:.2} cm",
                g.end_error.position_cm, cfg.end_error_warning_cm
            );
            log::warn!("{msg}");
            g.warning = Some(msg);
        }
    }
    Ok(g)
}
