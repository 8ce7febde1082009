//! Request validation, transition generation and export.

use inbetween::eval::{angular_joint_updates, foot_skate, FootSkateConfig};
use inbetween::features::TrajPoint;
use inbetween::math::{Quat, Vec3};
use inbetween::motion::{write_bvh_string, BvhOptions, MotionClip, Pose, LAFAN1_FPS};
use inbetween::runtime::{generate_with, transition_frames, Controls, StartState, StepOutput};
use nalgebra::Quaternion;

use crate::error::ApiError;
use crate::state::AppState;
use crate::store::now;
use crate::types::{quat_wxyz, FrameMessage, KeyframeRef, RootJson, TransitionMetrics, TransitionRecord, TransitionRequest};

pub fn validate(req: &TransitionRequest, state: &AppState) -> Result<(), ApiError> {
    let l = state.limits;
    // Small slack so that exactly 1/30 s is accepted.
    if !req.duration.is_finite() || req.duration < l.min_duration.max(1.0 / LAFAN1_FPS) - 1e-12 || req.duration > l.max_duration {
        return Err(ApiError::invalid(format!(
            "duration must be within [{:.4}, {}] s, got {}",
            l.min_duration.max(1.0 / LAFAN1_FPS),
            l.max_duration,
            req.duration
        )));
    }
    if !(0.0..=1.0).contains(&req.tau) {
        return Err(ApiError::invalid(format!("tau must be within [0, 1], got {}", req.tau)));
    }
    if let Some(p) = &req.path {
        p.validate()?;
    }
    Ok(())
}

fn clip_pose(state: &AppState, clip: &str, frame: usize) -> Result<Pose, ApiError> {
    let c = state.clips.get(clip).ok_or_else(|| ApiError::not_found("clip", clip))?;
    c.frames
        .get(frame)
        .cloned()
        .ok_or_else(|| ApiError::invalid(format!("frame {frame} outside clip `{clip}` of {} frames", c.len())))
}

pub fn resolve_start(state: &AppState, k: &KeyframeRef) -> Result<StartState, ApiError> {
    match k {
        KeyframeRef::Clip { clip, frame } => {
            let c = state.clips.get(clip).ok_or_else(|| ApiError::not_found("clip", clip))?;
            Ok(StartState::from_clip(c, *frame, state.phases.get(clip))?)
        }
        KeyframeRef::Pose { pose } => Ok(StartState::from_pose(state.skeleton.clone(), pose.to_pose(state.skeleton.len())?)),
    }
}

pub fn resolve_pose(state: &AppState, k: &KeyframeRef) -> Result<Pose, ApiError> {
    match k {
        KeyframeRef::Clip { clip, frame } => clip_pose(state, clip, *frame),
        KeyframeRef::Pose { pose } => pose.to_pose(state.skeleton.len()),
    }
}

fn style(state: &AppState, label: Option<&str>) -> Result<Vec<f64>, ApiError> {
    let want = state.model.dims.style;
    let v = state.pipeline.style_vector(label)?;
    if v.len() == want {
        Ok(v)
    } else if label.is_none() {
        Ok(vec![0.0; want])
    } else {
        Err(ApiError::invalid(format!("model expects {want} style dimensions, the configured labels give {}", v.len())))
    }
}

pub fn frame_message(index: usize, step: &StepOutput) -> FrameMessage {
    let p = &step.pose;
    FrameMessage {
        index,
        time: (index + 1) as f64 / LAFAN1_FPS,
        positions: p.positions.iter().map(|v| [v.x, v.y, v.z]).collect(),
        rotations: p.rotations.iter().map(quat_wxyz).collect(),
        root: RootJson::from(&p.root),
        contacts: step.contacts.to_vec(),
        lambda: step.lambda,
        phase: step.phase.clone(),
    }
}

/// Generation failure and the index of the last frame produced before it.
#[derive(Debug)]
pub struct GenerationFailure {
    pub error: ApiError,
    pub last_index: Option<usize>,
}

impl From<ApiError> for GenerationFailure {
    fn from(error: ApiError) -> Self {
        Self { error, last_index: None }
    }
}

/// Run one request for `session`, calling `on_frame` per frame (returning
/// `false` cancels). The record is not persisted here.
pub fn run(
    state: &AppState,
    session: &str,
    req: &TransitionRequest,
    mut on_frame: impl FnMut(&FrameMessage) -> bool,
) -> Result<TransitionRecord, GenerationFailure> {
    validate(req, state)?;
    let start = resolve_start(state, &req.start)?;
    let target = resolve_pose(state, &req.target)?;
    let start_pose = start.history.last().cloned().ok_or_else(|| ApiError::invalid("empty start keyframe"))?;
    let frames = transition_frames(req.duration, LAFAN1_FPS).map_err(ApiError::from)?;
    let path = match &req.path {
        // Presets are anchored at the start root.
        Some(spec) => Some(spec.build(&start_pose.root, req.duration)?.sample(frames, LAFAN1_FPS)),
        None => None,
    };
    let controls = Controls {
        tau: req.tau,
        path: path.as_ref().map(|s| s.iter().map(TrajPoint::from).collect()),
        style: style(state, req.style.as_deref())?,
    };

    let mut messages: Vec<FrameMessage> = Vec::with_capacity(frames);
    let mut cancelled = false;
    let g = generate_with(&state.model, &start, &target, req.duration, &controls, &state.runtime, |i, s| {
        let msg = frame_message(i, s);
        let keep = on_frame(&msg);
        messages.push(msg);
        cancelled = !keep;
        keep
    })
    .map_err(|e| GenerationFailure { error: e.into(), last_index: messages.len().checked_sub(1) })?;
    if cancelled {
        return Err(GenerationFailure {
            error: ApiError::new(axum::http::StatusCode::GONE, "cancelled", "stream closed by the client"),
            last_index: messages.len().checked_sub(2),
        });
    }

    let mut seq = Vec::with_capacity(g.poses.len() + 1);
    seq.push(start_pose);
    seq.extend(g.poses.iter().cloned());
    let angular_updates = angular_joint_updates(&seq, &state.skeleton, LAFAN1_FPS).map_err(ApiError::from)?;
    let skate = FootSkateConfig::lafan(&state.skeleton).ok().map(|c| foot_skate(&seq, &c));
    let path_deviation_cm = path.map(|samples| {
        let sum: f64 = g
            .poses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = &samples[(i + 1).min(samples.len() - 1)];
                (p.root.position - nalgebra::Vector2::new(s.position[0], s.position[1])).norm()
            })
            .sum();
        sum / g.poses.len() as f64 * 100.0
    });

    Ok(TransitionRecord {
        id: uuid::Uuid::new_v4().to_string(),
        session: session.to_string(),
        model_hash: state.model_hash.clone(),
        request: req.clone(),
        frames: messages,
        end_error: g.end_error,
        metrics: TransitionMetrics { angular_updates, foot_skate: skate, path_deviation_cm },
        warning: g.warning,
        created_at: now(),
    })
}

/// The transition as a clip with positions resolved by forward kinematics
/// from the first bone's position and the rotations.
pub fn transition_clip(record: &TransitionRecord, state: &AppState) -> Result<MotionClip, ApiError> {
    let s = &state.skeleton;
    let frames = record
        .frames
        .iter()
        .map(|f| {
            let rotations: Vec<Quat> = f
                .rotations
                .iter()
                .map(|q| Quat::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])))
                .collect();
            let positions: Vec<Vec3> = f.positions.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
            let mut pose = Pose { velocities: vec![Vec3::zeros(); positions.len()], positions, rotations, root: (&f.root).into() };
            pose.refresh_positions(s);
            pose
        })
        .collect();
    Ok(MotionClip::new(format!("transition_{}", record.id), s.clone(), LAFAN1_FPS, frames)?)
}

pub fn export_bvh(record: &TransitionRecord, state: &AppState) -> Result<String, ApiError> {
    if record.frames.len() < 2 {
        return Err(ApiError::invalid("BVH export needs at least 2 frames"));
    }
    Ok(write_bvh_string(&transition_clip(record, state)?, &BvhOptions::default()))
}
