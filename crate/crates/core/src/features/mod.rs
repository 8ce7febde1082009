//! Root trajectories, contacts, sampling windows and the network feature vectors.

pub mod contacts;
pub mod dataset;
pub mod trajectory;
pub mod vectors;
pub mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::RootTransform;
use crate::motion::{MotionClip, Pose};
use crate::phase::{PhaseParams, PhaseSeries};

pub use contacts::{detect_contacts, ContactConfig, ContactSeries, CONTACT_DIM};
pub use dataset::{build_dataset, ClipRows, DatasetConfig, Normalization, TensorStore};
pub use trajectory::{assign_roots, compute_root_trajectory, RootConfig, RootTrajectory, TrajPoint};
pub use vectors::{Dims, InputVector, Layout, OutputVector, PoseFeatures};
pub use window::{TimeWindow, HALF_SAMPLES, PIVOT, TRAJ_SAMPLES};

/// Longest target offset sampled during training, in frames.
pub const MAX_TARGET_OFFSET: usize = 60;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub root: RootConfig,
    pub contacts: ContactConfig,
}

/// Per-frame derived series of one clip.
#[derive(Clone, Debug)]
pub struct ClipFeatures {
    pub trajectory: RootTrajectory,
    pub contacts: ContactSeries,
    pub phases: PhaseSeries,
}

impl ClipFeatures {
    pub fn extract(clip: &MotionClip, cfg: &FeatureConfig, phases: PhaseSeries) -> Result<Self> {
        if phases.len() != clip.len() {
            return Err(Error::LengthMismatch(clip.len(), phases.len()));
        }
        Ok(Self {
            trajectory: compute_root_trajectory(clip, &cfg.root)?,
            contacts: detect_contacts(clip, &cfg.contacts)?,
            phases,
        })
    }
}

/// Remaining time (s) to the target at each window sample, clamped at zero.
pub fn time_deltas(window: &TimeWindow, frames_to_target: f64) -> Vec<f64> {
    window
        .offsets
        .iter()
        .map(|&o| ((frames_to_target - o as f64) / window.fps).max(0.0))
        .collect()
}

/// World-space state from which an input vector is assembled.
pub struct InputFrame<'a> {
    /// 13 world samples over [-1 s, +1 s].
    pub trajectory: &'a [TrajPoint],
    pub time_deltas: &'a [f64],
    pub pose: &'a Pose,
    pub root: &'a RootTransform,
    pub target: &'a Pose,
    pub target_root: &'a RootTransform,
    /// 7 past samples.
    pub contacts: &'a [[f64; CONTACT_DIM]],
    /// 13 manifold vectors.
    pub phases: &'a [&'a [f64]],
    pub style: &'a [f64],
}

pub fn assemble_input(f: &InputFrame) -> InputVector {
    InputVector {
        trajectory: f.trajectory.iter().map(|t| t.to_local(f.target_root)).collect(),
        time_deltas: f.time_deltas.to_vec(),
        state: PoseFeatures::encode(f.pose, f.root, true),
        target: PoseFeatures::encode(f.target, f.root, false),
        contacts: f.contacts.to_vec(),
        phases: f.phases.iter().flat_map(|p| p.iter().copied()).collect(),
        style: f.style.to_vec(),
    }
}

/// World-space next-frame state from which an output vector is assembled.
pub struct OutputFrame<'a> {
    /// Root of the frame the prediction is made from.
    pub root: &'a RootTransform,
    pub target: &'a Pose,
    pub target_root: &'a RootTransform,
    pub next: &'a Pose,
    /// 7 world samples over [0 s, +1 s] after the next frame.
    pub trajectory: &'a [TrajPoint],
    pub contacts: [f64; CONTACT_DIM],
    /// 7 future phase states.
    pub phases: &'a [&'a PhaseParams],
}

pub fn assemble_output(f: &OutputFrame) -> OutputVector {
    OutputVector {
        trajectory: f.trajectory.iter().map(|t| t.to_local(f.root)).collect(),
        target_trajectory: f.trajectory.iter().map(|t| t.to_local(f.target_root)).collect(),
        pose: PoseFeatures::encode(f.next, f.root, true),
        target_pose: PoseFeatures::encode_semi_joint(f.next, f.target, f.target_root),
        contacts: f.contacts,
        phases: f.phases.iter().flat_map(|p| crate::phase::compute_manifold(p)).collect(),
        frequencies: f.phases.iter().flat_map(|p| p.frequency.iter().copied()).collect(),
        amplitudes: f.phases.iter().flat_map(|p| p.amplitude.iter().copied()).collect(),
    }
}

/// One-hot style vector of width `dims`; empty when `dims` is 0.
pub fn style_vector(style: Option<usize>, dims: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; dims];
    if let Some(s) = style {
        if s >= dims {
            return Err(Error::InvalidArgument(format!("style index {s} out of range for {dims} styles")));
        }
        v[s] = 1.0;
    }
    Ok(v)
}

/// Training pair for current frame `i` and a target `dt` frames ahead.
///
/// Frames past the clip end are clamped; trajectory samples outside the
/// clip hold the boundary position with zero velocity.
pub fn sample_training_pair(
    clip: &MotionClip,
    feats: &ClipFeatures,
    i: usize,
    dt: usize,
    style: &[f64],
) -> Result<(InputVector, OutputVector)> {
    if !(1..=MAX_TARGET_OFFSET).contains(&dt) {
        return Err(Error::InvalidArgument(format!(
            "target offset {dt} outside 1..={MAX_TARGET_OFFSET}"
        )));
    }
    if i >= clip.len() {
        return Err(Error::InvalidArgument(format!("frame {i} outside clip of {} frames", clip.len())));
    }
    let last = clip.len() - 1;
    let t = (i + dt).min(last);
    let next = (i + 1).min(last);
    let fps = clip.fps;
    let wide = TimeWindow::past_future(fps);
    let past = TimeWindow::past(fps);
    let future = TimeWindow::future(fps);
    let tr = &feats.trajectory;

    let root = tr.points[i].root();
    let target_root = tr.points[t].root();
    let target = &clip.frames[t];

    let traj: Vec<TrajPoint> = wide.frames(i as isize).map(|f| tr.sample(f)).collect();
    let deltas = time_deltas(&wide, (t - i) as f64);
    let contacts: Vec<_> = past.frames(i as isize).map(|f| feats.contacts.at(f)).collect();
    let phases: Vec<&[f64]> = wide.frames(i as isize).map(|f| feats.phases.manifold_at(f)).collect();
    let input = assemble_input(&InputFrame {
        trajectory: &traj,
        time_deltas: &deltas,
        pose: &clip.frames[i],
        root: &root,
        target,
        target_root: &target_root,
        contacts: &contacts,
        phases: &phases,
        style,
    });

    let future_traj: Vec<TrajPoint> = future.frames(next as isize).map(|f| tr.sample(f)).collect();
    let future_phases: Vec<&PhaseParams> = future.frames(next as isize).map(|f| feats.phases.params_at(f)).collect();
    let output = assemble_output(&OutputFrame {
        root: &root,
        target,
        target_root: &target_root,
        next: &clip.frames[next],
        trajectory: &future_traj,
        contacts: feats.contacts.at(next as isize),
        phases: &future_phases,
    });
    Ok((input, output))
}
