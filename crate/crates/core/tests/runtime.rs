use std::f64::consts::{PI, TAU};

use inbetween::features::*;
use inbetween::math::{Quat, Vec2, Vec3};
use inbetween::motion::{MotionClip, Pose};
use inbetween::network::{Moe, MoeConfig};
use inbetween::phase::{PhaseParams, PhaseSeries};
use inbetween::runtime::*;
use inbetween::synth::{self, GaitParams};
use proptest::prelude::*;

fn traj(p: (f64, f64), f: (f64, f64), v: (f64, f64)) -> TrajPoint {
    TrajPoint { position: Vec2::new(p.0, p.1), forward: Vec2::new(f.0, f.1), velocity: Vec2::new(v.0, v.1) }
}

#[test]
fn lambda_endpoints_and_errors() {
    assert_eq!(smooth_step_lambda(0.0, 1.0).unwrap(), 0.0);
    assert_eq!(smooth_step_lambda(1.0, 1.0).unwrap(), 1.0);
    assert_eq!(smooth_step_lambda(0.5, 1.0).unwrap(), 0.5);
    assert_eq!(smooth_step_lambda(3.0, 2.0).unwrap(), 1.0);
    assert!(smooth_step_lambda(0.0, 0.0).is_err());
    assert!(smooth_step_lambda(0.0, -1.0).is_err());
}

fn branch(seed: f64) -> Branch {
    Branch {
        positions: (0..3).map(|i| Vec3::new(seed + i as f64, 0.5 * seed, -seed)).collect(),
        rotations: (0..3).map(|i| Quat::from_euler_angles(0.1 * seed, 0.2 * i as f64, -0.3 * seed)).collect(),
        velocities: (0..3).map(|i| Vec3::new(0.0, seed * i as f64, 1.0)).collect(),
        trajectory: (0..7).map(|i| traj((seed, i as f64), (seed.sin(), seed.cos()), (1.0, seed))).collect(),
    }
}

#[test]
fn blend_endpoints_are_exact() {
    let (a, b) = (branch(0.3), branch(1.7));
    for mode in [RotationBlend::Slerp, RotationBlend::Linear6d] {
        assert_eq!(blend_bidirectional(&a, &b, 0.0, mode).unwrap(), a);
        assert_eq!(blend_bidirectional(&a, &b, 1.0, mode).unwrap(), b);
        let same = blend_bidirectional(&a, &a, 0.37, mode).unwrap();
        for (x, y) in same.positions.iter().zip(&a.positions) {
            assert!((x - y).norm() < 1e-12);
        }
        for (x, y) in same.rotations.iter().zip(&a.rotations) {
            assert!(x.angle_to(y) < 1e-6);
        }
    }
    let mid = blend_bidirectional(&a, &b, 0.5, RotationBlend::Slerp).unwrap();
    assert!((mid.positions[0] - (a.positions[0] + b.positions[0]) / 2.0).norm() < 1e-12);
    let half = a.rotations[1].angle_to(&b.rotations[1]) / 2.0;
    assert!((mid.rotations[1].angle_to(&a.rotations[1]) - half).abs() < 1e-9);
}

fn params(theta: f64, f: f64, a: f64) -> PhaseParams {
    PhaseParams { amplitude: vec![a], frequency: vec![f], bias: vec![0.0], phase: vec![theta] }
}

#[test]
fn phase_integration_examples() {
    let dt = 1.0 / 30.0;
    let next = integrate_phase(&[params(0.1, 1.0, 1.0)], &[params(2.0, 1.0, 3.0)], dt, 0.0);
    assert!((next[0].phase[0] - (0.1 + TAU / 30.0)).abs() < 1e-12);
    assert!((next[0].amplitude[0] - 1.0).abs() < 1e-12);
    let pred = params(2.0, 1.3, 3.0);
    let next = integrate_phase(&[params(0.1, 1.0, 1.0)], &[pred.clone()], dt, 1.0);
    assert!((next[0].phase[0] - 2.0).abs() < 1e-12);
    assert!((next[0].amplitude[0] - 3.0).abs() < 1e-12);
    assert_eq!(next[0].frequency, pred.frequency);

    let mut p = vec![params(0.4, 1.0, 1.0)];
    let mut total = 0.0;
    for _ in 0..30 {
        let n = integrate_phase(&p, &[params(0.0, 1.0, 1.0)], dt, 0.0);
        total += inbetween::math::wrap_angle(n[0].phase[0] - p[0].phase[0]);
        p = n;
    }
    assert!((total - TAU).abs() < 1e-6);
    assert!(inbetween::math::wrap_angle(p[0].phase[0] - 0.4).abs() < 1e-6);
}

#[test]
fn phase_rotation_preserves_norm() {
    let mut v = [0.0, 1.0];
    for _ in 0..10_000 {
        v = rotate_phase_vector(v, TAU * 1.7 / 30.0);
    }
    assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-6);
}

#[test]
fn trajectory_control_examples() {
    let desired = vec![traj((2.0, 0.0), (1.0, 0.0), (1.0, 0.0)); 7];
    let predicted = vec![traj((0.0, 0.0), (0.0, 1.0), (0.0, 0.0)); 7];
    assert_eq!(apply_trajectory_control(&desired, &predicted, 0.0), predicted);
    assert_eq!(apply_trajectory_control(&desired, &predicted, 1.0), desired);
    let mid = apply_trajectory_control(&desired, &predicted, 0.5);
    assert!((mid[3].position - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    assert!((mid[3].forward.normalize() - Vec2::new(1.0, 1.0).normalize()).norm() < 1e-12);
}

fn standing() -> MotionClip {
    let mut c = synth::standing_clip(40, "idle_subject1");
    assign_roots(&mut c, &RootConfig::default()).unwrap();
    c
}

#[test]
fn foot_ik_contracts() {
    let clip = standing();
    let s = &clip.skeleton;
    let (hip, knee, ankle, toe) = (
        s.index_of("LeftUpLeg").unwrap(),
        s.index_of("LeftLeg").unwrap(),
        s.index_of("LeftFoot").unwrap(),
        s.index_of("LeftToe").unwrap(),
    );
    let pose = clip.frames[0].clone();

    let mut ik = FootIk::new(FootIkConfig::default());
    let mut p = pose.clone();
    ik.apply(s, &mut p, &[0.0; 5]).unwrap();
    assert_eq!(p, pose);

    // Lock at onset, then shift the pelvis 2 cm sideways.
    let mut p = pose.clone();
    ik.apply(s, &mut p, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let locked = pose.positions[ankle];
    let mut shifted = pose.clone();
    for b in 0..shifted.positions.len() {
        shifted.positions[b] += Vec3::new(0.02, 0.0, 0.0);
    }
    ik.apply(s, &mut shifted, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((shifted.positions[ankle] - locked).norm() < 1e-4);
    let l1 = (pose.positions[knee] - pose.positions[hip]).norm();
    let l2 = (pose.positions[ankle] - pose.positions[knee]).norm();
    assert!(((shifted.positions[knee] - shifted.positions[hip]).norm() - l1).abs() < 1e-9);
    assert!(((shifted.positions[ankle] - shifted.positions[knee]).norm() - l2).abs() < 1e-9);
    let toe_offset = pose.positions[toe] - pose.positions[ankle];
    assert!((shifted.positions[toe] - shifted.positions[ankle] - toe_offset).norm() < 1e-9);

    // Release below threshold.
    let mut p = shifted.clone();
    ik.apply(s, &mut p, &[0.2, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(ik.locks[0].is_none());
    assert_eq!(p, shifted);
}

#[test]
fn unreachable_target_extends_the_leg() {
    let hip = Vec3::new(0.0, 1.0, 0.0);
    let knee = Vec3::new(0.0, 0.55, 0.05);
    let ankle = Vec3::new(0.0, 0.1, 0.0);
    let target = Vec3::new(0.3, -1.0, 0.2);
    let (k, a) = two_bone(&hip, &knee, &ankle, &target);
    let (l1, l2) = ((knee - hip).norm(), (ankle - knee).norm());
    let ray = (target - hip).normalize();
    assert!(((a - hip).norm() - (l1 + l2)).abs() < 1e-9);
    assert!(((a - hip).normalize() - ray).norm() < 1e-9);
    assert!(((k - hip).normalize() - ray).norm() < 1e-6);
}

/// Model whose prediction is the training-output mean for any input.
fn mean_model(clip: &MotionClip) -> Moe {
    let feats = ClipFeatures::extract(clip, &FeatureConfig::default(), PhaseSeries::zeros(5, clip.len())).unwrap();
    let store = build_dataset(&[clip.clone()], &[feats], &[None], &DatasetConfig::default()).unwrap();
    let cfg = MoeConfig { hidden: 16, gating_hidden: 8, experts: 2, ..MoeConfig::for_dims(&store.dims) };
    let mut m = Moe::new(store.dims, cfg).unwrap();
    m.layers[2].w.fill(0.0);
    m.layers[2].b.fill(0.0);
    m.input_norm = store.input_norm;
    m.gating_norm = store.gating_norm;
    m.output_norm = store.output_norm;
    m
}

fn random_model() -> Moe {
    let cfg = MoeConfig { hidden: 32, gating_hidden: 16, experts: 4, ..MoeConfig::for_dims(&Dims::lafan(0)) };
    Moe::new(Dims::lafan(0), cfg).unwrap()
}

#[test]
fn frame_count_and_lambda_schedule() {
    let mut clip = synth::walk_clip(&GaitParams::default(), 120, "walk_subject1");
    assign_roots(&mut clip, &RootConfig::default()).unwrap();
    let model = mean_model(&clip);
    let start = StartState::from_clip(&clip, 40, None).unwrap();
    for (d, n) in [(1.0, 30), (0.5, 15), (0.1, 3), (1.0 / 30.0, 1), (2.0, 60), (1.01, 31)] {
        let g = generate_transition(&model, &start, &clip.frames[80], d, &Controls::default(), &RuntimeConfig::default())
            .unwrap();
        assert_eq!(g.poses.len(), n, "duration {d}");
        assert_eq!(*g.lambdas.last().unwrap(), 1.0);
        assert!(g.lambdas.windows(2).all(|w| w[1] >= w[0]));
        let first = smooth_step_lambda((1.0 / 30.0f64).min(d), d).unwrap();
        assert!((g.lambdas[0] - first).abs() < 1e-12);
    }
    let ablation = RuntimeConfig { bidirectional: false, ..Default::default() };
    let g = generate_transition(&model, &start, &clip.frames[80], 1.0, &Controls::default(), &ablation).unwrap();
    assert!(g.lambdas.iter().all(|&l| l == 0.0));
    assert!(generate_transition(&model, &start, &clip.frames[80], 0.0, &Controls::default(), &RuntimeConfig::default())
        .is_err());
}

#[test]
fn final_frame_is_the_goal_branch() {
    let clip = standing();
    let model = mean_model(&clip);
    let start = StartState::from_clip(&clip, 35, None).unwrap();
    let cfg = RuntimeConfig { foot_ik: None, ..Default::default() };
    let mut state = RuntimeState::new(&model, &start, &clip.frames[39], 0.2, &Controls::default(), cfg).unwrap();
    let mut last = None;
    while !state.finished() {
        last = Some(state.step(&model, &Controls::default()).unwrap());
    }
    assert_eq!(last.unwrap().lambda, 1.0);
    assert!(state.step(&model, &Controls::default()).is_err());
}

#[test]
fn ring_buffers_and_cold_start() {
    let clip = standing();
    let model = random_model();
    let start = StartState::from_pose(clip.skeleton.clone(), clip.frames[0].clone());
    let state = RuntimeState::new(&model, &start, &clip.frames[10], 1.0, &Controls::default(), RuntimeConfig::default())
        .unwrap();
    let x = state.current_input(&model, &Controls::default());
    assert_eq!(x.trajectory.len(), 13);
    assert_eq!(x.contacts.len(), 7);
    assert_eq!(x.phases.len(), 130);
    assert_eq!(x.motion().len(), 588);
    assert!((x.time_deltas[6] - 1.0).abs() < 1e-12);
    // Warm-up has filled the phase window from the network.
    assert!(x.phases.iter().any(|v| *v != 0.0));
}

#[test]
fn wrong_bone_count_is_rejected() {
    let clip = standing();
    let model = random_model();
    let start = StartState::from_clip(&clip, 20, None).unwrap();
    let mut short: Pose = clip.frames[0].clone();
    short.positions.pop();
    assert!(RuntimeState::new(&model, &start, &short, 1.0, &Controls::default(), RuntimeConfig::default()).is_err());
}

#[test]
fn near_idle_transition_stays_put() {
    let clip = standing();
    let model = mean_model(&clip);
    let start = StartState::from_clip(&clip, 30, None).unwrap();
    let g = generate_transition(&model, &start, &clip.frames[30], 1.0, &Controls::default(), &RuntimeConfig::default())
        .unwrap();
    let mut prev = clip.frames[30].root.position;
    for p in &g.poses {
        assert!((p.root.position - prev).norm() < 0.10);
        prev = p.root.position;
    }
}

#[test]
fn trajectory_control_steers_the_root() {
    let clip = standing();
    let model = mean_model(&clip);
    let start = StartState::from_clip(&clip, 30, None).unwrap();
    let path: Vec<TrajPoint> = (0..60).map(|f| traj((0.02 * f as f64, 0.0), (0.0, 1.0), (0.6, 0.0))).collect();
    let controls = Controls { tau: 1.0, path: Some(path), style: vec![] };
    let g = generate_transition(&model, &start, &clip.frames[30], 1.0, &controls, &RuntimeConfig::default()).unwrap();
    assert_eq!(g.poses.len(), 30);
    assert!(g.poses.iter().all(|p| p.positions.iter().all(|v| v.iter().all(|x| x.is_finite()))));
}

#[test]
fn foot_lock_holds_across_frames() {
    let clip = standing();
    let mut ik = FootIk::new(FootIkConfig::default());
    let ankle = clip.skeleton.index_of("RightFoot").unwrap();
    let mut prev: Option<Vec3> = None;
    for k in 0..30 {
        let mut p = clip.frames[0].clone();
        let sway = Vec3::new(0.03 * (k as f64 * 0.3).sin(), 0.0, 0.02 * (k as f64 * 0.2).cos());
        for v in &mut p.positions {
            *v += sway;
        }
        ik.apply(&clip.skeleton, &mut p, &[0.0, 0.9, 0.0, 0.0, 0.0]).unwrap();
        if let Some(q) = prev {
            assert!((p.positions[ankle] - q).norm() < 1e-3);
        }
        prev = Some(p.positions[ankle]);
    }
}

proptest! {
    #[test]
    fn lambda_is_monotone(total in 0.05f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let l1 = smooth_step_lambda(lo * total, total).unwrap();
        let l2 = smooth_step_lambda(hi * total, total).unwrap();
        prop_assert!(l1 <= l2);
        prop_assert!((0.0..=1.0).contains(&l1));
    }

    #[test]
    fn integration_keeps_unit_amplitude(theta in -PI..PI, f in 0.0f64..5.0) {
        let n = integrate_phase(&[params(theta, f, 1.0)], &[params(0.0, f, 1.0)], 1.0 / 30.0, 0.0);
        prop_assert!((n[0].amplitude[0] - 1.0).abs() < 1e-12);
        prop_assert!((inbetween::math::wrap_angle(n[0].phase[0] - theta) - inbetween::math::wrap_angle(TAU * f / 30.0)).abs() < 1e-9);
    }
}
