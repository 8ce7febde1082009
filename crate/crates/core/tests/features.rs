use std::f64::consts::{FRAC_PI_2, TAU};

use inbetween::features::*;
use inbetween::math::{heading, Vec2};
use inbetween::phase::PhaseSeries;
use inbetween::synth::{self, GaitParams, Schedule};
use inbetween::Error;

fn feats(clip: &inbetween::motion::MotionClip) -> ClipFeatures {
    ClipFeatures::extract(clip, &FeatureConfig::default(), PhaseSeries::zeros(5, clip.len())).unwrap()
}

#[test]
fn standing_trajectory_is_constant() {
    let clip = synth::standing_clip(60, "idle_subject1");
    let t = compute_root_trajectory(&clip, &RootConfig::default()).unwrap();
    for p in &t.points {
        assert!((p.position - t.points[0].position).norm() < 1e-9);
        assert!((p.forward - Vec2::new(0.0, 1.0)).norm() < 1e-6);
        assert!(p.velocity.norm() < 1e-9);
    }
}

#[test]
fn straight_walk_follows_the_line() {
    let p = GaitParams { start_heading: FRAC_PI_2, ..GaitParams::default() };
    let clip = synth::walk_clip(&p, 61, "walk_subject1");
    let t = compute_root_trajectory(&clip, &RootConfig::default()).unwrap();
    for (f, pt) in t.points.iter().enumerate() {
        let time = f as f64 / 30.0;
        assert!((pt.position - Vec2::new(time, 0.0)).norm() < 0.05, "frame {f}: {:?}", pt.position);
        assert!((pt.velocity.norm() - 1.0).abs() < 0.1, "frame {f}: speed {}", pt.velocity.norm());
    }
}

#[test]
fn turn_in_place_sweeps_monotonically() {
    let p = GaitParams {
        speed: Schedule::constant(0.0),
        turn_rate: Schedule::constant(TAU / 2.0),
        ..GaitParams::default()
    };
    let clip = synth::walk_clip(&p, 61, "turn_subject1");
    let t = compute_root_trajectory(&clip, &RootConfig { sigma: 0.0, ..Default::default() }).unwrap();
    let mut total = 0.0;
    for w in t.points.windows(2) {
        let d = inbetween::math::wrap_angle(heading(&w[1].forward) - heading(&w[0].forward));
        assert!(d > 0.0);
        total += d;
    }
    assert!((total - TAU).abs() < 0.05, "swept {total}");
}

#[test]
fn contacts_match_the_plant_schedule() {
    let p = GaitParams::varied(1);
    let clip = synth::walk_clip(&p, 300, "walk_subject2");
    let c = detect_contacts(&clip, &ContactConfig::default()).unwrap();
    let plan = synth::plant_schedule(&p, 300, 30.0);
    let agree = c
        .labels
        .iter()
        .zip(&plan)
        .filter(|(l, s)| (l[0] > 0.5) == s[0] && (l[1] > 0.5) == s[1])
        .count();
    assert!(agree as f64 >= 0.95 * 300.0, "agreement {agree}/300");
    assert!(c.labels.iter().all(|l| l[2] == 0.0 && l[3] == 0.0 && l[4] == 0.0));
}

#[test]
fn planted_feet_are_labelled_and_fast_feet_are_not() {
    let clip = synth::standing_clip(20, "idle_subject1");
    let c = detect_contacts(&clip, &ContactConfig::default()).unwrap();
    assert!(c.labels.iter().all(|l| l[0] == 1.0 && l[1] == 1.0));

    let mut moving = clip.clone();
    let toe = moving.skeleton.index_of("LeftToe").unwrap();
    for f in &mut moving.frames {
        f.velocities[toe] = inbetween::math::Vec3::new(2.0, 0.0, 0.0);
    }
    let c = detect_contacts(&moving, &ContactConfig::default()).unwrap();
    assert!(c.labels.iter().all(|l| l[0] == 0.0 && l[1] == 1.0));
    assert!(detect_contacts(&clip, &ContactConfig::uniform(0.0, 1.0)).is_err());
}

#[test]
fn window_geometry() {
    let w = TimeWindow::past_future(30.0);
    assert_eq!(w.len(), 13);
    assert_eq!(w.offsets[PIVOT], 0);
    assert_eq!((w.offsets[0], w.offsets[12]), (-30, 30));
    let times = w.times();
    for k in 0..13 {
        assert!((times[k] - (-1.0 + k as f64 / 6.0)).abs() < 1e-12);
    }
    assert_eq!(TimeWindow::past(30.0).offsets, vec![-30, -25, -20, -15, -10, -5, 0]);
    assert_eq!(TimeWindow::future(30.0).offsets, vec![0, 5, 10, 15, 20, 25, 30]);
}

#[test]
fn vector_widths() {
    let clip = synth::walk_clip(&GaitParams::default(), 90, "walk_subject1");
    let f = feats(&clip);
    let (x, y) = sample_training_pair(&clip, &f, 40, 20, &[]).unwrap();
    assert_eq!(x.motion().len(), 588);
    assert_eq!(x.gating().len(), 130);
    assert_eq!(y.to_vec().len(), 757);
    let d = Dims::lafan(0);
    assert_eq!(InputVector::from_vectors(&d, &x.motion(), &x.gating()).unwrap(), x);
    assert_eq!(OutputVector::from_slice(&d, &y.to_vec()).unwrap(), y);
    assert!(matches!(
        sample_training_pair(&clip, &f, 40, 61, &[]),
        Err(Error::InvalidArgument(_))
    ));
    assert!(sample_training_pair(&clip, &f, 40, 0, &[]).is_err());
}

#[test]
fn static_clip_fixed_point() {
    let clip = synth::standing_clip(80, "idle_subject1");
    let f = feats(&clip);
    let (x, y) = sample_training_pair(&clip, &f, 40, 1, &[]).unwrap();
    for b in 0..22 {
        assert!((x.target.positions[b] - x.state.positions[b]).norm() < 1e-9);
        for k in 0..6 {
            assert!((x.target.rotations[b][k] - x.state.rotations[b][k]).abs() < 1e-9);
        }
        assert!((y.pose.positions[b] - x.state.positions[b]).norm() < 1e-9);
        assert!(y.target_pose.positions[b].norm() < 1e-9);
    }
}

#[test]
fn target_space_round_trip() {
    let clip = synth::walk_clip(&GaitParams::varied(2), 120, "walk_subject3");
    let f = feats(&clip);
    let (x, _) = sample_training_pair(&clip, &f, 50, 37, &[]).unwrap();
    let target_root = f.trajectory.points[87].root();
    let ego = f.trajectory.points[50].root();
    for (k, t) in x.trajectory.iter().enumerate() {
        let world = t.to_world(&target_root);
        let back = world.to_local(&ego).to_world(&ego).to_local(&target_root);
        assert!((back.position - t.position).norm() < 1e-5);
        assert!((back.forward - t.forward).norm() < 1e-5);
        let truth = f.trajectory.sample(50 + TimeWindow::past_future(30.0).offsets[k]);
        assert!((world.position - truth.position).norm() < 1e-9);
    }
}

#[test]
fn time_delta_decreases_per_frame() {
    let clip = synth::walk_clip(&GaitParams::default(), 120, "walk_subject1");
    let f = feats(&clip);
    let target = 90;
    let (a, _) = sample_training_pair(&clip, &f, 40, target - 40, &[]).unwrap();
    let (b, _) = sample_training_pair(&clip, &f, 41, target - 41, &[]).unwrap();
    for (da, db) in a.time_deltas.iter().zip(&b.time_deltas) {
        if *db > 0.0 {
            assert!((da - db - 1.0 / 30.0).abs() < 1e-12);
        }
    }
    assert!(a.time_deltas.iter().all(|d| *d >= 0.0));
    assert!((a.time_deltas[PIVOT] - 50.0 / 30.0).abs() < 1e-12);
}

#[test]
fn dataset_rows_and_normalization() {
    let clip = synth::walk_clip(&GaitParams::varied(4), 100, "walk_subject1");
    let f = feats(&clip);
    let cfg = DatasetConfig { std_floor: 0.0, ..Default::default() };
    let store = build_dataset(&[clip.clone()], &[f.clone()], &[None], &cfg).unwrap();
    assert_eq!(store.rows(), 100);
    let floored = build_dataset(&[clip], &[f], &[None], &DatasetConfig::default()).unwrap();
    assert!(floored.input_norm.std.iter().all(|&s| s >= 0.01));

    let row: Vec<f64> = store.outputs.row(17).iter().map(|&v| v as f64).collect();
    let mut r = row.clone();
    store.output_norm.normalize(&mut r);
    store.output_norm.denormalize(&mut r);
    for (a, b) in r.iter().zip(&row) {
        assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
    }

    // Independent Welford pass over the normalized columns.
    for (data, norm) in [(&store.inputs, &store.input_norm), (&store.outputs, &store.output_norm)] {
        for j in 0..data.ncols() {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, &v) in data.column(j).iter().enumerate() {
                let z = (v as f64 - norm.mean[j]) / norm.std[j];
                let d = z - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (z - mean);
            }
            let std = (m2 / data.nrows() as f64).sqrt();
            assert!(mean.abs() < 1e-4, "column {j}: mean {mean}");
            if norm.std[j] != 1.0 || std > 1e-6 {
                assert!((std - 1.0).abs() < 1e-3, "column {j}: std {std}");
            }
        }
    }
}

#[test]
fn dataset_store_round_trip_and_nan_error() {
    let clip = synth::walk_clip(&GaitParams::default(), 40, "walk_subject1");
    let f = feats(&clip);
    let cfg = DatasetConfig { style_dims: 3, samples_per_frame: 2, ..Default::default() };
    let store = build_dataset(&[clip.clone()], &[f.clone()], &[Some(1)], &cfg).unwrap();
    assert_eq!(store.rows(), 80);
    assert_eq!(store.inputs.ncols(), 591);
    let dir = tempfile::tempdir().unwrap();
    store.save(dir.path()).unwrap();
    let back = TensorStore::load(dir.path()).unwrap();
    assert_eq!(back.inputs, store.inputs);
    assert_eq!(back.outputs, store.outputs);
    assert_eq!(back.output_norm, store.output_norm);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["input_layout"]["slices"][0]["name"], "trajectory");
    assert_eq!(manifest["output_layout"]["width"], 757);

    let mut bad = clip;
    bad.frames[10].positions[3].x = f64::NAN;
    match build_dataset(&[bad], &[f], &[None], &DatasetConfig::default()) {
        Err(Error::NanFeature { frame, .. }) => assert!(frame <= 10),
        other => panic!("expected NaN error, got {other:?}"),
    }
}
