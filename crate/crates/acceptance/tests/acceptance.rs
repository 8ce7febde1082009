//! Acceptance run: one PASS / FAIL / BLOCKED line per criterion.
//!
//! `ACCEPTANCE_QUICK=1` shrinks the training budgets (tolerances stay put,
//! so quick-mode failures of the trained checks are expected).
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a non-zero exit.
//! `LAFAN1_DIR` points at the LaFAN1 BVH folder; without it the benchmark
//! reproduction is BLOCKED and the overfit check uses a procedural walk.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use inbetween::eval::*;
use inbetween::features::*;
use inbetween::math::{decode_rotation, encode_rotation, geodesic_angle, wrap_angle, Quat, Vec2, Vec3};
use inbetween::motion::*;
use inbetween::network::{train, Moe, MoeConfig, TrainConfig};
use inbetween::phase::*;
use inbetween::pipeline::PipelineConfig;
use inbetween::runtime::*;
use inbetween::synth::{self, GaitParams};
use inbetween_service::generate;
use inbetween_service::path::PathSpec;
use inbetween_service::types::{KeyframeRef, TransitionRecord, TransitionRequest};
use inbetween_service::{AppState, Limits, Store};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const IDENTITY_TOL: f64 = 1e-6;
const IDENTITY_SAMPLES: usize = 100_000;
const PAE_REL_TOL: f64 = 0.10;
const PAE_RECON_RMS_TOL: f64 = 0.05;
const SIMPLEX_TOL: f64 = 1e-6;
const AFFINE_TOL: f64 = 1e-6;
const GRAD_REL_TOL: f64 = 1e-4;
const PHASE_TOL: f64 = 1e-6;
const PHASE_STEPS: usize = 10_000;
const TABLE_REL_TOL: f64 = 0.15;
const GT_ANGULAR_REL_TOL: f64 = 0.10;
const OVERFIT_BOUND_CM: f64 = 9.61;
const LIVENESS_RATIO: f64 = 0.5;
const METRIC_TOL: f64 = 1e-9;
const MIRROR_TOL: f64 = 1e-6;
const EXPORT_TOL_M: f64 = 1e-4;
const ROTATION_CODEC_TOL: f64 = 1e-5;

const INTERP_L2P: [f64; 7] = [2.35, 3.27, 4.85, 6.49, 7.94, 9.39, 11.62];
const INTERP_L2Q: [f64; 7] = [0.97, 1.42, 1.65, 1.83, 1.95, 2.03, 2.21];
const GT_ANGULAR: f64 = 63.0;
const SQUARE_TAU1_CM: f64 = 4.1;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Blocked,
    Info,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Self { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    fn blocked(detail: impl Into<String>) -> Self {
        Self { status: Status::Blocked, detail: detail.into() }
    }

    fn info(detail: impl Into<String>) -> Self {
        Self { status: Status::Info, detail: detail.into() }
    }
}

struct Runner {
    quick: bool,
    results: Vec<(String, Status)>,
}

impl Runner {
    fn run(&mut self, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::check(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = t.elapsed();
        let mut out = out;
        if let (Some(b), Status::Pass) = (budget, out.status) {
            if elapsed > b && !self.quick {
                out = Outcome::check(false, format!("{} (over the {:.0} s budget)", out.detail, b.as_secs_f64()));
            }
        }
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Blocked => "BLOCKED",
            Status::Info => "INFO",
        };
        println!("{tag:<7} {name:<28} {:>8.2}s  {}", elapsed.as_secs_f64(), out.detail);
        self.results.push((name.to_string(), out.status));
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

// ---------------------------------------------------------------- phase manifold

fn manifold_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = PHASE_CHANNELS;
    let (mut norm_err, mut angle_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..IDENTITY_SAMPLES / c {
        let a: Vec<f64> = (0..c).map(|_| rng.gen_range(0.0..10.0)).collect();
        let theta: Vec<f64> = (0..c).map(|_| rng.gen_range(-PI..PI)).collect();
        let p = PhaseParams { amplitude: a.clone(), frequency: vec![1.0; c], bias: vec![0.0; c], phase: theta.clone() };
        let m = compute_manifold(&p);
        for i in 0..c {
            let (s, co) = (m[2 * i], m[2 * i + 1]);
            norm_err = norm_err.max(((s * s + co * co).sqrt() - a[i]).abs());
            if a[i] > 1e-3 {
                angle_err = angle_err.max(wrap_angle(s.atan2(co) - theta[i]).abs());
            }
        }
    }
    Outcome::check(
        norm_err < IDENTITY_TOL && angle_err < IDENTITY_TOL,
        format!("{IDENTITY_SAMPLES} pairs: max |‖P‖-A| {norm_err:.1e}, max Θ error {angle_err:.1e} (tol {IDENTITY_TOL:.0e})"),
    )
}

fn pae_oracle(quick: bool) -> (Outcome, Outcome) {
    let train_set = synth::sine_corpus(1000, WINDOW_FRAMES, 11);
    let held_out = synth::sine_corpus(200, WINDOW_FRAMES, 12);
    let mut cfg = PaeConfig::new(synth::SINE_GAINS.len());
    cfg.epochs = if quick { 30 } else { 300 };
    cfg.learning_rate = 3e-3;
    let windows: Vec<Array2<f64>> = train_set.iter().map(|w| w.window.clone()).collect();
    let (pae, _) = train_pae(&windows, &cfg).expect("PAE training");

    let (mut f_err, mut a_err, mut rms) = (vec![], vec![], vec![]);
    for w in &held_out {
        let (_, params) = pae.encode(w.window.view()).unwrap();
        let dominant = (0..params.channels()).max_by(|&i, &j| params.amplitude[i].total_cmp(&params.amplitude[j])).unwrap();
        f_err.push((params.frequency[dominant] - w.frequency).abs() / w.frequency);

        let rec = pae.reconstruct(w.window.view()).unwrap();
        for (d, row) in rec.rows().into_iter().enumerate() {
            let (_, a, _) = fft_parameterize(&row.to_vec(), cfg.fps);
            let truth = w.amplitude * synth::SINE_GAINS[d];
            a_err.push((a - truth).abs() / truth);
        }
        rms.push(relative_rms(&pae, &w.window));
    }
    let seen: Vec<f64> = train_set.iter().take(200).map(|w| relative_rms(&pae, &w.window)).collect();
    let (f, a, r, r_seen) = (mean(&f_err), mean(&a_err), mean(&rms), mean(&seen));
    (
        Outcome::check(
            f < PAE_REL_TOL && a < PAE_REL_TOL,
            format!("{} held-out windows, {} epochs: mean F error {:.1}%, mean A error {:.1}% (tol {:.0}%)", held_out.len(), cfg.epochs, 100.0 * f, 100.0 * a, 100.0 * PAE_REL_TOL),
        ),
        Outcome::check(
            r_seen < PAE_RECON_RMS_TOL,
            format!(
                "training sinusoids: mean relative RMS {:.2}% (tol {:.0}%); held-out {:.2}%",
                100.0 * r_seen,
                100.0 * PAE_RECON_RMS_TOL,
                100.0 * r
            ),
        ),
    )
}

fn relative_rms(pae: &Pae, window: &Array2<f64>) -> f64 {
    let rec = pae.reconstruct(window.view()).unwrap();
    let err = (&rec - window).mapv(|v| v * v).mean().unwrap().sqrt();
    err / window.mapv(|v| v * v).mean().unwrap().sqrt()
}

// ---------------------------------------------------------------- mixture of experts

fn tiny_moe(seed: u64, experts: usize) -> Moe {
    let cfg = MoeConfig { input: 6, gating_input: 4, output: 3, hidden: 5, gating_hidden: 7, experts, dropout: 0.0, seed };
    let mut m = Moe::with_widths(Dims::lafan(0), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for d in &mut m.gating {
        d.b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    for l in &mut m.layers {
        l.b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    m
}

fn moe_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut problems = vec![];

    let m = tiny_moe(3, 4);
    let mut simplex: f64 = 0.0;
    let mut negative = false;
    for _ in 0..2000 {
        let g: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let w = m.gate(&g).unwrap();
        negative |= w.iter().any(|v| *v < 0.0 || !v.is_finite());
        simplex = simplex.max((w.iter().sum::<f64>() - 1.0).abs());
    }
    if simplex > SIMPLEX_TOL || negative {
        problems.push(format!("simplex deviation {simplex:.1e}"));
    }

    let x = [0.3, -0.2, 0.9, 0.1, -0.7, 0.4];
    let mut bit_exact = true;
    for k in 0..4 {
        let mut one_hot = vec![0.0; 4];
        one_hot[k] = 1.0;
        let blended = m.blend(&one_hot);
        let alone = [m.layers[0].expert(k), m.layers[1].expert(k), m.layers[2].expert(k)];
        bit_exact &= blended.iter().zip(&alone).all(|(a, b)| a == b);
        bit_exact &= m.blend_and_predict(&x, &one_hot).unwrap() == Moe::run_layers(&alone, &x).to_vec();
    }
    if !bit_exact {
        problems.push("one-hot blend differs from the single expert".into());
    }

    let mut affine: f64 = 0.0;
    for _ in 0..200 {
        let mut w: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        for l in &m.layers {
            let mix = l.blend(&w);
            let mut ew = mix.w.clone() * 0.0;
            let mut eb = mix.b.clone() * 0.0;
            for (k, wk) in w.iter().enumerate() {
                let e = l.expert(k);
                ew = ew + &e.w * *wk;
                eb = eb + &e.b * *wk;
            }
            affine = affine.max((&mix.w - &ew).iter().chain((&mix.b - &eb).iter()).fold(0.0, |a, d| a.max(d.abs())));
        }
    }
    if affine > AFFINE_TOL {
        problems.push(format!("blend affinity error {affine:.1e}"));
    }

    let mut m = tiny_moe(11, 3);
    let b = 4;
    let xs = Array2::from_shape_fn((b, 6), |_| rng.gen_range(-1.0..1.0));
    let gs = Array2::from_shape_fn((b, 4), |_| rng.gen_range(-1.0..1.0));
    let ys = Array2::from_shape_fn((b, 3), |_| rng.gen_range(-1.0..1.0));
    let (_, grad) = m.loss_and_gradient(&xs, &gs, &ys);
    let params = m.parameters();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += h;
        m.set_parameters(&p).unwrap();
        let up = m.batch_loss(&xs, &gs, &ys);
        p[i] -= 2.0 * h;
        m.set_parameters(&p).unwrap();
        let down = m.batch_loss(&xs, &gs, &ys);
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-6));
    }
    if worst > GRAD_REL_TOL {
        problems.push(format!("gradient relative error {worst:.1e}"));
    }

    let detail = format!(
        "simplex {simplex:.1e}, one-hot bit-exact {bit_exact}, affinity {affine:.1e}, gradient {worst:.1e} over {} params",
        params.len()
    );
    Outcome::check(problems.is_empty(), if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) })
}

// ---------------------------------------------------------------- bidirectional blend

fn branch(seed: f64) -> Branch {
    Branch {
        positions: (0..4).map(|i| Vec3::new(seed + i as f64, 0.5 * seed, -seed)).collect(),
        rotations: (0..4).map(|i| Quat::from_euler_angles(0.1 * seed, 0.2 * i as f64, -0.3 * seed)).collect(),
        velocities: (0..4).map(|i| Vec3::new(0.0, seed * i as f64, 1.0)).collect(),
        trajectory: (0..7)
            .map(|i| TrajPoint {
                position: Vec2::new(seed, i as f64),
                forward: Vec2::new(seed.sin(), seed.cos()),
                velocity: Vec2::new(1.0, seed),
            })
            .collect(),
    }
}

fn lambda_endpoints() -> Outcome {
    let mut problems = vec![];
    let (ego, goal) = (branch(0.4), branch(1.9));
    for mode in [RotationBlend::Slerp, RotationBlend::Linear6d] {
        if blend_bidirectional(&ego, &goal, 0.0, mode).unwrap() != ego {
            problems.push(format!("λ=0 does not return the ego branch ({mode:?})"));
        }
        if blend_bidirectional(&ego, &goal, 1.0, mode).unwrap() != goal {
            problems.push(format!("λ=1 does not return the goal branch ({mode:?})"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let total: f64 = rng.gen_range(1.0 / 30.0..10.0);
        let (l0, l1, mid) = (
            smooth_step_lambda(0.0, total).unwrap(),
            smooth_step_lambda(total, total).unwrap(),
            smooth_step_lambda(total / 2.0, total).unwrap(),
        );
        if l0 != 0.0 || l1 != 1.0 || (mid - 0.5).abs() > 1e-12 {
            problems.push(format!("endpoints at total {total}: {l0}, {mid}, {l1}"));
            break;
        }
        let frames = transition_frames(total, LAFAN1_FPS).unwrap();
        let seq: Vec<f64> = (1..=frames).map(|i| smooth_step_lambda(i as f64 / LAFAN1_FPS, total).unwrap()).collect();
        if seq.windows(2).any(|w| w[1] < w[0]) {
            problems.push(format!("λ decreases over a {total:.3} s transition"));
            break;
        }
    }
    // λ as reported by the runtime over whole transitions.
    let (model, clip, phases) = small_runtime_fixture();
    for d in [0.5, 1.0, 2.3] {
        let start = StartState::from_clip(&clip, 40, Some(&phases)).unwrap();
        let g = generate_transition(&model, &start, &clip.frames[100], d, &Controls::default(), &RuntimeConfig::default()).unwrap();
        if g.lambdas.windows(2).any(|w| w[1] < w[0]) || *g.lambdas.last().unwrap() != 1.0 {
            problems.push(format!("runtime λ schedule not monotone to 1 for d = {d}"));
        }
    }
    let ok = problems.is_empty();
    Outcome::check(ok, if ok { "exact branch selection, λ(0)=0, λ(T)=1, λ(T/2)=0.5, monotone on 500 durations and 3 runtime runs".into() } else { problems.join("; ") })
}

/// Untrained model with real normalization statistics on a procedural walk.
fn small_runtime_fixture() -> (Moe, MotionClip, PhaseSeries) {
    let mut clip = synth::walk_clip(&GaitParams::default(), 160, "walk1_subject1");
    assign_roots(&mut clip, &RootConfig::default()).unwrap();
    let phases = PhaseSeries::zeros(PHASE_CHANNELS, clip.len());
    let feats = ClipFeatures::extract(&clip, &FeatureConfig::default(), phases.clone()).unwrap();
    let store = build_dataset(&[clip.clone()], &[feats], &[None], &DatasetConfig::default()).unwrap();
    let cfg = MoeConfig { hidden: 16, gating_hidden: 8, experts: 2, ..MoeConfig::for_dims(&store.dims) };
    let mut m = Moe::new(store.dims, cfg).unwrap();
    m.layers[2].w.fill(0.0);
    m.layers[2].b.fill(0.0);
    m.input_norm = store.input_norm;
    m.gating_norm = store.gating_norm;
    m.output_norm = store.output_norm;
    (m, clip, phases)
}

fn phase_integration() -> Outcome {
    let dt = 1.0 / LAFAN1_FPS;
    let mut v = [0.0, 1.0];
    let mut per_step: f64 = 0.0;
    for _ in 0..PHASE_STEPS {
        v = rotate_phase_vector(v, TAU * 1.7 * dt);
        per_step = per_step.max(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs());
    }
    let composed = ((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs();

    let params = |theta: f64| PhaseParams { amplitude: vec![1.0], frequency: vec![1.0], bias: vec![0.0], phase: vec![theta] };
    let mut p = vec![params(0.4)];
    let mut advance = 0.0;
    for _ in 0..30 {
        let n = integrate_phase(&p, &[params(0.0)], dt, 0.0);
        advance += wrap_angle(n[0].phase[0] - p[0].phase[0]);
        p = n;
    }
    let turn = (advance - TAU).abs();
    Outcome::check(
        per_step < PHASE_TOL && composed < PHASE_TOL && turn < PHASE_TOL,
        format!("norm drift {composed:.1e} after {PHASE_STEPS} steps, 30 steps at 1 Hz advance 2π ± {turn:.1e}"),
    )
}

// ---------------------------------------------------------------- benchmark

fn lafan_dir() -> Option<std::path::PathBuf> {
    std::env::var_os("LAFAN1_DIR").map(Into::into).filter(|p: &std::path::PathBuf| p.is_dir())
}

fn interp_baseline_table() -> Outcome {
    let Some(dir) = lafan_dir() else {
        return Outcome::blocked("LaFAN1 capture data not available (set LAFAN1_DIR to the BVH folder)");
    };
    let clips = load_bvh_dir(&dir, &BvhOptions::default()).expect("load LaFAN1");
    let (train_clips, test_clips) = split_dataset(clips).expect("split");
    let report = run_benchmark(&train_clips, &test_clips, None, &BenchConfig::default()).expect("benchmark");
    let mut problems = vec![];
    let l2p: Vec<f64> = report.rows.iter().map(|r| r.interp.l2p).collect();
    let l2q: Vec<f64> = report.rows.iter().map(|r| r.interp.l2q).collect();
    for (k, row) in report.rows.iter().enumerate() {
        for (name, got, want) in [("L2P", l2p[k], INTERP_L2P[k]), ("L2Q", l2q[k], INTERP_L2Q[k])] {
            if (got - want).abs() > TABLE_REL_TOL * want {
                problems.push(format!("{name}@{} {got:.2} vs {want}", row.frames));
            }
        }
    }
    if l2p.windows(2).any(|w| w[1] <= w[0]) || l2q.windows(2).any(|w| w[1] <= w[0]) {
        problems.push("ordering across lengths is not monotone".into());
    }
    let gt = mean(&report.rows.iter().map(|r| r.ground_truth.angular_updates).collect::<Vec<_>>());
    if (gt - GT_ANGULAR).abs() > GT_ANGULAR_REL_TOL * GT_ANGULAR {
        problems.push(format!("ground-truth angular updates {gt:.1} vs {GT_ANGULAR}"));
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    let detail = format!("L2P [{}] L2Q [{}] GT angular {gt:.1}", fmt(&l2p), fmt(&l2q));
    Outcome::check(problems.is_empty(), if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) })
}

// ---------------------------------------------------------------- overfit pipeline

struct Overfit {
    clip: MotionClip,
    phases: PhaseSeries,
    model: Moe,
    source: String,
}

fn overfit_clip() -> (MotionClip, String) {
    const FRAMES: usize = 1000;
    if let Some(dir) = lafan_dir() {
        let clips = load_bvh_dir(&dir, &BvhOptions::default()).expect("load LaFAN1");
        let (train_clips, _) = split_dataset(clips).expect("split");
        if let Some(c) = train_clips.into_iter().find(|c| c.name.starts_with("walk") && c.len() >= FRAMES) {
            let name = c.name.clone();
            let cut = MotionClip::new(name.clone(), c.skeleton.clone(), c.fps, c.frames[..FRAMES].to_vec()).unwrap();
            return (cut, format!("LaFAN1 {name}[..{FRAMES}]"));
        }
    }
    (synth::walk_clip(&GaitParams::varied(7), FRAMES, "walk1_subject1"), format!("procedural walk, {FRAMES} frames"))
}

fn train_overfit(quick: bool) -> Overfit {
    let (mut clip, source) = overfit_clip();
    let traj = assign_roots(&mut clip, &RootConfig::default()).unwrap();
    let windows = velocity_windows(&clip, &traj, WINDOW_FRAMES, 2);
    let mut pc = PaeConfig::new(windows[0].nrows());
    pc.epochs = if quick { 3 } else { 30 };
    let (pae, _) = train_pae(&windows, &pc).expect("PAE training");
    let phases = export_phase_series(&pae, &clip, &traj).unwrap();
    let feats = ClipFeatures::extract(&clip, &FeatureConfig::default(), phases.clone()).unwrap();
    let store = build_dataset(&[clip.clone()], &[feats], &[None], &DatasetConfig { samples_per_frame: 4, ..Default::default() }).unwrap();
    let epochs = if quick { 3 } else { 40 };
    let hidden = if quick { 64 } else { 256 };
    let mut tc = TrainConfig::new(MoeConfig { hidden, dropout: 0.1, ..MoeConfig::for_dims(&store.dims) });
    tc.epochs = epochs;
    tc.adam.learning_rate = 1e-3;
    tc.adam.weight_decay = 0.0;
    tc.restarts.period = epochs as f64;
    let (model, _) = train(&store, &tc).expect("network training");
    Overfit { clip, phases, model, source: format!("{source}, PAE {} epochs, network {epochs} epochs at width {hidden}", pc.epochs) }
}

fn mean_end_error(o: &Overfit, bidirectional: bool) -> f64 {
    let cfg = RuntimeConfig { bidirectional, ..Default::default() };
    let errs: Vec<f64> = (60..900)
        .step_by(60)
        .map(|s| {
            let start = StartState::from_clip(&o.clip, s, Some(&o.phases)).unwrap();
            generate_transition(&o.model, &start, &o.clip.frames[s + 30], 1.0, &Controls::default(), &cfg)
                .unwrap()
                .end_error
                .position_cm
        })
        .collect();
    mean(&errs)
}

fn overfit_check(o: &Overfit) -> Outcome {
    let bi = mean_end_error(o, true);
    let ego = mean_end_error(o, false);
    let mut problems = vec![];
    if bi > OVERFIT_BOUND_CM {
        problems.push(format!("bidirectional end error above {OVERFIT_BOUND_CM} cm"));
    }
    if ego <= bi {
        problems.push("λ≡0 ablation is not worse than the bidirectional run".into());
    }
    let detail = format!("{}; 14 transitions of 30 frames: bidirectional {bi:.2} cm, λ≡0 {ego:.2} cm", o.source);
    Outcome::check(problems.is_empty(), if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) })
}

fn liveness_check(o: &Overfit) -> Outcome {
    let cfg = RuntimeConfig::default();
    let sequence_updates = |s: usize, d: f64, offset: usize| -> (f64, usize) {
        let start = StartState::from_clip(&o.clip, s, Some(&o.phases)).unwrap();
        let g = generate_transition(&o.model, &start, &o.clip.frames[s + offset], d, &Controls::default(), &cfg).unwrap();
        let mut seq = vec![start.history.last().unwrap().clone()];
        seq.extend(g.poses.iter().cloned());
        (angular_joint_updates(&seq, &o.clip.skeleton, LAFAN1_FPS).unwrap(), g.poses.len())
    };
    let starts = [60usize, 240, 420, 600];
    let (mut short, mut long) = (vec![], vec![]);
    let mut counts_ok = true;
    for &s in &starts {
        let (a, n) = sequence_updates(s, 2.0, 60);
        counts_ok &= n == 60;
        short.push(a);
        let (b, n) = sequence_updates(s, 4.0, 120);
        counts_ok &= n == 120;
        long.push(b);
    }
    // Non-integral duration rounds up.
    let (_, n) = sequence_updates(60, 3.99, 120);
    counts_ok &= n == 120 && transition_frames(3.99, LAFAN1_FPS).unwrap() == 120;
    let (a60, a120) = (mean(&short), mean(&long));
    Outcome::check(
        counts_ok && a120 >= LIVENESS_RATIO * a60,
        format!("angular updates 120 frames {a120:.1} deg/s vs 60 frames {a60:.1} deg/s (ratio {:.2}, need ≥ {LIVENESS_RATIO}); frame counts exact: {counts_ok}", a120 / a60),
    )
}

// ---------------------------------------------------------------- metrics

fn metric_suite() -> Outcome {
    let s = synth::lafan_like_skeleton();
    let rest = Pose::from_local(&s, &Vec3::new(0.0, 0.9, 0.0), &vec![Quat::identity(); s.len()]);
    let seq = vec![rest.clone(); 6];
    let norm = PositionNormalizer::identity(s.len());
    let skate = FootSkateConfig::lafan(&s).unwrap();
    let mut problems = vec![];

    let zeros = [
        ("L2P", l2p(&seq, &seq, &norm).unwrap()),
        ("L2Q", l2q(&seq, &seq).unwrap()),
        ("foot skate", foot_skate(&seq, &skate)),
        ("angular updates", angular_joint_updates(&seq, &s, LAFAN1_FPS).unwrap()),
        ("end position", end_pose_error(&rest, &rest).position_cm),
        ("end rotation", end_pose_error(&rest, &rest).rotation_deg),
    ];
    for (name, v) in zeros {
        if v != 0.0 {
            problems.push(format!("{name} on a fixed point is {v}"));
        }
    }
    let interp = interp_baseline(&rest, &rest, 5).unwrap();
    if l2p(&interp, &seq[..5], &norm).unwrap() != 0.0 {
        problems.push("interpolating identical keyframes is not constant".into());
    }

    // Toes on the ground sliding 1 cm per frame for 9 steps: 1 cm per step
    // from the sliding foot, the other stays put.
    let slide: Vec<Pose> = (0..10)
        .map(|k| {
            let mut p = rest.clone();
            for &f in &skate.feet {
                p.positions[f].y = 0.0;
            }
            p.positions[skate.feet[0]].x += 0.01 * k as f64;
            p
        })
        .collect();
    let v = foot_skate(&slide, &skate);
    if (v - 1.0).abs() > METRIC_TOL {
        problems.push(format!("sliding foot skate {v} (want 1)"));
    }
    // Same slide 10 cm up: gated out.
    let lifted: Vec<Pose> = slide
        .iter()
        .map(|p| {
            let mut p = p.clone();
            for &f in &skate.feet {
                p.positions[f].y = 0.10;
            }
            p
        })
        .collect();
    if foot_skate(&lifted, &skate) != 0.0 {
        problems.push("lifted feet counted as skating".into());
    }
    // One joint turning 30° per frame: 30·30/J deg/s.
    let hand = s.index_of("RightHand").unwrap();
    let spin: Vec<Pose> = (0..12)
        .map(|k| {
            let mut local = vec![Quat::identity(); s.len()];
            local[hand] = Quat::from_axis_angle(&Vec3::x_axis(), (30.0 * k as f64).to_radians());
            Pose::from_local(&s, &Vec3::new(0.0, 0.9, 0.0), &local)
        })
        .collect();
    let a = angular_joint_updates(&spin, &s, LAFAN1_FPS).unwrap();
    let want = 30.0 * 30.0 / s.len() as f64;
    if (a - want).abs() > METRIC_TOL {
        problems.push(format!("angular updates {a} (want {want})"));
    }
    let ok = problems.is_empty();
    Outcome::check(ok, if ok { format!("6 metrics zero on fixed points; skate 1 cm/frame and {want:.4} deg/s cases within {METRIC_TOL:.0e}") } else { problems.join("; ") })
}

// ---------------------------------------------------------------- mirroring and export

fn max_pose_gap(a: &[Pose], b: &[Pose]) -> (f64, f64) {
    let (mut p, mut r): (f64, f64) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.positions.iter().zip(&y.positions) {
            p = p.max((u - v).norm());
        }
        for (u, v) in x.velocities.iter().zip(&y.velocities) {
            p = p.max((u - v).norm());
        }
        for (u, v) in x.rotations.iter().zip(&y.rotations) {
            r = r.max(geodesic_angle(u, v));
        }
    }
    (p, r)
}

fn record_for(o: &Overfit, square: bool) -> (TransitionRecord, std::sync::Arc<AppState>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let phases: BTreeMap<String, PhaseSeries> = [(o.clip.name.clone(), o.phases.clone())].into();
    let state = AppState::new(
        o.model.clone(),
        o.clip.skeleton.clone(),
        vec![o.clip.clone()],
        phases,
        PipelineConfig::default(),
        Store::open(dir.path().join("sessions.json")).unwrap(),
        Limits::default(),
    )
    .unwrap();
    let req = TransitionRequest {
        start: KeyframeRef::Clip { clip: o.clip.name.clone(), frame: 120 },
        target: KeyframeRef::Clip { clip: o.clip.name.clone(), frame: 180 },
        duration: 2.0,
        tau: if square { 1.0 } else { 0.0 },
        path: square.then(|| PathSpec::Square { size: 0.6 }),
        style: None,
        seed: 0,
    };
    let record = generate::run(&state, "acceptance", &req, |_| true).map_err(|f| f.error).unwrap();
    (record, std::sync::Arc::new(state), dir)
}

fn mirror_and_export(o: &Overfit) -> Outcome {
    let mut problems = vec![];
    let walk = synth::walk_clip(&GaitParams::varied(3), 120, "walk2_subject2");
    let mut clips = vec![walk, o.clip.clone()];
    if let Some(dir) = lafan_dir() {
        if let Some(c) = load_bvh_dir(&dir, &BvhOptions::default()).ok().and_then(|v| v.into_iter().next()) {
            clips.push(c);
        }
    }
    let (mut mirror_gap, mut mirror_rot): (f64, f64) = (0.0, 0.0);
    for c in &clips {
        let m = mirror_clip(c).unwrap();
        let mm = mirror_clip(&m).unwrap();
        let (p, r) = max_pose_gap(&c.frames, &mm.frames);
        mirror_gap = mirror_gap.max(p);
        mirror_rot = mirror_rot.max(r);
        let lengths = |s: &Skeleton| {
            let mut v: Vec<f64> = s.bones().iter().map(|b| b.offset.norm()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        if lengths(&c.skeleton) != lengths(&m.skeleton) || mm.name != c.name {
            problems.push(format!("mirroring changed bone lengths or the name of {}", c.name));
        }
    }
    if mirror_gap > MIRROR_TOL || mirror_rot > MIRROR_TOL {
        problems.push(format!("mirror twice differs by {mirror_gap:.1e} m / {mirror_rot:.1e} rad"));
    }

    // Clip BVH write then parse.
    let mut bvh_gap: f64 = 0.0;
    for c in &clips {
        let text = write_bvh_string(c, &BvhOptions::default());
        let back = parse_bvh_str(&c.name, &text, &BvhOptions::default()).unwrap();
        if back.len() != c.len() {
            problems.push(format!("{} frame count changed in BVH round trip", c.name));
        }
        for (a, b) in c.frames.iter().zip(&back.frames) {
            for (u, v) in a.positions.iter().zip(&b.positions) {
                bvh_gap = bvh_gap.max((u - v).norm());
            }
        }
    }

    // Service transition export, BVH and JSON.
    let (record, state, _dir) = record_for(o, false);
    let resolved = generate::transition_clip(&record, &state).unwrap();
    let text = generate::export_bvh(&record, &state).unwrap();
    let back = parse_bvh_str("transition", &text, &BvhOptions::default()).unwrap();
    let mut export_gap: f64 = 0.0;
    for (a, b) in resolved.frames.iter().zip(&back.frames) {
        for (u, v) in a.positions.iter().zip(&b.positions) {
            export_gap = export_gap.max((u - v).norm());
        }
    }
    if back.len() != record.frames.len() {
        problems.push("exported BVH frame count differs".into());
    }
    let back_json: TransitionRecord = serde_json::from_str(&serde_json::to_string(&record).unwrap()).unwrap();
    if back_json != record {
        problems.push("JSON export does not round-trip".into());
    }
    if bvh_gap > EXPORT_TOL_M || export_gap > EXPORT_TOL_M {
        problems.push(format!("BVH round trip gap clip {bvh_gap:.1e} m, transition {export_gap:.1e} m"));
    }

    // Rotation codec.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut codec: f64 = 0.0;
    for _ in 0..1000 {
        let q = Quat::from_euler_angles(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        codec = codec.max(geodesic_angle(&decode_rotation(&encode_rotation(&q)).unwrap(), &q));
    }
    if codec > ROTATION_CODEC_TOL {
        problems.push(format!("rotation encode/decode error {codec:.1e} rad"));
    }

    let detail = format!(
        "{} clips: mirror² {mirror_gap:.1e} m / {mirror_rot:.1e} rad; BVH clip {bvh_gap:.1e} m, transition export {export_gap:.1e} m; JSON equal; 6D codec {codec:.1e} rad",
        clips.len()
    );
    Outcome::check(problems.is_empty(), if problems.is_empty() { detail } else { format!("{detail}; {}", problems.join("; ")) })
}

fn square_path_tracking(o: &Overfit) -> Outcome {
    let (record, _, _dir) = record_for(o, true);
    let dev = record.metrics.path_deviation_cm.unwrap();
    Outcome::info(format!("square path (0.6 m, 2 s) at τ=1: mean root deviation {dev:.2} cm; reference scale {SQUARE_TAU1_CM} cm, not asserted"))
}

fn main() {
    let quick = std::env::var("ACCEPTANCE_QUICK").is_ok_and(|v| v != "0");
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v != "0");
    println!("acceptance run ({})", if quick { "quick budgets" } else { "full budgets" });
    let mut r = Runner { quick, results: vec![] };

    r.run("manifold identity", Some(Duration::from_secs(1)), manifold_identity);
    let mut recon = None;
    r.run("PAE synthetic oracle", Some(Duration::from_secs(15 * 60)), || {
        let (oracle, rec) = pae_oracle(quick);
        recon = Some(rec);
        oracle
    });
    if let Some(rec) = recon {
        r.run("PAE reconstruction", None, || rec);
    }
    r.run("MoE algebra", Some(Duration::from_secs(120)), moe_algebra);
    r.run("bidirectional λ endpoints", Some(Duration::from_secs(1)), lambda_endpoints);
    r.run("phase integration", Some(Duration::from_secs(1)), phase_integration);
    r.run("interpolation baseline", Some(Duration::from_secs(10 * 60)), interp_baseline_table);

    let t = Instant::now();
    let trained = catch_unwind(AssertUnwindSafe(|| train_overfit(quick)));
    let train_time = t.elapsed();
    match trained {
        Ok(o) => {
            r.run("overfit end-to-end", None, || {
                let mut out = overfit_check(&o);
                out.detail = format!("{} (training {:.0} s)", out.detail, train_time.as_secs_f64());
                if train_time > Duration::from_secs(30 * 60) && !quick && out.status == Status::Pass {
                    out = Outcome::check(false, format!("{}; training over 30 min", out.detail));
                }
                out
            });
            r.run("extrapolation liveness", None, || liveness_check(&o));
            r.run("metric zero suite", None, metric_suite);
            r.run("mirroring and export", None, || mirror_and_export(&o));
            r.run("square path tracking", None, || square_path_tracking(&o));
        }
        Err(_) => {
            r.run("overfit end-to-end", None, || Outcome::check(false, "training panicked"));
            r.run("extrapolation liveness", None, || Outcome::check(false, "no trained model"));
            r.run("metric zero suite", None, metric_suite);
        }
    }

    let count = |s: Status| r.results.iter().filter(|(_, x)| *x == s).count();
    println!(
        "acceptance summary: {} passed, {} failed, {} blocked",
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Blocked)
    );
    if strict && count(Status::Fail) > 0 {
        std::process::exit(1);
    }
}
