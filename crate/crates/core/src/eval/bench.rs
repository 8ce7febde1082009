use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::*;
use crate::error::{Error, Result};
use crate::features::{assign_roots, RootConfig};
use crate::motion::{MotionClip, Pose, LAFAN1_FPS};
use crate::network::Moe;
use crate::phase::PhaseSeries;
use crate::runtime::{generate_transition, Controls, RuntimeConfig, StartState};

pub const DEFAULT_LENGTHS: [usize; 7] = [30, 45, 60, 75, 90, 105, 120];

/// Published RTN values quoted for comparison only; the model is not re-run.
pub const RTN_L2P: [f64; 7] = [2.23, 2.98, 3.71, 3.96, 4.14, 4.87, 5.59];
pub const RTN_L2Q: [f64; 7] = [0.71, 0.92, 1.04, 1.2, 1.39, 1.55, 1.52];
pub const RTN_FOOT_SKATE: [f64; 7] = [0.42, 0.45, 0.49, 0.51, 0.6, 0.68, 0.73];
pub const RTN_ANGULAR: [f64; 7] = [62.2, 58.9, 51.4, 47.6, 41.2, 31.1, 27.3];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    /// Frames between consecutive test windows.
    pub stride: usize,
    /// Context frames before the transition; the last one is the start keyframe.
    pub seed_frames: usize,
    /// Window length used to fit the position statistics on training clips.
    pub stats_window: usize,
    pub seed: u64,
    /// Ground height (m) for the foot-skate gate.
    pub skate_ground: f64,
    pub runtime: RuntimeConfig,
    pub root: RootConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            stride: 20,
            seed_frames: 10,
            stats_window: 50,
            seed: 0,
            skate_ground: 0.0,
            runtime: RuntimeConfig::default(),
            root: RootConfig::default(),
        }
    }
}

/// A trained model plus the phase series of each test clip (cold start when absent).
pub struct BenchModel<'a> {
    pub model: &'a Moe,
    pub phases: Vec<Option<PhaseSeries>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRow {
    pub l2p: f64,
    pub l2q: f64,
    pub foot_skate: f64,
    pub angular_updates: f64,
    pub end_position_cm: f64,
    pub end_rotation_deg: f64,
    pub windows: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub foot_skate: f64,
    pub angular_updates: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub frames: usize,
    pub windows: usize,
    pub ground_truth: GroundTruthRow,
    pub interp: GeneratorRow,
    /// `None` in baseline-only runs.
    pub model: Option<GeneratorRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub frames: usize,
    pub clip: String,
    pub start: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub model_hash: Option<String>,
    pub lengths: Vec<usize>,
    pub stride: usize,
    pub seed_frames: usize,
    pub seed: u64,
    pub test_clips: Vec<String>,
    pub train_clips: usize,
    pub normalizer: PositionNormalizer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<LengthRow>,
    pub failures: Vec<WindowFailure>,
    pub notes: Vec<String>,
}

/// Statistics over `stats_window`-frame training windows expressed in the
/// root frame of each window's last context frame.
pub fn fit_position_normalizer(train: &[MotionClip], cfg: &BenchConfig) -> Result<PositionNormalizer> {
    let mut poses = Vec::new();
    for clip in train {
        let mut clip = clip.clone();
        assign_roots(&mut clip, &cfg.root)?;
        let mut s = 0;
        while s + cfg.stats_window <= clip.len() {
            let frame = clip.frames[s + cfg.seed_frames.min(cfg.stats_window) - 1].root;
            poses.extend(clip.frames[s..s + cfg.stats_window].iter().map(|p| canonicalize(p, &frame)));
            s += cfg.stride.max(1);
        }
    }
    PositionNormalizer::fit(&poses)
}

#[derive(Default)]
struct Acc {
    row: GeneratorRow,
}

impl Acc {
    fn add(&mut self, gen: &[Pose], truth: &[Pose], seq: &[Pose], end: EndPoseError, ctx: &Ctx) -> Result<()> {
        self.row.l2p += l2p(gen, truth, ctx.norm)?;
        self.row.l2q += l2q(gen, truth)?;
        self.row.foot_skate += foot_skate(seq, ctx.skate);
        self.row.angular_updates += angular_joint_updates(seq, ctx.skeleton, LAFAN1_FPS)?;
        self.row.end_position_cm += end.position_cm;
        self.row.end_rotation_deg += end.rotation_deg;
        self.row.windows += 1;
        Ok(())
    }

    fn finish(mut self) -> GeneratorRow {
        let n = self.row.windows.max(1) as f64;
        let r = &mut self.row;
        for v in [&mut r.l2p, &mut r.l2q, &mut r.foot_skate, &mut r.angular_updates, &mut r.end_position_cm, &mut r.end_rotation_deg] {
            *v /= n;
        }
        self.row
    }
}

struct Ctx<'a> {
    norm: &'a PositionNormalizer,
    skate: &'a FootSkateConfig,
    skeleton: &'a crate::motion::Skeleton,
}

/// Evaluate the interpolation baseline (and the model when given) on sliding
/// test windows at each transition length.
pub fn run_benchmark(
    train: &[MotionClip],
    test: &[MotionClip],
    model: Option<&BenchModel>,
    cfg: &BenchConfig,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("benchmark needs at least one test clip".into()));
    }
    if cfg.seed_frames == 0 || cfg.lengths.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("seed frames and transition lengths must be positive".into()));
    }
    if let Some(m) = model {
        if !m.phases.is_empty() && m.phases.len() != test.len() {
            return Err(Error::LengthMismatch(test.len(), m.phases.len()));
        }
    }
    let norm = fit_position_normalizer(train, cfg)?;
    let test: Vec<MotionClip> = test
        .iter()
        .map(|c| {
            let mut c = c.clone();
            assign_roots(&mut c, &cfg.root).map(|_| c)
        })
        .collect::<Result<_>>()?;
    let skeleton = &test[0].skeleton;
    let skate = FootSkateConfig { ground: cfg.skate_ground, ..FootSkateConfig::lafan(skeleton)? };
    let ctx = Ctx { norm: &norm, skate: &skate, skeleton };

    // Each clip's windows start at a seeded offset below the stride.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offsets: Vec<usize> = test.iter().map(|_| rng.gen_range(0..cfg.stride.max(1))).collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.lengths {
        let (mut interp, mut ours) = (Acc::default(), Acc::default());
        let mut gt = GroundTruthRow::default();
        let mut windows = 0;
        for (ci, clip) in test.iter().enumerate() {
            let need = cfg.seed_frames + n + 1;
            let starts: Vec<usize> =
                (0..).map(|k| offsets[ci] + k * cfg.stride.max(1)).take_while(|s| s + need <= clip.len()).collect();
            for s in starts {
                let a = s + cfg.seed_frames - 1;
                let b = a + n + 1;
                let frame = clip.frames[a].root;
                let canon = |p: &[Pose]| p.iter().map(|q| canonicalize(q, &frame)).collect::<Vec<_>>();
                let truth = canon(&clip.frames[a + 1..b]);
                let truth_seq = &clip.frames[a..=b];
                gt.foot_skate += foot_skate(truth_seq, &skate);
                gt.angular_updates += angular_joint_updates(truth_seq, skeleton, LAFAN1_FPS)?;
                windows += 1;

                let lerp = interp_baseline(&clip.frames[a], &clip.frames[b], n)?;
                let seq: Vec<Pose> = [clip.frames[a].clone()].into_iter().chain(lerp.iter().cloned()).chain([clip.frames[b].clone()]).collect();
                let end = end_pose_error(lerp.last().unwrap(), &clip.frames[b]);
                interp.add(&canon(&lerp), &truth, &seq, end, &ctx)?;

                if let Some(m) = model {
                    let phases = m.phases.get(ci).and_then(|p| p.as_ref());
                    let result = StartState::from_clip(clip, a, phases).and_then(|start| {
                        generate_transition(
                            m.model,
                            &start,
                            &clip.frames[b],
                            (n + 1) as f64 / LAFAN1_FPS,
                            &Controls::default(),
                            &cfg.runtime,
                        )
                    });
                    match result {
                        Ok(g) => {
                            let gen = &g.poses[..n];
                            let seq: Vec<Pose> = [clip.frames[a].clone()].into_iter().chain(g.poses.iter().cloned()).collect();
                            ours.add(&canon(gen), &truth, &seq, g.end_error, &ctx)?;
                        }
                        Err(e) => {
                            ours.row.failures += 1;
                            failures.push(WindowFailure { frames: n, clip: clip.name.clone(), start: s, error: e.to_string() });
                        }
                    }
                }
            }
        }
        let w = windows.max(1) as f64;
        gt.foot_skate /= w;
        gt.angular_updates /= w;
        rows.push(LengthRow {
            frames: n,
            windows,
            ground_truth: gt,
            interp: interp.finish(),
            model: model.map(|_| ours.finish()),
        });
    }

    Ok(MetricsReport {
        metadata: ReportMetadata {
            model_hash: model.map(|m| m.model.config_hash.clone()),
            lengths: cfg.lengths.clone(),
            stride: cfg.stride,
            seed_frames: cfg.seed_frames,
            seed: cfg.seed,
            test_clips: test.iter().map(|c| c.name.clone()).collect(),
            train_clips: train.len(),
            normalizer: norm,
        },
        rows,
        failures,
        notes: vec![
            "L2P: positions in the start keyframe's root frame, standardized per bone and axis by training statistics.".into(),
            "Foot skate: horizontal toe drift (cm/frame) while toe height < 1.5 cm and vertical speed < 1 m/s; not velocity weighted.".into(),
            format!("RTN (published, not re-run) L2P {RTN_L2P:?}, L2Q {RTN_L2Q:?}, foot skate {RTN_FOOT_SKATE:?}, angular {RTN_ANGULAR:?}."),
        ],
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table: one block per metric, one column per length plus the average.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        type Getter = fn(&GeneratorRow) -> f64;
        let blocks: [(&str, Getter); 4] = [
            ("L2P", |r| r.l2p),
            ("L2Q", |r| r.l2q),
            ("Foot skate", |r| r.foot_skate),
            ("Angular joint updates", |r| r.angular_updates),
        ];
        for (bi, (name, get)) in blocks.iter().enumerate() {
            let _ = write!(out, "{:<14}", name);
            out.push('\n');
            let _ = write!(out, "{:<14}", "Frames");
            for r in &self.rows {
                let _ = write!(out, "{:>8}", r.frames);
            }
            let _ = writeln!(out, "{:>8}", "AVG");
            let gt: Option<Vec<f64>> = match bi {
                2 => Some(self.rows.iter().map(|r| r.ground_truth.foot_skate).collect()),
                3 => Some(self.rows.iter().map(|r| r.ground_truth.angular_updates).collect()),
                _ => None,
            };
            let mut line = |label: &str, vals: Vec<f64>| {
                let _ = write!(out, "{:<14}", label);
                for v in &vals {
                    let _ = write!(out, "{:>8.2}", v);
                }
                let _ = writeln!(out, "{:>8.2}", avg(&vals));
            };
            if let Some(v) = gt {
                line("Ground Truth", v);
            }
            line("Interp.", self.rows.iter().map(|r| get(&r.interp)).collect());
            match self.rows.iter().map(|r| r.model.as_ref().map(get)).collect::<Option<Vec<f64>>>() {
                Some(v) if !self.rows.is_empty() => line("Ours", v),
                _ => {
                    let _ = writeln!(out, "{:<14}{}", "Ours", "  (no model)");
                }
            }
        }
        let _ = writeln!(out, "{:<14}", "End error");
        for r in &self.rows {
            let _ = write!(out, "{:>4} frames  interp {:.2} cm {:.2} deg", r.frames, r.interp.end_position_cm, r.interp.end_rotation_deg);
            if let Some(m) = &r.model {
                let _ = write!(out, "  ours {:.2} cm {:.2} deg ({} failed)", m.end_position_cm, m.end_rotation_deg, m.failures);
            }
            out.push('\n');
        }
        for (i, n) in self.notes.iter().enumerate() {
            let _ = writeln!(out, "[{}] {}", i + 1, n);
        }
        out
    }
}
