use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inbetween::eval::{run_benchmark, BenchConfig, BenchModel, DEFAULT_LENGTHS};
use inbetween::features::{assign_roots, TensorStore, TrajPoint};
use inbetween::motion::{load_bvh_dir, mirror_clip, split_dataset, write_bvh, BvhOptions, MotionClip, Pose, LAFAN1_FPS};
use inbetween::network::{self, Moe};
use inbetween::phase::{Pae, PhaseSeries};
use inbetween::pipeline::{self, load_config, load_phases, save_phases, PipelineConfig};
use inbetween::runtime::{generate_transition, transition_frames, Controls, RuntimeConfig, StartState};
use inbetween_service::path::PathSpec;
use inbetween_service::{Limits, ServiceConfig};

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "inbetween", version, about = "Phase-manifold motion in-betweening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the periodic autoencoder on joint velocity windows.
    TrainPae {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Frames between training windows.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Write per-frame phase parameters of every clip.
    ExtractPhases {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        pae: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the normalized training tensors.
    ExtractFeatures {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        phases: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Random target offsets drawn per frame.
        #[arg(long)]
        samples_per_frame: Option<usize>,
    },
    /// Train the mixture-of-experts predictor.
    Train {
        /// Directory written by extract-features.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        experts: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Clip held out for validation loss.
        #[arg(long)]
        validation_clip: Option<String>,
    },
    /// Generate one transition between two clip frames.
    Generate {
        #[arg(long)]
        model: PathBuf,
        /// Directory of BVH clips.
        #[arg(long)]
        data: PathBuf,
        /// Start keyframe as `clip:frame`.
        #[arg(long)]
        start: String,
        /// Target keyframe as `clip:frame`.
        #[arg(long)]
        target: String,
        /// Seconds.
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        /// Path preset: `circle:R`, `square:S`, `star:OUTER:INNER` or a JSON path spec.
        #[arg(long)]
        path: Option<String>,
        #[arg(long)]
        style: Option<String>,
        #[arg(long)]
        phases: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Disable the target-space branch.
        #[arg(long)]
        no_bidirectional: bool,
        /// `.bvh` or `.json`; a summary is printed either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the benchmark on the held-out subject.
    Bench {
        /// Checkpoint, or `none` for the interpolation baseline only.
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        phases: Option<PathBuf>,
        /// Comma-separated transition lengths in frames.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        stride: usize,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the authoring service.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "sessions.json")]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long)]
        phases: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0 / 30.0)]
        min_duration: f64,
        #[arg(long, default_value_t = 10.0)]
        max_duration: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct DataArgs {
    /// Directory of BVH clips.
    #[arg(long)]
    data: PathBuf,
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Clips to use: subjects 1-4, subject 5, or everything.
    #[arg(long, value_enum, default_value = "train")]
    split: Split,
    /// Skip mirrored copies of the selected clips.
    #[arg(long)]
    no_mirror: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl DataArgs {
    fn config(&self) -> AnyResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn clips(&self) -> AnyResult<Vec<MotionClip>> {
        let all = load_bvh_dir(&self.data, &BvhOptions::default())?;
        let mut clips = match self.split {
            Split::All => all,
            Split::Train => split_dataset(all)?.0,
            Split::Test => split_dataset(all)?.1,
        };
        if !self.no_mirror {
            let mirrored = clips.iter().map(mirror_clip).collect::<inbetween::Result<Vec<_>>>()?;
            clips.extend(mirrored);
        }
        if clips.is_empty() {
            return Err(format!("no clips selected from {}", self.data.display()).into());
        }
        log::info!("{} clips, {} frames", clips.len(), clips.iter().map(|c| c.len()).sum::<usize>());
        Ok(clips)
    }
}

fn parse_keyframe(s: &str) -> AnyResult<(String, usize)> {
    let (clip, frame) = s.rsplit_once(':').ok_or_else(|| format!("expected clip:frame, got `{s}`"))?;
    Ok((clip.to_string(), frame.parse()?))
}

fn parse_path(s: &str) -> AnyResult<PathSpec> {
    if s.trim_start().starts_with('{') {
        return Ok(serde_json::from_str(s)?);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> AnyResult<f64> { Ok(parts.get(i).ok_or("missing path size")?.parse()?) };
    let spec = match parts[0] {
        "circle" => PathSpec::Circle { radius: num(1)?, keyframes: 8 },
        "square" => PathSpec::Square { size: num(1)? },
        "star" => PathSpec::Star { outer: num(1)?, inner: num(2)?, points: 5 },
        other => return Err(format!("unknown path preset `{other}`").into()),
    };
    spec.validate()?;
    Ok(spec)
}

fn phases_for(clips: &[MotionClip], phases: &BTreeMap<String, PhaseSeries>) -> Vec<Option<PhaseSeries>> {
    clips.iter().map(|c| phases.get(&c.name).cloned()).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> AnyResult<()> {
    match command {
        Command::TrainPae { data, out, epochs, stride } => {
            let mut cfg = data.config()?;
            if let Some(e) = epochs {
                cfg.pae_epochs = e;
            }
            if let Some(s) = stride {
                cfg.pae_stride = s;
            }
            let mut clips = data.clips()?;
            let traj = pipeline::prepare_clips(&mut clips, &cfg.features)?;
            let pae = pipeline::fit_autoencoder(&clips, &traj, &cfg)?;
            pae.save(&out)?;
            println!("autoencoder written to {}", out.display());
        }
        Command::ExtractPhases { data, pae, out } => {
            let cfg = data.config()?;
            let pae = Pae::load(&pae)?;
            let mut clips = data.clips()?;
            let traj = pipeline::prepare_clips(&mut clips, &cfg.features)?;
            let series = pipeline::extract_phases(&pae, &clips, &traj)?;
            let map: BTreeMap<_, _> = clips.iter().map(|c| c.name.clone()).zip(series).collect();
            save_phases(&out, &map)?;
            println!("phases of {} clips written to {}", map.len(), out.display());
        }
        Command::ExtractFeatures { data, phases, out, samples_per_frame } => {
            let mut cfg = data.config()?;
            if let Some(s) = samples_per_frame {
                cfg.dataset.samples_per_frame = s;
            }
            let all = load_phases(&phases)?;
            let mut clips = data.clips()?;
            pipeline::prepare_clips(&mut clips, &cfg.features)?;
            let series = clips
                .iter()
                .map(|c| all.get(&c.name).cloned().ok_or_else(|| format!("no phases for clip `{}`", c.name)))
                .collect::<Result<Vec<_>, _>>()?;
            let store = pipeline::build_store(&clips, &series, &cfg)?;
            store.save(&out)?;
            println!("{} rows written to {}", store.inputs.nrows(), out.display());
        }
        Command::Train { features, out, config, epochs, hidden, experts, learning_rate, dropout, seed, validation_clip } => {
            let mut cfg = match &config {
                Some(p) => load_config(p)?,
                None => PipelineConfig::default(),
            };
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = hidden {
                cfg.network.hidden = v;
            }
            if let Some(v) = experts {
                cfg.network.experts = v;
            }
            if let Some(v) = learning_rate {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = dropout {
                cfg.network.dropout = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if validation_clip.is_some() {
                cfg.train.validation_clip = validation_clip;
            }
            let store = TensorStore::load(&features)?;
            let (model, report) = network::train(&store, &cfg.train_config(&store))?;
            model.save(&out)?;
            println!(
                "model written to {} (final loss {:.5})",
                out.display(),
                report.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Generate { model, data, start, target, duration, tau, path, style, phases, config, no_bidirectional, out } => {
            let cfg = match &config {
                Some(p) => load_config(p)?,
                None => PipelineConfig::default(),
            };
            let model = Moe::load(&model)?;
            let mut clips: BTreeMap<String, MotionClip> =
                load_bvh_dir(&data, &BvhOptions::default())?.into_iter().map(|c| (c.name.clone(), c)).collect();
            let phases = match &phases {
                Some(p) => load_phases(p)?,
                None => BTreeMap::new(),
            };
            let (sc, sf) = parse_keyframe(&start)?;
            let (tc, tf) = parse_keyframe(&target)?;
            for name in [&sc, &tc] {
                let clip = clips.get_mut(name).ok_or_else(|| format!("unknown clip `{name}`"))?;
                assign_roots(clip, &cfg.features.root)?;
            }
            let start_state = StartState::from_clip(&clips[&sc], sf, phases.get(&sc))?;
            let target_pose: Pose =
                clips[&tc].frames.get(tf).cloned().ok_or_else(|| format!("frame {tf} outside clip `{tc}`"))?;
            let frames = transition_frames(duration, LAFAN1_FPS)?;
            let path = match &path {
                Some(p) => {
                    let origin = start_state.history.last().map(|p| p.root).unwrap_or_default();
                    let samples = parse_path(p)?.build(&origin, duration)?.sample(frames, LAFAN1_FPS);
                    Some(samples.iter().map(TrajPoint::from).collect())
                }
                None => None,
            };
            let mut style_vec = cfg.style_vector(style.as_deref())?;
            if style.is_none() && style_vec.len() != model.dims.style {
                style_vec = vec![0.0; model.dims.style];
            }
            let controls = Controls { tau, path, style: style_vec };
            let runtime = RuntimeConfig { bidirectional: !no_bidirectional, features: cfg.features.clone(), ..Default::default() };
            let g = generate_transition(&model, &start_state, &target_pose, duration, &controls, &runtime)?;
            println!(
                "{} frames, end error {:.3} cm / {:.3} deg",
                g.poses.len(),
                g.end_error.position_cm,
                g.end_error.rotation_deg
            );
            if let Some(w) = &g.warning {
                println!("warning: {w}");
            }
            if let Some(out) = out {
                write_transition(&out, &clips[&sc], g)?;
                println!("written to {}", out.display());
            }
        }
        Command::Bench { model, data, phases, lengths, seed, stride, json } => {
            let clips = load_bvh_dir(&data, &BvhOptions::default())?;
            let (train, test) = split_dataset(clips)?;
            let cfg = BenchConfig { lengths: lengths.unwrap_or_else(|| DEFAULT_LENGTHS.to_vec()), seed, stride, ..Default::default() };
            let phases = match &phases {
                Some(p) => load_phases(p)?,
                None => BTreeMap::new(),
            };
            let loaded = match model.as_str() {
                "none" => None,
                path => Some(Moe::load(path)?),
            };
            let bench = loaded.as_ref().map(|m| BenchModel { model: m, phases: phases_for(&test, &phases) });
            let report = run_benchmark(&train, &test, bench.as_ref(), &cfg)?;
            println!("{}", report.to_table());
            if let Some(path) = json {
                std::fs::write(&path, report.to_json()?)?;
            }
        }
        Command::Serve { model, data, store, listen, phases, config, min_duration, max_duration } => {
            let cfg = ServiceConfig {
                model,
                data,
                store,
                listen,
                phases,
                pipeline: config,
                limits: Limits { min_duration, max_duration },
            };
            tokio::runtime::Runtime::new()?.block_on(inbetween_service::serve(cfg))?;
        }
    }
    Ok(())
}

/// Write poses as BVH (positions resolved by forward kinematics) or the full result as JSON.
fn write_transition(out: &Path, source: &MotionClip, g: inbetween::runtime::GeneratedTransition) -> AnyResult<()> {
    match out.extension().and_then(|e| e.to_str()) {
        Some("bvh") => {
            if g.poses.len() < 2 {
                return Err("BVH export needs at least 2 frames".into());
            }
            let frames = g
                .poses
                .into_iter()
                .map(|mut p| {
                    p.refresh_positions(&source.skeleton);
                    p
                })
                .collect();
            let clip = MotionClip::new("transition", source.skeleton.clone(), LAFAN1_FPS, frames)?;
            write_bvh(&clip, out, &BvhOptions::default())?;
        }
        _ => std::fs::write(out, serde_json::to_vec(&g)?)?,
    }
    Ok(())
}
