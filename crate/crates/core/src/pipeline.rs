//! End-to-end preparation and training: roots, autoencoder, phases, features, dataset, predictor.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    assign_roots, build_dataset, style_vector, ClipFeatures, DatasetConfig, FeatureConfig, RootTrajectory, TensorStore,
};
use crate::motion::MotionClip;
use crate::network::{self, Moe, MoeConfig, TrainConfig};
use crate::phase::{export_phase_series, train_pae, velocity_windows, Pae, PaeConfig, PhaseSeries, WINDOW_FRAMES};

pub const PHASES_FORMAT: &str = "inbetween-phases";
pub const PIPELINE_FORMAT: &str = "inbetween-pipeline";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub pae_epochs: usize,
    /// Frames between consecutive autoencoder training windows.
    pub pae_stride: usize,
    pub pae_learning_rate: f64,
    pub dataset: DatasetConfig,
    pub network: MoeNetwork,
    pub train: TrainSettings,
    /// Style labels; a clip takes the first label contained in its name.
    pub styles: Vec<String>,
    pub seed: u64,
}

/// Predictor size; input and output widths follow from the data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoeNetwork {
    pub hidden: usize,
    pub gating_hidden: usize,
    pub experts: usize,
    pub dropout: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// First restart period in epochs.
    pub restart_period: f64,
    pub validation_clip: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            pae_epochs: 30,
            pae_stride: 2,
            pae_learning_rate: 1e-3,
            dataset: DatasetConfig::default(),
            network: MoeNetwork { hidden: 512, gating_hidden: 128, experts: 8, dropout: 0.3 },
            train: TrainSettings {
                epochs: 150,
                batch: 32,
                learning_rate: 1e-4,
                weight_decay: 1e-4,
                restart_period: 10.0,
                validation_clip: None,
            },
            styles: Vec::new(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn style_of(&self, clip_name: &str) -> Option<usize> {
        let lower = clip_name.to_ascii_lowercase();
        self.styles.iter().position(|s| lower.contains(&s.to_ascii_lowercase()))
    }

    /// Style one-hot for `label`; empty label list gives an empty vector.
    pub fn style_vector(&self, label: Option<&str>) -> Result<Vec<f64>> {
        let idx = match label {
            None => None,
            Some(l) => Some(
                self.styles
                    .iter()
                    .position(|s| s.eq_ignore_ascii_case(l))
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown style `{l}`; known: {:?}", self.styles)))?,
            ),
        };
        style_vector(idx, self.styles.len())
    }

    pub fn train_config(&self, store: &TensorStore) -> TrainConfig {
        let n = &self.network;
        let mut tc = TrainConfig::new(MoeConfig {
            hidden: n.hidden,
            gating_hidden: n.gating_hidden,
            experts: n.experts,
            dropout: n.dropout,
            seed: self.seed,
            ..MoeConfig::for_dims(&store.dims)
        });
        let t = &self.train;
        tc.epochs = t.epochs;
        tc.batch = t.batch;
        tc.adam.learning_rate = t.learning_rate;
        tc.adam.weight_decay = t.weight_decay;
        tc.restarts.period = t.restart_period;
        tc.validation_clip = t.validation_clip.clone();
        tc.seed = self.seed;
        tc
    }
}

/// Assign smoothed root transforms to every clip.
pub fn prepare_clips(clips: &mut [MotionClip], cfg: &FeatureConfig) -> Result<Vec<RootTrajectory>> {
    clips.iter_mut().map(|c| assign_roots(c, &cfg.root)).collect()
}

pub fn fit_autoencoder(clips: &[MotionClip], trajectories: &[RootTrajectory], cfg: &PipelineConfig) -> Result<Pae> {
    let windows: Vec<_> = clips
        .iter()
        .zip(trajectories)
        .flat_map(|(c, t)| velocity_windows(c, t, WINDOW_FRAMES, cfg.pae_stride))
        .collect();
    let first = windows.first().ok_or_else(|| Error::InvalidArgument("no clips to train the autoencoder".into()))?;
    let mut pc = PaeConfig::new(first.nrows());
    pc.epochs = cfg.pae_epochs;
    pc.learning_rate = cfg.pae_learning_rate;
    pc.seed = cfg.seed;
    Ok(train_pae(&windows, &pc)?.0)
}

pub fn extract_phases(pae: &Pae, clips: &[MotionClip], trajectories: &[RootTrajectory]) -> Result<Vec<PhaseSeries>> {
    clips.iter().zip(trajectories).map(|(c, t)| export_phase_series(pae, c, t)).collect()
}

pub fn build_store(clips: &[MotionClip], phases: &[PhaseSeries], cfg: &PipelineConfig) -> Result<TensorStore> {
    if clips.len() != phases.len() {
        return Err(Error::LengthMismatch(clips.len(), phases.len()));
    }
    let feats = clips
        .iter()
        .zip(phases)
        .map(|(c, p)| ClipFeatures::extract(c, &cfg.features, p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let styles: Vec<Option<usize>> = clips.iter().map(|c| cfg.style_of(&c.name)).collect();
    let ds = DatasetConfig { style_dims: cfg.styles.len(), seed: cfg.seed, ..cfg.dataset.clone() };
    build_dataset(clips, &feats, &styles, &ds)
}

/// Everything produced by one pipeline run.
pub struct Trained {
    pub pae: Pae,
    pub phases: Vec<PhaseSeries>,
    pub model: Moe,
    pub report: network::TrainReport,
}

/// Train the autoencoder and the predictor on `clips` (roots are assigned in place).
pub fn run(clips: &mut [MotionClip], cfg: &PipelineConfig) -> Result<Trained> {
    let traj = prepare_clips(clips, &cfg.features)?;
    let pae = fit_autoencoder(clips, &traj, cfg)?;
    let phases = extract_phases(&pae, clips, &traj)?;
    let store = build_store(clips, &phases, cfg)?;
    let (model, report) = network::train(&store, &cfg.train_config(&store))?;
    Ok(Trained { pae, phases, model, report })
}

#[derive(Serialize, Deserialize)]
struct PhaseFile {
    format: String,
    version: u32,
    clips: BTreeMap<String, PhaseSeries>,
}

/// Phase series keyed by clip name, as JSON.
pub fn save_phases(path: impl AsRef<Path>, phases: &BTreeMap<String, PhaseSeries>) -> Result<()> {
    let file = PhaseFile { format: PHASES_FORMAT.into(), version: 1, clips: phases.clone() };
    std::fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_phases(path: impl AsRef<Path>) -> Result<BTreeMap<String, PhaseSeries>> {
    let file: PhaseFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.format != PHASES_FORMAT || file.version != 1 {
        return Err(Error::Format(format!("{} v{}", file.format, file.version)));
    }
    Ok(file.clips)
}

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    format: String,
    version: u32,
    config: PipelineConfig,
}

pub fn save_config(path: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<()> {
    let file = PipelineFile { format: PIPELINE_FORMAT.into(), version: 1, config: cfg.clone() };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let file: PipelineFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.format != PIPELINE_FORMAT || file.version != 1 {
        return Err(Error::Format(format!("{} v{}", file.format, file.version)));
    }
    Ok(file.config)
}
