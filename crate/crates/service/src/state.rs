use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use inbetween::features::assign_roots;
use inbetween::motion::{load_bvh_dir, BvhOptions, MotionClip, Skeleton};
use inbetween::network::Moe;
use inbetween::phase::PhaseSeries;
use inbetween::pipeline::{load_config, load_phases, PipelineConfig};
use inbetween::runtime::RuntimeConfig;
use inbetween::{Error, Result};

use crate::store::Store;

/// Accepted transition durations in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { min_duration: 1.0 / 30.0, max_duration: 10.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Predictor checkpoint.
    pub model: PathBuf,
    /// Directory of BVH clips offered for keyframe picking.
    pub data: PathBuf,
    /// Session store file.
    pub store: PathBuf,
    pub listen: SocketAddr,
    /// Phase file from phase extraction; clips without phases warm up in place.
    pub phases: Option<PathBuf>,
    /// Pipeline configuration, for style labels and feature settings.
    pub pipeline: Option<PathBuf>,
    pub limits: Limits,
}

/// Shared read-only model and clips plus the mutable store.
pub struct AppState {
    pub model: Moe,
    pub model_hash: String,
    pub skeleton: Skeleton,
    pub clips: BTreeMap<String, MotionClip>,
    pub phases: BTreeMap<String, PhaseSeries>,
    pub pipeline: PipelineConfig,
    pub runtime: RuntimeConfig,
    pub limits: Limits,
    store: Mutex<Store>,
    busy: Mutex<HashSet<String>>,
}

impl AppState {
    /// Roots of `clips` are (re)assigned from the runtime's trajectory settings.
    pub fn new(
        model: Moe,
        skeleton: Skeleton,
        clips: Vec<MotionClip>,
        phases: BTreeMap<String, PhaseSeries>,
        pipeline: PipelineConfig,
        store: Store,
        limits: Limits,
    ) -> Result<Self> {
        if skeleton.len() != model.dims.bones {
            return Err(Error::Shape { context: "skeleton bones", expected: model.dims.bones, found: skeleton.len() });
        }
        let runtime = RuntimeConfig { features: pipeline.features.clone(), ..Default::default() };
        let mut by_name = BTreeMap::new();
        for mut clip in clips {
            if clip.skeleton.len() != skeleton.len() {
                log::warn!("skipping clip {}: {} bones", clip.name, clip.skeleton.len());
                continue;
            }
            assign_roots(&mut clip, &runtime.features.root)?;
            by_name.insert(clip.name.clone(), clip);
        }
        let model_hash = model.config_hash.clone();
        Ok(Self {
            model,
            model_hash,
            skeleton,
            clips: by_name,
            phases,
            pipeline,
            runtime,
            limits,
            store: Mutex::new(store),
            busy: Mutex::new(HashSet::new()),
        })
    }

    pub fn load(cfg: &ServiceConfig) -> Result<Self> {
        let model = Moe::load(&cfg.model)?;
        let clips = load_bvh_dir(&cfg.data, &BvhOptions::default())?;
        let skeleton = clips
            .first()
            .map(|c| c.skeleton.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("no BVH clips in {}", cfg.data.display())))?;
        let phases = match &cfg.phases {
            Some(p) => load_phases(p)?,
            None => BTreeMap::new(),
        };
        let pipeline = match &cfg.pipeline {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        let store = Store::open(&cfg.store).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        log::info!("loaded {} clips, {} phase series", clips.len(), phases.len());
        Self::new(model, skeleton, clips, phases, pipeline, store, cfg.limits)
    }

    pub fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Mark `session` as generating; `None` when a generation is already running in it.
    pub fn try_begin(self: &Arc<Self>, session: &str) -> Option<BusyGuard> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        busy.insert(session.to_string()).then(|| BusyGuard { state: self.clone(), session: session.to_string() })
    }

    pub fn is_busy(&self, session: &str) -> bool {
        self.busy.lock().unwrap_or_else(|e| e.into_inner()).contains(session)
    }
}

/// Releases the session when dropped.
pub struct BusyGuard {
    state: Arc<AppState>,
    session: String,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.state.busy.lock().unwrap_or_else(|e| e.into_inner()).remove(&self.session);
    }
}
