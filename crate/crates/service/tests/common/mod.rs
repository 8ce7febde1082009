#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use inbetween::features::{assign_roots, build_dataset, ClipFeatures, DatasetConfig, FeatureConfig, RootConfig};
use inbetween::motion::MotionClip;
use inbetween::network::{Moe, MoeConfig};
use inbetween::phase::PhaseSeries;
use inbetween::pipeline::PipelineConfig;
use inbetween::synth::{self, GaitParams};
use inbetween_service::{AppState, Limits, Store};

pub fn clips() -> Vec<MotionClip> {
    vec![
        synth::walk_clip(&GaitParams::default(), 150, "walk1_subject1"),
        synth::standing_clip(90, "idle1_subject2"),
    ]
}

/// Predicts the training-output mean for any input.
pub fn mean_model() -> Moe {
    let mut clip = clips().remove(0);
    assign_roots(&mut clip, &RootConfig::default()).unwrap();
    let feats = ClipFeatures::extract(&clip, &FeatureConfig::default(), PhaseSeries::zeros(5, clip.len())).unwrap();
    let store = build_dataset(&[clip], &[feats], &[None], &DatasetConfig::default()).unwrap();
    let cfg = MoeConfig { hidden: 16, gating_hidden: 8, experts: 2, ..MoeConfig::for_dims(&store.dims) };
    let mut m = Moe::new(store.dims, cfg).unwrap();
    m.layers[2].w.fill(0.0);
    m.layers[2].b.fill(0.0);
    m.input_norm = store.input_norm;
    m.gating_norm = store.gating_norm;
    m.output_norm = store.output_norm;
    m.config_hash = "test-model".into();
    m
}

pub fn state_at(model: &Moe, store: &Path) -> Arc<AppState> {
    let clips = clips();
    let skeleton = clips[0].skeleton.clone();
    let state = AppState::new(
        model.clone(),
        skeleton,
        clips,
        BTreeMap::new(),
        PipelineConfig::default(),
        Store::open(store).unwrap(),
        Limits { min_duration: 1.0 / 30.0, max_duration: 8.0 },
    )
    .unwrap();
    Arc::new(state)
}
