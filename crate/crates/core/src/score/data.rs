use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::{view_features, FeatureSpec, VIEW_FEATURES};
use super::rollout::RolloutOracle;
use crate::error::{Error, Result};
use crate::motion::{build_collision_model, MotionConfig, Workspace};
use crate::mpc::{sample_feasible, Proposal};
use crate::registration::{Belief, RegistrationConfig};
use crate::rng;
use crate::scene::{generate_scene, DomainRandomizationConfig};
use crate::sensor::{render_truth, CameraIntrinsics, SensorConfig, Viewpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// One (belief, viewpoint, coverage) sample, with the belief stored as its
/// pooled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub features: Vec<f64>,
    pub view: [f64; VIEW_FEATURES],
    pub viewpoint: Viewpoint,
    pub label: f64,
    pub scene_seed: u64,
    pub split: Split,
}

/// Settings for rollout data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataGenConfig {
    pub scenes: DomainRandomizationConfig,
    pub intrinsics: CameraIntrinsics,
    pub registration: RegistrationConfig,
    pub motion: MotionConfig,
    pub sensor: SensorConfig,
    pub features: FeatureSpec,
    /// Viewpoints per random sequence.
    pub sequence_length: usize,
    pub train_fraction: f64,
}

impl Default for DataGenConfig {
    fn default() -> Self {
        DataGenConfig {
            scenes: DomainRandomizationConfig::default(),
            intrinsics: CameraIntrinsics::default(),
            registration: RegistrationConfig::default(),
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            features: FeatureSpec::default(),
            sequence_length: 5,
            train_fraction: 0.8,
        }
    }
}

/// Seed of the `i`-th training scene. Training scenes live in the upper
/// half of the seed space; benchmark scenes use the lower half.
pub fn training_scene_seed(seed: u64, i: usize) -> u64 {
    rng::derive(seed, 0x7A1A_0000 + i as u64) | (1 << 63)
}

/// Rolls out random feasible viewpoint sequences on generated scenes and
/// records one labelled pair per step. Pairs are shuffled, then the first
/// `train_fraction` of them are marked for training.
pub fn generate_training_data(n_scenes: usize, seq_per_scene: usize, seed: u64, cfg: &DataGenConfig) -> Result<Vec<TrainingPair>> {
    if n_scenes == 0 || seq_per_scene == 0 || cfg.sequence_length == 0 {
        return Err(Error::InvalidConfig("scene, sequence and length counts must be at least 1".into()));
    }
    cfg.registration.validate()?;
    cfg.motion.validate()?;
    let mut pairs = Vec::new();
    for s in 0..n_scenes {
        let scene_seed = training_scene_seed(seed, s);
        let spec = generate_scene(&cfg.scenes, scene_seed)?;
        let ws = Workspace::of(&spec);
        let oracle = RolloutOracle::new(&spec, cfg.intrinsics, cfg.registration, cfg.sensor);
        for q in 0..seq_per_scene {
            let seq_seed = rng::derive(scene_seed, q as u64);
            let mut belief = Belief::new(spec.dims, cfg.registration.eta);
            let mut r = rng::stream(seq_seed, 0xDA7A);
            for t in 0..cfg.sequence_length {
                let model = build_collision_model(&belief.grid, &belief.store, &ws, &cfg.motion);
                let v = sample_feasible(&model, &Proposal::Uniform, 1, &mut r)?.viewpoints[0];
                let step_seed = rng::derive(seq_seed, t as u64);
                let label = oracle.label(&belief, &v, step_seed)?;
                pairs.push(TrainingPair {
                    features: cfg.features.featurize(&belief.grid),
                    view: view_features(&spec.dims, &v),
                    viewpoint: v,
                    label,
                    scene_seed,
                    split: Split::Train,
                });
                let obs = render_truth(oracle.truth(), &cfg.sensor.optical_pose(&v), &cfg.intrinsics)?;
                belief.integrate(&obs, &cfg.intrinsics, &cfg.registration, step_seed)?;
            }
        }
        log::info!("training data: scene {}/{} done, {} pairs", s + 1, n_scenes, pairs.len());
    }
    pairs.shuffle(&mut rng::stream(seed, 0x5407));
    let n_train = ((pairs.len() as f64 * cfg.train_fraction).round() as usize).clamp(1, pairs.len());
    for p in &mut pairs[n_train..] {
        p.split = Split::Eval;
    }
    Ok(pairs)
}

pub fn write_pairs_jsonl(w: &mut impl Write, pairs: &[TrainingPair]) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut *w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<pairs>", e))?;
    }
    Ok(())
}

pub fn read_pairs_jsonl(r: impl BufRead) -> Result<Vec<TrainingPair>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::io("<pairs>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: TrainingPair = serde_json::from_str(&line)?;
        if !(0.0..=1.0).contains(&p.label) {
            return Err(Error::Format(format!("label {} outside [0, 1]", p.label)));
        }
        out.push(p);
    }
    Ok(out)
}
