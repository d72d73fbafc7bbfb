use super::train::{ExpertDataset, Trajectory};
use crate::error::Result;
use crate::harness::{run_episode_with, EpisodeConfig, Models, Policy, RunOptions};
use crate::scene::{generate_scene, DomainRandomizationConfig};
use crate::score::training_scene_seed;

/// Runs planner episodes on `n_scenes` training scenes and keeps their
/// token sequences. Episodes that fail are skipped and counted in the log.
pub fn collect_expert_data(
    n_scenes: usize,
    seed: u64,
    cfg: &EpisodeConfig,
    scenes: &DomainRandomizationConfig,
    models: &Models,
) -> Result<ExpertDataset> {
    let cfg = EpisodeConfig {
        policy: Policy::BilevelMpc,
        seed,
        ..cfg.clone()
    };
    let mut trajectories = Vec::with_capacity(n_scenes);
    let mut skipped = 0;
    for i in 0..n_scenes {
        let scene_seed = training_scene_seed(seed, 0x100_0000 + i);
        let spec = generate_scene(scenes, scene_seed)?;
        match run_episode_with(&spec, &cfg, models, RunOptions::default()) {
            Ok(o) => trajectories.push(Trajectory {
                scene_seed,
                sequence: o.tokens,
            }),
            Err(e) => {
                skipped += 1;
                log::warn!("expert episode on scene {scene_seed} failed: {e}");
            }
        }
        log::info!("expert data: scene {}/{n_scenes}", i + 1);
    }
    if skipped > 0 {
        log::warn!("{skipped} expert episodes skipped");
    }
    Ok(ExpertDataset { trajectories })
}
