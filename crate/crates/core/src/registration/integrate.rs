use serde::{Deserialize, Serialize};

use super::complete::{fill_unknown, voxel_bounds};
use super::segment::{segment_oracle, PartialCloud};
use super::store::{InstanceStore, MergeMethod};
use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::scene::{coverage, BeliefGrid, CellState, GridDims};
use crate::sensor::{carve_into, CameraIntrinsics, Observation};

/// Registration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    /// Merge threshold in meters.
    pub eta: f64,
    /// Probability of the segmenter missing a whole instance.
    pub miss_prob: f64,
    pub completion: bool,
    /// Normalization volume for partial clouds, cubic meters.
    pub volume_cap: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            eta: 0.05,
            miss_prob: 0.0,
            completion: true,
            volume_cap: 0.016,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.miss_prob) {
            return Err(Error::InvalidConfig("miss probability must lie in [0, 1)".into()));
        }
        if !(self.volume_cap > 0.0) {
            return Err(Error::InvalidConfig("volume cap must be positive".into()));
        }
        Ok(())
    }
}

/// Voxel belief together with its registered instances.
#[derive(Debug, Clone)]
pub struct Belief {
    pub grid: BeliefGrid,
    pub store: InstanceStore,
}

impl Belief {
    pub fn new(dims: GridDims, eta: f64) -> Self {
        Belief {
            grid: BeliefGrid::unknown(dims),
            store: InstanceStore::new(&dims, eta),
        }
    }

    pub fn coverage(&self) -> f64 {
        coverage(&self.grid)
    }

    /// Segments, merges, carves and (optionally) completes one observation.
    /// Returns the instance id each segmented cloud was merged into.
    pub fn integrate(&mut self, obs: &Observation, intr: &CameraIntrinsics, cfg: &RegistrationConfig, seed: u64) -> Result<Vec<u32>> {
        cfg.validate()?;
        let clouds = segment_oracle(obs, intr, cfg.miss_prob, seed)?;
        let targets = self.store.merge(&clouds, cfg.eta)?;
        let map = label_map(&clouds, &targets);
        carve_into(&mut self.grid, obs, intr, |gt| gt.and_then(|g| lookup(&map, g)))?;
        if cfg.completion {
            let bounds: Vec<Aabb> = self.store.instances().iter().map(|i| i.aabb).collect();
            complete_all(&mut self.grid, &bounds);
        }
        let mut counts = vec![0usize; self.store.len()];
        for idx in 0..self.grid.len() {
            if self.grid.state(idx) == CellState::Predicted {
                if let Some(id) = self.grid.instance_id(idx) {
                    counts[id as usize] += 1;
                }
            }
        }
        for (id, c) in counts.into_iter().enumerate() {
            self.store.set_predicted(id as u32, c);
        }
        Ok(targets)
    }

    /// Coverage that [`Belief::integrate`] would produce, without modifying
    /// the belief.
    pub fn preview_coverage(&self, obs: &Observation, intr: &CameraIntrinsics, cfg: &RegistrationConfig, seed: u64) -> Result<f64> {
        Ok(coverage(&self.preview(obs, intr, cfg, seed)?))
    }

    /// Grid that [`Belief::integrate`] would produce. Merge decisions are
    /// planned against the store without appending to it.
    pub fn preview(&self, obs: &Observation, intr: &CameraIntrinsics, cfg: &RegistrationConfig, seed: u64) -> Result<BeliefGrid> {
        cfg.validate()?;
        let clouds = segment_oracle(obs, intr, cfg.miss_prob, seed)?;
        let targets = self.store.assign(&clouds, cfg.eta, MergeMethod::Hashed)?;
        let map = label_map(&clouds, &targets);
        let mut grid = self.grid.clone();
        carve_into(&mut grid, obs, intr, |gt| gt.and_then(|g| lookup(&map, g)))?;
        if cfg.completion {
            let mut bounds: Vec<Option<Aabb>> = self.store.instances().iter().map(|i| Some(i.aabb)).collect();
            for (cloud, &id) in clouds.iter().zip(&targets) {
                let cb = cloud.aabb().expect("segmented clouds are nonempty");
                if id as usize >= bounds.len() {
                    bounds.resize(id as usize + 1, None);
                }
                let slot = &mut bounds[id as usize];
                *slot = Some(slot.map_or(cb, |b| b.union(&cb)));
            }
            let bounds: Vec<Aabb> = bounds.into_iter().map(|b| b.expect("ids are dense")).collect();
            complete_all(&mut grid, &bounds);
        }
        Ok(grid)
    }
}

/// Marks the UNKNOWN voxels of each instance box as predicted, in id order
/// so that lower ids claim shared voxels.
fn complete_all(grid: &mut BeliefGrid, bounds: &[Aabb]) {
    let dims = *grid.dims();
    let mut hits = Vec::new();
    for (id, b) in bounds.iter().enumerate() {
        hits.clear();
        fill_unknown(grid, &voxel_bounds(&dims, b), |idx| hits.push(idx));
        for &idx in &hits {
            grid.set_predicted(idx, id as u32);
        }
    }
}

fn label_map(clouds: &[PartialCloud], targets: &[u32]) -> Vec<(u32, u32)> {
    clouds
        .iter()
        .zip(targets)
        .filter_map(|(c, &t)| c.instance_hint.map(|h| (h, t)))
        .collect()
}

#[inline]
fn lookup(map: &[(u32, u32)], gt: u32) -> Option<u32> {
    map.iter().find(|(g, _)| *g == gt).map(|(_, t)| *t)
}

/// Pure form of [`Belief::integrate`].
pub fn integrate_observation(
    grid: &BeliefGrid,
    store: &InstanceStore,
    obs: &Observation,
    intr: &CameraIntrinsics,
    cfg: &RegistrationConfig,
    seed: u64,
) -> Result<(BeliefGrid, InstanceStore)> {
    let mut b = Belief {
        grid: grid.clone(),
        store: store.clone(),
    };
    b.integrate(obs, intr, cfg, seed)?;
    Ok((b.grid, b.store))
}
