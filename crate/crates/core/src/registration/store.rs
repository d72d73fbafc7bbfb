use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use super::segment::PartialCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::scene::GridDims;

/// One registered object: every point observed on it so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u32,
    pub points: Vec<Point3>,
    /// Tight bound of `points`.
    pub aabb: Aabb,
    /// Voxels currently predicted for this instance by shape completion.
    pub predicted: usize,
}

/// How the nearest-instance query is evaluated. Both give identical answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMethod {
    BruteForce,
    #[default]
    Hashed,
}

/// Registered instances of one scene.
///
/// Points are stored on a lattice of a quarter voxel aligned with the scene
/// grid: a point whose lattice cell already holds a point of the same
/// instance is not stored again. Dropped points share a voxel with a kept
/// one, so voxel-level results are unaffected.
#[derive(Debug, Clone)]
pub struct InstanceStore {
    instances: Vec<Instance>,
    origin: Point3,
    lattice_cell: f64,
    lattice: FxHashSet<(u32, [i64; 3])>,
    index: CellIndex,
}

/// Per-instance summary used for JSON export.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub id: u32,
    pub point_count: usize,
    pub aabb: Aabb,
    pub predicted_voxels: usize,
}

#[derive(Debug, Clone)]
struct CellIndex {
    cell: f64,
    origin: Point3,
    cells: FxHashMap<[i64; 3], Vec<(u32, Point3)>>,
}

impl CellIndex {
    fn new(cell: f64, origin: Point3) -> Self {
        CellIndex {
            cell,
            origin,
            cells: FxHashMap::default(),
        }
    }

    #[inline]
    fn key(&self, p: &Point3) -> [i64; 3] {
        [
            ((p.x - self.origin.x) / self.cell).floor() as i64,
            ((p.y - self.origin.y) / self.cell).floor() as i64,
            ((p.z - self.origin.z) / self.cell).floor() as i64,
        ]
    }

    fn insert(&mut self, id: u32, p: Point3) {
        let k = self.key(&p);
        self.cells.entry(k).or_default().push((id, p));
    }

    /// Visits every stored point in cells meeting the closed cube of half
    /// width `r` around `p`.
    #[inline]
    fn around(&self, p: &Point3, r: f64, mut f: impl FnMut(u32, &Point3)) {
        let lo = self.key(&Point3::new(p.x - r, p.y - r, p.z - r));
        let hi = self.key(&Point3::new(p.x + r, p.y + r, p.z + r));
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    if let Some(v) = self.cells.get(&[i, j, k]) {
                        for (id, q) in v {
                            f(*id, q);
                        }
                    }
                }
            }
        }
    }
}

/// Running best `(d², id)` with the lower-id tie-break.
#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    id: Option<u32>,
}

impl Best {
    #[inline]
    fn offer(&mut self, d2: f64, id: u32) {
        let better = match self.id {
            None => d2 < self.d2,
            Some(b) => d2 < self.d2 || (d2 == self.d2 && id < b),
        };
        if better {
            self.d2 = d2;
            self.id = Some(id);
        }
    }
}

impl InstanceStore {
    /// An empty store for a scene grid, with the acceleration index built
    /// for merge threshold `eta`.
    pub fn new(dims: &GridDims, eta: f64) -> Self {
        InstanceStore {
            instances: Vec::new(),
            origin: dims.origin,
            lattice_cell: dims.resolution / 4.0,
            lattice: FxHashSet::default(),
            index: CellIndex::new(eta.max(1e-6), dims.origin),
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, id: u32) -> Option<&Instance> {
        self.instances.get(id as usize)
    }

    pub fn set_predicted(&mut self, id: u32, count: usize) {
        if let Some(i) = self.instances.get_mut(id as usize) {
            i.predicted = count;
        }
    }

    pub fn summaries(&self) -> Vec<InstanceSummary> {
        self.instances
            .iter()
            .map(|i| InstanceSummary {
                id: i.id,
                point_count: i.points.len(),
                aabb: i.aabb,
                predicted_voxels: i.predicted,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summaries())?)
    }

    /// Accumulated points of one instance as `x y z` lines.
    pub fn to_xyz(&self, id: u32) -> Option<String> {
        let inst = self.get(id)?;
        let mut s = String::new();
        for p in &inst.points {
            s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        Some(s)
    }

    /// Target instance id for each cloud, without modifying the store.
    ///
    /// Clouds are decided in order. A cloud joins the instance holding the
    /// nearest point when that distance is below `eta` (lower id on exact
    /// ties); otherwise it starts a new instance numbered after all earlier
    /// ones. Earlier clouds of the same batch count as part of the instance
    /// they were assigned to.
    pub fn assign(&self, clouds: &[PartialCloud], eta: f64, method: MergeMethod) -> Result<Vec<u32>> {
        if !(eta > 0.0) {
            return Err(Error::InvalidConfig(format!("merge threshold must be positive, got {eta}")));
        }
        let eta2 = eta * eta;
        let n_store = self.instances.len();
        // Bounds including earlier clouds of the batch, indexed by instance id.
        let mut bounds: Vec<Option<Aabb>> = self.instances.iter().map(|i| Some(i.aabb)).collect();
        let mut out: Vec<u32> = Vec::with_capacity(clouds.len());
        let scratch_index;
        let index = if (self.index.cell - eta).abs() <= 1e-12 * eta {
            &self.index
        } else {
            let mut idx = CellIndex::new(eta, self.origin);
            for inst in &self.instances {
                for p in &inst.points {
                    idx.insert(inst.id, *p);
                }
            }
            scratch_index = idx;
            &scratch_index
        };
        let mut overlay = CellIndex::new(eta, self.origin);

        for (ci, cloud) in clouds.iter().enumerate() {
            let Some(cb) = cloud.aabb() else {
                return Err(Error::EmptyInput("partial cloud"));
            };
            let candidate: Vec<bool> = bounds
                .iter()
                .map(|b| b.is_some_and(|b| b.gap_sq(&cb) < eta2))
                .collect();
            let target = if !candidate.iter().any(|&c| c) {
                None
            } else {
                match method {
                    MergeMethod::BruteForce => {
                        let mut best = Best { d2: eta2, id: None };
                        for (id, &cand) in candidate.iter().enumerate() {
                            if !cand {
                                continue;
                            }
                            let id = id as u32;
                            let mut min = f64::INFINITY;
                            let mut scan = |q: &Point3| {
                                for p in &cloud.points {
                                    min = min.min((p - q).norm_squared());
                                }
                            };
                            if let Some(inst) = self.instances.get(id as usize) {
                                inst.points.iter().for_each(&mut scan);
                            }
                            for (k, c) in clouds[..ci].iter().enumerate() {
                                if out[k] == id {
                                    c.points.iter().for_each(&mut scan);
                                }
                            }
                            best.offer(min, id);
                        }
                        best.id
                    }
                    MergeMethod::Hashed => {
                        let mut best = Best { d2: eta2, id: None };
                        for p in &cloud.points {
                            let r = best.d2.sqrt();
                            let mut visit = |id: u32, q: &Point3| {
                                if candidate[id as usize] {
                                    best.offer((p - q).norm_squared(), id);
                                }
                            };
                            index.around(p, r, &mut visit);
                            overlay.around(p, r, &mut visit);
                        }
                        best.id
                    }
                }
            };
            let id = match target {
                Some(id) => id,
                None => {
                    bounds.push(None);
                    (bounds.len() - 1) as u32
                }
            };
            let slot = &mut bounds[id as usize];
            *slot = Some(slot.map_or(cb, |b| b.union(&cb)));
            if method == MergeMethod::Hashed && ci + 1 < clouds.len() {
                for p in &cloud.points {
                    overlay.insert(id, *p);
                }
            }
            out.push(id);
        }
        debug_assert!(out.iter().all(|&id| (id as usize) < n_store + clouds.len()));
        Ok(out)
    }

    /// Appends clouds to the instances chosen by [`InstanceStore::assign`].
    pub fn apply(&mut self, clouds: &[PartialCloud], targets: &[u32]) {
        for (cloud, &id) in clouds.iter().zip(targets) {
            if id as usize == self.instances.len() {
                let first = cloud.points[0];
                self.instances.push(Instance {
                    id,
                    points: Vec::new(),
                    aabb: Aabb::new(first, first),
                    predicted: 0,
                });
            }
            for p in &cloud.points {
                let key = [
                    ((p.x - self.origin.x) / self.lattice_cell).floor() as i64,
                    ((p.y - self.origin.y) / self.lattice_cell).floor() as i64,
                    ((p.z - self.origin.z) / self.lattice_cell).floor() as i64,
                ];
                if self.lattice.insert((id, key)) {
                    let inst = &mut self.instances[id as usize];
                    inst.points.push(*p);
                    inst.aabb.include(p);
                    self.index.insert(id, *p);
                }
            }
        }
    }

    /// Merges a batch of clouds in place and returns each cloud's instance id.
    pub fn merge(&mut self, clouds: &[PartialCloud], eta: f64) -> Result<Vec<u32>> {
        let targets = self.assign(clouds, eta, MergeMethod::Hashed)?;
        self.apply(clouds, &targets);
        Ok(targets)
    }
}

/// Pure form of [`InstanceStore::merge`].
pub fn merge_instances(store: &InstanceStore, clouds: &[PartialCloud], eta: f64) -> Result<InstanceStore> {
    let mut out = store.clone();
    out.merge(clouds, eta)?;
    Ok(out)
}
