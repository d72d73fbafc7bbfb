//! Procedural cabinet scenes with domain randomization.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::rng;
use crate::scene::{BeliefGrid, CellState, Face, GridDims};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo <= self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidConfig(format!("range {name} is empty or unordered")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut rng::Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainRandomizationConfig {
    pub dx: Range,
    pub dy: Range,
    pub dz: Range,
    pub cabinet_height: Range,
    /// Camera base position along the approach axis, in the frame where the
    /// opening plane sits at `front_offset`.
    pub base_x: Range,
    pub base_y: Range,
    /// Distance from the world origin to the opening plane along the approach axis.
    pub front_offset: f64,
    pub object_count: (usize, usize),
    /// Per-axis object size in meters.
    pub object_size: Range,
    pub resolution: f64,
    pub opening: Face,
    pub placement_retries: usize,
}

impl Default for DomainRandomizationConfig {
    fn default() -> Self {
        DomainRandomizationConfig {
            dx: Range::new(0.5, 1.0),
            dy: Range::new(1.1, 1.5),
            dz: Range::new(0.3, 0.7),
            cabinet_height: Range::new(0.05, 0.2),
            base_x: Range::new(-0.5, -0.1),
            base_y: Range::new(-0.3, 0.3),
            front_offset: 0.3,
            object_count: (3, 10),
            object_size: Range::new(0.05, 0.25),
            resolution: 0.025,
            opening: Face::NegX,
            placement_retries: 60,
        }
    }
}

impl DomainRandomizationConfig {
    pub fn validate(&self) -> Result<()> {
        self.dx.check("dx")?;
        self.dy.check("dy")?;
        self.dz.check("dz")?;
        self.cabinet_height.check("cabinet_height")?;
        self.base_x.check("base_x")?;
        self.base_y.check("base_y")?;
        self.object_size.check("object_size")?;
        if self.object_count.0 > self.object_count.1 {
            return Err(Error::InvalidConfig("object_count range is unordered".into()));
        }
        if self.object_count.0 < 3 || self.object_count.1 > 10 {
            return Err(Error::InvalidConfig("object count must lie in [3, 10]".into()));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        if self.object_size.lo <= 0.0 {
            return Err(Error::InvalidConfig("object sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { sx: f64, sy: f64, sz: f64 },
    Cylinder { radius: f64, height: f64 },
    Sphere { radius: f64 },
    /// A box with the `+x,+y` quadrant of its footprint removed.
    LPrism { sx: f64, sy: f64, sz: f64 },
}

impl Shape {
    /// Membership test in the object frame (origin at the bottom center).
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        match *self {
            Shape::Box { sx, sy, sz } => x.abs() <= sx / 2.0 && y.abs() <= sy / 2.0 && z >= 0.0 && z <= sz,
            Shape::Cylinder { radius, height } => x * x + y * y <= radius * radius && z >= 0.0 && z <= height,
            Shape::Sphere { radius } => {
                let dz = z - radius;
                x * x + y * y + dz * dz <= radius * radius
            }
            Shape::LPrism { sx, sy, sz } => {
                x.abs() <= sx / 2.0 && y.abs() <= sy / 2.0 && z >= 0.0 && z <= sz && !(x > 0.0 && y > 0.0)
            }
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { sz, .. } | Shape::LPrism { sz, .. } => sz,
            Shape::Cylinder { height, .. } => height,
            Shape::Sphere { radius } => 2.0 * radius,
        }
    }

    /// Radius of a vertical cylinder around the object axis that encloses it.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { sx, sy, .. } | Shape::LPrism { sx, sy, .. } => 0.5 * (sx * sx + sy * sy).sqrt(),
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius } => radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u32,
    pub shape: Shape,
    /// Bottom center of the object in world coordinates.
    pub position: Point3,
    pub yaw: f64,
    /// Grid layer of the object's bottom face.
    pub base_layer: usize,
    pub voxels: Vec<[u32; 3]>,
}

/// Hidden world used by the simulated sensor and the rollout labeler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub dims: GridDims,
    /// Sampled physical extents before voxel rounding.
    pub extent: [f64; 3],
    pub opening: Face,
    pub cabinet_height: f64,
    /// Camera base position; the reach sphere is centered here.
    pub base: Point3,
    pub objects: Vec<GroundTruthObject>,
    pub seed: u64,
}

impl SceneSpec {
    /// An empty cabinet, mainly for tests.
    pub fn empty(dims: GridDims, opening: Face, base: Point3) -> Self {
        SceneSpec {
            extent: dims.extent(),
            dims,
            opening,
            cabinet_height: dims.origin.z,
            base,
            objects: Vec::new(),
            seed: 0,
        }
    }

    pub fn volume(&self) -> f64 {
        let e = self.dims.extent();
        e[0] * e[1] * e[2]
    }

    /// Adds an object occupying exactly the given voxels.
    pub fn push_voxel_object(&mut self, voxels: Vec<[u32; 3]>) -> u32 {
        let id = self.objects.len() as u32;
        let r = self.dims.resolution;
        let (mut lo, mut hi) = ([u32::MAX; 3], [0u32; 3]);
        for v in &voxels {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let o = self.dims.origin;
        let sx = (hi[0] - lo[0] + 1) as f64 * r;
        let sy = (hi[1] - lo[1] + 1) as f64 * r;
        let sz = (hi[2] - lo[2] + 1) as f64 * r;
        self.objects.push(GroundTruthObject {
            id,
            shape: Shape::Box { sx, sy, sz },
            position: Point3::new(
                o.x + lo[0] as f64 * r + sx / 2.0,
                o.y + lo[1] as f64 * r + sy / 2.0,
                o.z + lo[2] as f64 * r,
            ),
            yaw: 0.0,
            base_layer: lo[2] as usize,
            voxels,
        });
        id
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(s)?;
        let n = spec.dims.counts();
        for o in &spec.objects {
            if o.voxels.iter().any(|v| (0..3).any(|a| v[a] as usize >= n[a])) {
                return Err(Error::Format(format!("object {} has voxels outside the grid", o.id)));
            }
        }
        Ok(spec)
    }
}

/// Voxel offsets of a shape placed with its bottom on layer `base_layer`.
///
/// Heights are evaluated from integer layer offsets so that translating the
/// object vertically by whole voxels never changes its footprint.
fn voxelize(dims: &GridDims, shape: &Shape, x: f64, y: f64, yaw: f64, base_layer: usize) -> Vec<[u32; 3]> {
    let r = dims.resolution;
    let rad = shape.footprint_radius();
    let layers = (shape.height() / r).ceil() as usize + 1;
    let (s, c) = yaw.sin_cos();
    let i_lo = (((x - rad - dims.origin.x) / r).floor() as i64).max(0);
    let i_hi = (((x + rad - dims.origin.x) / r).ceil() as i64).min(dims.nx as i64 - 1);
    let j_lo = (((y - rad - dims.origin.y) / r).floor() as i64).max(0);
    let j_hi = (((y + rad - dims.origin.y) / r).ceil() as i64).min(dims.ny as i64 - 1);
    let mut out = Vec::new();
    for dk in 0..layers {
        let k = base_layer + dk;
        if k >= dims.nz {
            break;
        }
        let lz = (dk as f64 + 0.5) * r;
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                let wx = dims.origin.x + (i as f64 + 0.5) * r - x;
                let wy = dims.origin.y + (j as f64 + 0.5) * r - y;
                let lx = c * wx + s * wy;
                let ly = -s * wx + c * wy;
                if shape.contains(lx, ly, lz) {
                    out.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    out
}

fn sample_shape(cfg: &DomainRandomizationConfig, max_height: f64, rng: &mut rng::Rng) -> Shape {
    let size = |rng: &mut rng::Rng| cfg.object_size.sample(rng);
    let kind = rng.random_range(0..4u8);
    match kind {
        0 => Shape::Box {
            sx: size(rng),
            sy: size(rng),
            sz: size(rng).min(max_height),
        },
        1 => Shape::Cylinder {
            radius: size(rng) / 2.0,
            height: size(rng).min(max_height),
        },
        2 => Shape::Sphere {
            radius: (size(rng) / 2.0).min(max_height / 2.0),
        },
        _ => Shape::LPrism {
            sx: size(rng),
            sy: size(rng),
            sz: size(rng).min(max_height),
        },
    }
}

/// Samples a cabinet scene. The result is a pure function of `(config, seed)`.
pub fn generate_scene(config: &DomainRandomizationConfig, seed: u64) -> Result<SceneSpec> {
    config.validate()?;
    let mut rng = rng::stream(seed, 0x5CE4E);
    let res = config.resolution;
    let extent = [config.dx.sample(&mut rng), config.dy.sample(&mut rng), config.dz.sample(&mut rng)];
    let cabinet_height = config.cabinet_height.sample(&mut rng);
    let base_x = config.base_x.sample(&mut rng);
    let base_y = config.base_y.sample(&mut rng);

    let counts = extent.map(|e| ((e / res).round() as usize).max(3));
    let size_y = counts[1] as f64 * res;
    let origin = Point3::new(config.front_offset, -size_y / 2.0, cabinet_height);
    let dims = GridDims::new(counts[0], counts[1], counts[2], res, origin)?;

    let opening = config.opening;
    let base = camera_base(&dims, opening, config.front_offset - base_x, base_y);

    let target = if config.object_count.0 == config.object_count.1 {
        config.object_count.0
    } else {
        rng.random_range(config.object_count.0..=config.object_count.1)
    };

    let mut owner = vec![u16::MAX; dims.len()];
    let mut objects: Vec<GroundTruthObject> = Vec::with_capacity(target);
    let interior_height = (dims.nz as f64 - 2.0) * res;
    let bounds = dims.bounds();
    let mut attempts = 0;
    while objects.len() < target && attempts < config.placement_retries * target {
        attempts += 1;
        let shape = sample_shape(config, interior_height - 1e-9, &mut rng);
        let rad = shape.footprint_radius();
        let x = sample_within(bounds.min.x + res + rad, bounds.max.x - res - rad, &mut rng);
        let y = sample_within(bounds.min.y + res + rad, bounds.max.y - res - rad, &mut rng);
        let yaw = rng.random_range(0.0..(2.0 * PI));
        let id = objects.len() as u32;
        if let Some((voxels, layer)) = drop_object(&dims, &owner, &shape, x, y, yaw) {
            for v in &voxels {
                owner[dims.index(v[0] as usize, v[1] as usize, v[2] as usize)] = id as u16;
            }
            objects.push(GroundTruthObject {
                id,
                shape,
                position: Point3::new(x, y, origin.z + layer as f64 * res),
                yaw,
                base_layer: layer,
                voxels,
            });
        }
    }
    if objects.len() < 3 {
        return Err(Error::SceneGeneration(format!(
            "placed only {} objects after {attempts} attempts",
            objects.len()
        )));
    }
    if objects.len() < target {
        log::debug!("scene {seed}: placed {} of {target} objects", objects.len());
    }
    Ok(SceneSpec {
        dims,
        extent,
        opening,
        cabinet_height,
        base,
        objects,
        seed,
    })
}

fn sample_within(lo: f64, hi: f64, rng: &mut rng::Rng) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        0.5 * (lo + hi)
    }
}

/// Camera base in front of the opening: `outward` meters out of the opening
/// plane, shifted `lateral` along the face's first in-plane axis, at the
/// opening's center otherwise.
pub fn camera_base(dims: &GridDims, opening: Face, outward: f64, lateral: f64) -> Point3 {
    let b = dims.bounds();
    let mut p = b.center();
    let axis = opening.axis();
    p[axis] = if opening.is_positive() { b.max[axis] } else { b.min[axis] } + opening.sign() * outward;
    let lat = if axis == 0 { 1 } else { 0 };
    p[lat] += lateral;
    p
}

/// Drops a shape from the top of the cabinet until it rests on the floor
/// layer or on another object. Returns `None` when it does not fit.
fn drop_object(dims: &GridDims, owner: &[u16], shape: &Shape, x: f64, y: f64, yaw: f64) -> Option<(Vec<[u32; 3]>, usize)> {
    let pattern = voxelize(dims, shape, x, y, yaw, 0);
    if pattern.is_empty() {
        return None;
    }
    let top = pattern.iter().map(|v| v[2] as usize).max()?;
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    // Object voxels must stay strictly inside the boundary layer.
    if top + 2 >= nz {
        return None;
    }
    if pattern
        .iter()
        .any(|v| v[0] < 1 || v[1] < 1 || v[0] as usize > nx - 2 || v[1] as usize > ny - 2)
    {
        return None;
    }
    let fits = |layer: usize| {
        pattern.iter().all(|v| {
            let k = v[2] as usize + layer;
            k <= nz - 2 && owner[dims.index(v[0] as usize, v[1] as usize, k)] == u16::MAX
        })
    };
    let mut layer = nz - 2 - top;
    if !fits(layer) {
        return None;
    }
    while layer > 1 && fits(layer - 1) {
        layer -= 1;
    }
    let voxels = pattern.iter().map(|v| [v[0], v[1], v[2] + layer as u32]).collect();
    Some((voxels, layer))
}

/// Dense per-voxel ground truth: the owning object id, or `None`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub dims: GridDims,
    pub opening: Face,
    owner: Vec<u16>,
    skip: Vec<u8>,
}

impl GroundTruth {
    pub fn new(spec: &SceneSpec) -> Self {
        let mut owner = vec![u16::MAX; spec.dims.len()];
        for o in &spec.objects {
            for v in &o.voxels {
                owner[spec.dims.index(v[0] as usize, v[1] as usize, v[2] as usize)] = o.id as u16;
            }
        }
        let skip = crate::sensor::chebyshev_field(&spec.dims, |i| owner[i] != u16::MAX);
        GroundTruth {
            dims: spec.dims,
            opening: spec.opening,
            owner,
            skip,
        }
    }

    /// Empty-space distance field used to accelerate ray casting.
    pub fn skip_field(&self) -> &[u8] {
        &self.skip
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.owner[idx] != u16::MAX
    }

    #[inline]
    pub fn owner(&self, idx: usize) -> Option<u32> {
        match self.owner[idx] {
            u16::MAX => None,
            id => Some(id as u32),
        }
    }
}

/// Fully determined belief of a scene: object voxels seen, everything else free.
pub fn ground_truth_grid(spec: &SceneSpec) -> BeliefGrid {
    let mut g = BeliefGrid::filled(spec.dims, CellState::Free);
    for o in &spec.objects {
        for v in &o.voxels {
            let idx = spec.dims.index(v[0] as usize, v[1] as usize, v[2] as usize);
            g.set_seen(idx, Some(o.id));
        }
    }
    g
}
