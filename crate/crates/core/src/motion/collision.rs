use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::registration::InstanceStore;
use crate::scene::{BeliefGrid, CellState, Face, GridDims, SceneSpec};
use crate::sensor::{chebyshev_field, Viewpoint};

/// Publicly known cabinet geometry: everything about a scene except its
/// contents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub dims: GridDims,
    pub opening: Face,
    /// Camera base; the reach sphere is centered here.
    pub base: Point3,
}

impl Workspace {
    pub fn of(spec: &SceneSpec) -> Self {
        Workspace {
            dims: spec.dims,
            opening: spec.opening,
            base: spec.base,
        }
    }
}

/// Camera body and planner parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Radius of the spherical camera body, meters.
    pub body_radius: f64,
    /// How far the staging region extends out of the opening, meters.
    pub staging_depth: f64,
    pub reach_radius: f64,
    pub rrt_budget: usize,
    pub rrt_step: f64,
    pub goal_bias: f64,
    /// Weight of orientation change in configuration-space length, m/rad.
    pub lambda: f64,
    /// Execution noise: per-axis position std, meters.
    pub sigma_pos: f64,
    /// Execution noise: per-axis rotation-vector std, radians.
    pub sigma_ang: f64,
    /// Executed pose acceptance: position tolerance, meters.
    pub eps_pos: f64,
    /// Executed pose acceptance: angle tolerance, degrees.
    pub eps_ang_deg: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig {
            body_radius: 0.04,
            staging_depth: 0.6,
            reach_radius: 1.5,
            rrt_budget: 5000,
            rrt_step: 0.05,
            goal_bias: 0.1,
            lambda: 0.1,
            sigma_pos: 0.0,
            sigma_ang: 0.0,
            eps_pos: 0.02,
            eps_ang_deg: 5.0,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("body radius", self.body_radius),
            ("staging depth", self.staging_depth),
            ("reach radius", self.reach_radius),
            ("rrt step", self.rrt_step),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.goal_bias) || self.lambda < 0.0 || self.sigma_pos < 0.0 || self.sigma_ang < 0.0 {
            return Err(Error::InvalidConfig("motion parameters out of range".into()));
        }
        Ok(())
    }
}

/// Obstacles and allowed regions for the camera body at one step.
///
/// Solid: object boxes, one-voxel boundary slabs on every closed face, and
/// every voxel that is unknown or occupied in the belief. Allowed: the
/// staging box in front of the opening and free interior voxels, within
/// reach of the base.
#[derive(Debug, Clone)]
pub struct CollisionModel {
    pub object_boxes: Vec<Aabb>,
    pub boundary_slabs: Vec<Aabb>,
    pub staging: Aabb,
    pub reach_center: Point3,
    pub reach_radius: f64,
    pub body_radius: f64,
    pub dims: GridDims,
    pub opening: Face,
    /// Per voxel: unknown or occupied.
    blocked: Vec<bool>,
    free: Vec<bool>,
    /// Chessboard distance to the nearest blocked voxel.
    clearance: Vec<u8>,
    /// Number of voxel layers that guarantee clearance of one body radius.
    clear_layers: u8,
}

/// Staging box in front of the opening face.
pub fn staging_region(dims: &GridDims, opening: Face, depth: f64) -> Aabb {
    let mut b = dims.bounds();
    let a = opening.axis();
    if opening.is_positive() {
        b.min[a] = b.max[a];
        b.max[a] += depth;
    } else {
        b.max[a] = b.min[a];
        b.min[a] -= depth;
    }
    b
}

/// Boundary layers on every face except the opening.
pub fn boundary_slabs(dims: &GridDims, opening: Face) -> Vec<Aabb> {
    let r = dims.resolution;
    let bounds = dims.bounds();
    Face::ALL
        .iter()
        .filter(|&&f| f != opening)
        .map(|&f| {
            let mut b = bounds;
            let a = f.axis();
            if f.is_positive() {
                b.min[a] = b.max[a] - r;
            } else {
                b.max[a] = b.min[a] + r;
            }
            b
        })
        .collect()
}

pub fn build_collision_model(grid: &BeliefGrid, store: &InstanceStore, ws: &Workspace, cfg: &MotionConfig) -> CollisionModel {
    let dims = *grid.dims();
    let blocked: Vec<bool> = grid.cells().iter().map(|c| *c != CellState::Free).collect();
    let free: Vec<bool> = grid.cells().iter().map(|c| *c == CellState::Free).collect();
    let clearance = chebyshev_field(&dims, |i| blocked[i]);
    let clear_layers = ((cfg.body_radius / dims.resolution).ceil() as u64 + 1).min(255) as u8;
    CollisionModel {
        object_boxes: store.instances().iter().map(|i| i.aabb).collect(),
        boundary_slabs: boundary_slabs(&dims, ws.opening),
        staging: staging_region(&dims, ws.opening, cfg.staging_depth),
        reach_center: ws.base,
        reach_radius: cfg.reach_radius,
        body_radius: cfg.body_radius,
        dims,
        opening: ws.opening,
        blocked,
        free,
        clearance,
        clear_layers,
    }
}

impl CollisionModel {
    pub fn is_free(&self, pose: &Viewpoint) -> bool {
        self.is_free_position(&pose.position)
    }

    pub fn in_reach(&self, p: &Point3) -> bool {
        (p - self.reach_center).norm() <= self.reach_radius
    }

    /// Inside the staging box or a free interior voxel.
    pub fn in_allowed_region(&self, p: &Point3) -> bool {
        if self.staging.contains(p) {
            return true;
        }
        match self.dims.voxel_of(p) {
            Some([i, j, k]) => self.free[self.dims.index(i, j, k)],
            None => false,
        }
    }

    pub fn is_free_position(&self, p: &Point3) -> bool {
        if !p.iter().all(|x| x.is_finite()) || !self.in_reach(p) || !self.in_allowed_region(p) {
            return false;
        }
        !self.collides(p)
    }

    /// Whether the body sphere at `p` touches any solid.
    pub fn collides(&self, p: &Point3) -> bool {
        let r = self.body_radius;
        if self.object_boxes.iter().any(|b| b.sphere_intersects(p, r)) {
            return true;
        }
        if self.boundary_slabs.iter().any(|b| b.sphere_intersects(p, r)) {
            return true;
        }
        self.touches_blocked_voxel(p)
    }

    fn touches_blocked_voxel(&self, p: &Point3) -> bool {
        let d = &self.dims;
        if let Some([i, j, k]) = d.voxel_of(p) {
            if self.clearance[d.index(i, j, k)] >= self.clear_layers {
                return false;
            }
        }
        let r = self.body_radius;
        let lo = d.voxel_of_unclamped(&Point3::new(p.x - r, p.y - r, p.z - r));
        let hi = d.voxel_of_unclamped(&Point3::new(p.x + r, p.y + r, p.z + r));
        let n = d.counts();
        let clamp = |v: i64, a: usize| v.clamp(0, n[a] as i64 - 1) as usize;
        if (0..3).any(|a| hi[a] < 0 || lo[a] >= n[a] as i64) {
            return false;
        }
        for k in clamp(lo[2], 2)..=clamp(hi[2], 2) {
            for j in clamp(lo[1], 1)..=clamp(hi[1], 1) {
                for i in clamp(lo[0], 0)..=clamp(hi[0], 0) {
                    let idx = d.index(i, j, k);
                    if self.blocked[idx] && d.voxel_box(i, j, k).sphere_intersects(p, r) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Bounding box of everywhere the body may be.
    pub fn sampling_bounds(&self) -> Aabb {
        let b = self.dims.bounds().union(&self.staging);
        let reach = Aabb::new(self.reach_center, self.reach_center).inflate(self.reach_radius);
        let mut out = b;
        for a in 0..3 {
            out.min[a] = b.min[a].max(reach.min[a]);
            out.max[a] = b.max[a].min(reach.max[a]);
        }
        out
    }

    /// The unknown-or-occupied voxel blocks.
    pub fn blocked_voxels(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocked.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitQuaternion;
    use crate::registration::PartialCloud;

    fn ws() -> Workspace {
        let dims = GridDims::new(20, 20, 20, 0.025, Point3::new(0.0, 0.0, 0.0)).unwrap();
        Workspace {
            dims,
            opening: Face::NegX,
            base: Point3::new(-0.3, 0.25, 0.25),
        }
    }

    fn at(x: f64, y: f64, z: f64) -> Viewpoint {
        Viewpoint::new(Point3::new(x, y, z), UnitQuaternion::identity())
    }

    #[test]
    fn unknown_grid_only_staging_is_free() {
        let w = ws();
        let grid = BeliefGrid::unknown(w.dims);
        let m = build_collision_model(&grid, &InstanceStore::new(&w.dims, 0.05), &w, &MotionConfig::default());
        assert_eq!(m.blocked_voxels().count(), w.dims.len());
        assert!(m.is_free(&at(-0.2, 0.25, 0.25)));
        assert!(!m.is_free(&at(0.25, 0.25, 0.25)));
        // Too close to the unknown interior.
        assert!(!m.is_free(&at(-0.02, 0.25, 0.25)));
    }

    #[test]
    fn free_grid_interior_minus_slabs() {
        let w = ws();
        let grid = BeliefGrid::filled(w.dims, CellState::Free);
        let m = build_collision_model(&grid, &InstanceStore::new(&w.dims, 0.05), &w, &MotionConfig::default());
        assert!(m.is_free(&at(0.25, 0.25, 0.25)));
        // Within body radius of the back slab (x = 0.475 .. 0.5).
        assert!(!m.is_free(&at(0.45, 0.25, 0.25)));
        assert!(m.is_free(&at(0.475 - 0.04 - 1e-6, 0.25, 0.25)));
        // Outside the grid behind the back wall.
        assert!(!m.is_free(&at(0.6, 0.25, 0.25)));
    }

    #[test]
    fn object_box_clearance() {
        let w = ws();
        let grid = BeliefGrid::filled(w.dims, CellState::Free);
        let mut store = InstanceStore::new(&w.dims, 0.05);
        store
            .merge(
                &[PartialCloud::new(vec![Point3::new(0.2, 0.2, 0.2), Point3::new(0.3, 0.3, 0.3)])],
                0.05,
            )
            .unwrap();
        let m = build_collision_model(&grid, &store, &w, &MotionConfig::default());
        assert_eq!(m.object_boxes[0], Aabb::new(Point3::new(0.2, 0.2, 0.2), Point3::new(0.3, 0.3, 0.3)));
        assert!(!m.is_free(&at(0.25, 0.25, 0.25)));
        assert!(!m.is_free(&at(0.25, 0.25, 0.33)));
        assert!(m.is_free(&at(0.25, 0.25, 0.34 + 1e-9)));
    }

    #[test]
    fn reach_limit() {
        let w = ws();
        let grid = BeliefGrid::filled(w.dims, CellState::Free);
        let cfg = MotionConfig {
            reach_radius: 0.4,
            ..Default::default()
        };
        let m = build_collision_model(&grid, &InstanceStore::new(&w.dims, 0.05), &w, &cfg);
        assert!(m.is_free(&at(0.05, 0.25, 0.25)));
        assert!(!m.is_free(&at(0.2, 0.25, 0.25)));
    }
}
