use super::camera::CameraIntrinsics;
use super::render::Observation;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::scene::{BeliefGrid, CellState, GridDims};

/// Carves a copy of `grid` with one observation.
///
/// A voxel becomes FREE when its center projects into a pixel whose measured
/// depth is strictly farther than the center and the center lies within the
/// carve range ([`CameraIntrinsics::carve_range`]). The voxel each object hit
/// landed in becomes SEEN with the hit's instance id. Everything else is
/// left as it was.
pub fn carve_visibility(grid: &BeliefGrid, obs: &Observation, intr: &CameraIntrinsics) -> Result<BeliefGrid> {
    let mut out = grid.clone();
    carve_into(&mut out, obs, intr, |id| id)?;
    Ok(out)
}

/// In-place carving; `label` maps the observation's instance ids to the ids
/// stored in the grid.
pub fn carve_into(
    grid: &mut BeliefGrid,
    obs: &Observation,
    intr: &CameraIntrinsics,
    label: impl Fn(Option<u32>) -> Option<u32>,
) -> Result<()> {
    check_compatible(grid.dims(), obs, intr)?;
    carve_free(grid, obs, intr);
    for (p, hit) in obs.hit_voxel.iter().enumerate() {
        if let Some(idx) = hit {
            if obs.depth[p].is_finite() {
                grid.set_seen(*idx as usize, label(obs.instance[p]));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_compatible(dims: &GridDims, obs: &Observation, intr: &CameraIntrinsics) -> Result<()> {
    if dims != &obs.dims {
        return Err(Error::DimensionMismatch(format!(
            "grid {:?} vs observation {:?}",
            dims.counts(),
            obs.dims.counts()
        )));
    }
    if obs.width != intr.width || obs.height != intr.height || obs.depth.len() != intr.num_pixels() {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs intrinsics {}x{}",
            obs.width, obs.height, intr.width, intr.height
        )));
    }
    Ok(())
}

/// Inclusive voxel index range whose centers may fall inside the carved part
/// of the frustum.
pub(crate) fn frustum_voxel_range(dims: &GridDims, obs: &Observation, intr: &CameraIntrinsics, range: f64) -> Option<[[usize; 2]; 3]> {
    let v = &obs.viewpoint;
    let f = intr.focal();
    let (w, h) = (intr.width as f64, intr.height as f64);
    let mut bb = Aabb::new(v.position, v.position);
    for (u, vv) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
        let ray = nalgebra::Vector3::new((u - w / 2.0) / f, (vv - h / 2.0) / f, 1.0) * range;
        bb.include(&(v.position + v.orientation * ray));
    }
    let n = dims.counts();
    let r = dims.resolution;
    let mut out = [[0usize; 2]; 3];
    for a in 0..3 {
        let lo = ((bb.min[a] - dims.origin[a]) / r - 0.5).ceil() as i64 - 1;
        let hi = ((bb.max[a] - dims.origin[a]) / r - 0.5).floor() as i64 + 1;
        let lo = lo.max(0);
        let hi = hi.min(n[a] as i64 - 1);
        if lo > hi {
            return None;
        }
        out[a] = [lo as usize, hi as usize];
    }
    Some(out)
}

fn carve_free(grid: &mut BeliefGrid, obs: &Observation, intr: &CameraIntrinsics) {
    let dims = *grid.dims();
    let range = intr.carve_range(dims.resolution);
    let Some(box_) = frustum_voxel_range(&dims, obs, intr, range) else {
        return;
    };
    let rt = obs.viewpoint.orientation.to_rotation_matrix().inverse();
    let o = obs.viewpoint.position;
    let f = intr.focal();
    let (w, h) = (intr.width as f64, intr.height as f64);
    for k in box_[2][0]..=box_[2][1] {
        for j in box_[1][0]..=box_[1][1] {
            for i in box_[0][0]..=box_[0][1] {
                let idx = dims.index(i, j, k);
                if grid.state(idx) == CellState::Free {
                    continue;
                }
                let c: Point3 = dims.voxel_center(i, j, k);
                let pc = rt * (c - o);
                if pc.z <= 0.0 {
                    continue;
                }
                let u = f * pc.x / pc.z + w / 2.0;
                let v = f * pc.y / pc.z + h / 2.0;
                if !(u >= 0.0 && u < w && v >= 0.0 && v < h) {
                    continue;
                }
                let p = (v as usize) * intr.width + u as usize;
                let d = pc.norm();
                if d < range && d < obs.depth[p] {
                    grid.set_free(idx);
                }
            }
        }
    }
}
