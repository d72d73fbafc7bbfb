use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, Vector3};
use crate::scene::{BeliefGrid, CellState, GridDims};

/// A partial cloud moved to its mean and scaled to object size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCloud {
    pub points: Vec<Point3>,
    pub center: Point3,
    pub scale: f64,
}

impl NormalizedCloud {
    /// Whether every point lies in the closed unit ball (up to 1e-9). Holds
    /// whenever the raw cloud fits within `scale` of its mean.
    pub fn fits_unit_ball(&self) -> bool {
        self.points.iter().all(|p| p.coords.norm() <= 1.0 + 1e-9)
    }
}

/// Centers a cloud on its mean and divides by the edge of a cube of volume
/// `volume_cap`.
pub fn normalize_partial(points: &[Point3], volume_cap: f64) -> Result<NormalizedCloud> {
    if points.is_empty() {
        return Err(Error::EmptyInput("partial cloud"));
    }
    if !(volume_cap > 0.0) {
        return Err(Error::InvalidConfig("volume cap must be positive".into()));
    }
    let mut sum = Vector3::zeros();
    for p in points {
        sum += p.coords;
    }
    let center = Point3::from(sum / points.len() as f64);
    let scale = volume_cap.cbrt();
    Ok(NormalizedCloud {
        points: points.iter().map(|p| Point3::from((p - center) / scale)).collect(),
        center,
        scale,
    })
}

pub fn denormalize(cloud: &NormalizedCloud) -> Vec<Point3> {
    cloud.points.iter().map(|p| cloud.center + p.coords * cloud.scale).collect()
}

/// Inclusive voxel range covering the voxels of all points in `bounds`.
/// Points outside the grid are clamped onto it.
pub fn voxel_bounds(dims: &GridDims, bounds: &Aabb) -> [[usize; 2]; 3] {
    let lo = dims.voxel_of_clamped(&bounds.min);
    let hi = dims.voxel_of_clamped(&bounds.max);
    [[lo[0], hi[0]], [lo[1], hi[1]], [lo[2], hi[2]]]
}

/// Voxels of the instance's voxel bounding box that are still UNKNOWN.
///
/// The box is the tight bound of the voxels containing the points, which
/// equals the voxels spanned by the point bounding box.
pub fn complete_instance(points: &[Point3], grid: &BeliefGrid) -> Result<Vec<usize>> {
    let bounds = Aabb::from_points(points).ok_or(Error::EmptyInput("instance points"))?;
    let mut out = Vec::new();
    fill_unknown(grid, &voxel_bounds(grid.dims(), &bounds), |idx| out.push(idx));
    Ok(out)
}

pub(crate) fn fill_unknown(grid: &BeliefGrid, r: &[[usize; 2]; 3], mut f: impl FnMut(usize)) {
    let dims = grid.dims();
    for k in r[2][0]..=r[2][1] {
        for j in r[1][0]..=r[1][1] {
            for i in r[0][0]..=r[0][1] {
                let idx = dims.index(i, j, k);
                if grid.state(idx) == CellState::Unknown {
                    f(idx);
                }
            }
        }
    }
}

/// Symmetric squared-L2 Chamfer distance:
/// mean over `a` of the squared distance to the nearest point of `b`, plus
/// the same from `b` to `a`.
pub fn chamfer(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("chamfer point set"));
    }
    let one_way = |x: &[Point3], y: &[Point3]| {
        let mut total = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                best = best.min((p - q).norm_squared());
            }
            total += best;
        }
        total / x.len() as f64
    };
    Ok(one_way(a, b) + one_way(b, a))
}
