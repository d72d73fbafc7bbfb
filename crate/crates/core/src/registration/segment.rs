use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::rng;
use crate::sensor::{CameraIntrinsics, Observation};

/// World-frame points belonging to one segmented instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCloud {
    /// Ground-truth id reported by the segmentation oracle.
    pub instance_hint: Option<u32>,
    pub points: Vec<Point3>,
}

impl PartialCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PartialCloud {
            instance_hint: None,
            points,
        }
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }
}

/// Groups hit pixels by ground-truth instance, back-projects them and drops
/// whole instances with probability `miss_prob`.
///
/// Each point is placed a thousandth of a voxel past the measured depth so
/// that it lies inside the voxel the ray hit. Clouds come out in ascending
/// instance order; the drop draws are made in the same order.
pub fn segment_oracle(obs: &Observation, intr: &CameraIntrinsics, miss_prob: f64, seed: u64) -> Result<Vec<PartialCloud>> {
    if !(0.0..1.0).contains(&miss_prob) {
        return Err(Error::InvalidConfig(format!("miss probability {miss_prob} outside [0, 1)")));
    }
    let mut clouds: Vec<PartialCloud> = Vec::new();
    let mut slot = std::collections::BTreeMap::new();
    for_each_hit(obs, intr, |id, p| {
        let k = *slot.entry(id).or_insert_with(|| {
            clouds.push(PartialCloud {
                instance_hint: Some(id),
                points: Vec::new(),
            });
            clouds.len() - 1
        });
        clouds[k].points.push(p);
    });
    clouds.sort_by_key(|c| c.instance_hint);
    if miss_prob > 0.0 {
        let mut rng = rng::stream(seed, 0x5E6);
        clouds.retain(|_| rng.random::<f64>() >= miss_prob);
    }
    Ok(clouds)
}

/// Calls `f(instance, point)` for every pixel that hit an object, in raster order.
pub(crate) fn for_each_hit(obs: &Observation, intr: &CameraIntrinsics, mut f: impl FnMut(u32, Point3)) {
    let rot = obs.viewpoint.orientation.to_rotation_matrix();
    let nudge = obs.dims.resolution * 1e-3;
    for v in 0..obs.height {
        for u in 0..obs.width {
            let p = v * obs.width + u;
            let (Some(id), d) = (obs.instance[p], obs.depth[p]) else {
                continue;
            };
            if !d.is_finite() {
                continue;
            }
            let dir = (rot * intr.pixel_ray(u, v)).normalize();
            f(id, obs.viewpoint.position + dir * (d + nudge));
        }
    }
}
