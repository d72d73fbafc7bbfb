use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::camera::{CameraIntrinsics, SensorConfig, Viewpoint};
use super::traverse::{cast_skipping, RayEnd};
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{GridDims, GroundTruth, SceneSpec};

/// One depth + instance frame, row-major with `width * height` pixels.
///
/// `depth` holds the euclidean distance along each pixel ray, `INFINITY`
/// when nothing was hit within range and `NaN` for pixels dropped by noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Optical pose the frame was taken from.
    pub viewpoint: Viewpoint,
    /// Grid the frame was rendered against.
    pub dims: GridDims,
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub instance: Vec<Option<u32>>,
    /// Linear index of the voxel each ray stopped in, for object hits.
    pub hit_voxel: Vec<Option<u32>>,
}

impl Observation {
    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn hit_count(&self) -> usize {
        self.hit_voxel.iter().filter(|h| h.is_some()).count()
    }
}

/// Renders a frame from the ground truth of `spec`.
pub fn render_depth(spec: &SceneSpec, v: &Viewpoint, intr: &CameraIntrinsics) -> Result<Observation> {
    render_truth(&GroundTruth::new(spec), v, intr)
}

/// Same as [`render_depth`] with the ground truth already rasterized.
pub fn render_truth(gt: &GroundTruth, v: &Viewpoint, intr: &CameraIntrinsics) -> Result<Observation> {
    intr.validate()?;
    if !v.is_valid() {
        return Err(Error::InvalidConfig("viewpoint is not finite or not normalized".into()));
    }
    if let Some(c) = gt.dims.voxel_of(&v.position) {
        if gt.is_occupied(gt.dims.index(c[0], c[1], c[2])) {
            return Err(Error::ViewpointInSolid);
        }
    }
    let rot = v.orientation.to_rotation_matrix();
    let n = intr.num_pixels();
    let mut depth = vec![f64::INFINITY; n];
    let mut instance = vec![None; n];
    let mut hit_voxel = vec![None; n];
    for row in 0..intr.height {
        for col in 0..intr.width {
            let p = row * intr.width + col;
            let dir = (rot * intr.pixel_ray(col, row)).normalize();
            let end = cast_skipping(
                &gt.dims,
                gt.opening,
                &v.position,
                &dir,
                intr.max_range,
                Some(gt.skip_field()),
                |idx, _| gt.is_occupied(idx),
            );
            match end {
                RayEnd::Hit { t, idx } => {
                    depth[p] = t;
                    instance[p] = gt.owner(idx);
                    hit_voxel[p] = Some(idx as u32);
                }
                RayEnd::Wall { t } => depth[p] = t,
                RayEnd::Escaped => {}
            }
        }
    }
    Ok(Observation {
        viewpoint: *v,
        dims: gt.dims,
        width: intr.width,
        height: intr.height,
        depth,
        instance,
        hit_voxel,
    })
}

/// Applies gaussian depth noise and edge dropout. A no-op when the config is
/// noise-free.
///
/// Dropout considers pixels whose 4-neighbourhood contains a depth jump
/// larger than `jump` (or a switch between hit and no-hit); each such pixel
/// is dropped with probability `cfg.edge_dropout`.
pub fn apply_noise(obs: &mut Observation, intr: &CameraIntrinsics, cfg: &SensorConfig, jump: f64, seed: u64) {
    if !cfg.is_noisy() {
        return;
    }
    let rot = obs.viewpoint.orientation.to_rotation_matrix();
    let mut rng = rng::stream(seed, 0xD3F7);
    let (w, h) = (obs.width, obs.height);
    let clean = obs.depth.clone();
    let is_edge = |u: usize, v: usize| {
        let d = clean[v * w + u];
        let mut edge = false;
        let mut check = |uu: usize, vv: usize| {
            let e = clean[vv * w + uu];
            if d.is_finite() != e.is_finite() || (d.is_finite() && (d - e).abs() > jump) {
                edge = true;
            }
        };
        if u > 0 {
            check(u - 1, v);
        }
        if u + 1 < w {
            check(u + 1, v);
        }
        if v > 0 {
            check(u, v - 1);
        }
        if v + 1 < h {
            check(u, v + 1);
        }
        edge
    };
    let normal = Normal::new(0.0, cfg.depth_sigma.max(0.0)).expect("finite sigma");
    for v in 0..h {
        for u in 0..w {
            let p = v * w + u;
            let drop_draw: f64 = rng.random();
            let noise = normal.sample(&mut rng);
            if cfg.edge_dropout > 0.0 && drop_draw < cfg.edge_dropout && is_edge(u, v) {
                obs.depth[p] = f64::NAN;
                obs.instance[p] = None;
                obs.hit_voxel[p] = None;
                continue;
            }
            if obs.depth[p].is_finite() && cfg.depth_sigma > 0.0 {
                obs.depth[p] = (obs.depth[p] + noise).max(1e-6);
                if obs.hit_voxel[p].is_some() {
                    // The hit now lands wherever the perturbed depth puts it.
                    let dir = (rot * intr.pixel_ray(u, v)).normalize();
                    let q = obs.viewpoint.position + dir * (obs.depth[p] + obs.dims.resolution * 1e-3);
                    obs.hit_voxel[p] = obs.dims.voxel_of(&q).map(|c| obs.dims.index(c[0], c[1], c[2]) as u32);
                }
            }
        }
    }
}
