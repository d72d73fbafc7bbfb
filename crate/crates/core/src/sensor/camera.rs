use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Quaternion, UnitQuaternion, Vector3};

/// Camera pose: position plus orientation mapping camera axes to world axes.
///
/// The camera looks along its local `+z`, with `+x` to the right of the
/// image and `+y` down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: Point3,
    pub orientation: UnitQuaternion,
}

#[derive(Serialize, Deserialize)]
struct ViewpointRepr {
    position: [f64; 3],
    /// `(w, x, y, z)`
    orientation: [f64; 4],
}

impl Serialize for Viewpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.orientation.quaternion();
        ViewpointRepr {
            position: [self.position.x, self.position.y, self.position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Viewpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ViewpointRepr::deserialize(d)?;
        let [w, x, y, z] = r.orientation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(serde::de::Error::custom("orientation is not a unit quaternion"));
        }
        Ok(Viewpoint {
            position: Point3::from(r.position),
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }
}

impl Viewpoint {
    pub fn new(position: Point3, orientation: UnitQuaternion) -> Self {
        Viewpoint { position, orientation }
    }

    /// A camera at `position` looking at `target`, with image-down roughly
    /// along world `-z`.
    pub fn look_at(position: Point3, target: Point3) -> Self {
        let fwd = (target - position).normalize();
        let mut down = Vector3::new(0.0, 0.0, -1.0);
        if fwd.cross(&down).norm() < 1e-6 {
            down = Vector3::new(1.0, 0.0, 0.0);
        }
        let right = down.cross(&fwd).normalize();
        let down = fwd.cross(&right);
        let m = nalgebra::Matrix3::from_columns(&[right, down, fwd]);
        let rot = nalgebra::Rotation3::from_matrix_unchecked(m);
        Viewpoint::new(position, UnitQuaternion::from_rotation_matrix(&rot))
    }

    /// `[px, py, pz, qw, qx, qy, qz]`
    pub fn to_vec7(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [self.position.x, self.position.y, self.position.z, q.w, q.i, q.j, q.k]
    }

    /// Builds a viewpoint from a 7-vector, renormalizing the quaternion part.
    pub fn from_vec7(v: &[f64; 7]) -> Result<Self> {
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        let n = q.norm();
        if !(n > 1e-12) || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig("degenerate viewpoint vector".into()));
        }
        Ok(Viewpoint::new(Point3::new(v[0], v[1], v[2]), UnitQuaternion::new_normalize(q)))
    }

    /// Viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3 {
        self.orientation * Vector3::z()
    }

    pub fn is_valid(&self) -> bool {
        let q = self.orientation.quaternion();
        self.position.iter().all(|x| x.is_finite()) && (q.norm() - 1.0).abs() <= 1e-9
    }

    /// The same pose with the quaternion sign chosen so that `w >= 0`.
    pub fn canonical(&self) -> Self {
        let q = self.orientation.into_inner();
        if q.w < 0.0 {
            Viewpoint::new(self.position, UnitQuaternion::new_unchecked(-q))
        } else {
            *self
        }
    }
}

/// Pinhole intrinsics with square pixels; the vertical field of view
/// follows from the aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraIntrinsics {
    pub hfov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            hfov_deg: 70.25,
            width: 80,
            height: 45,
            max_range: 2.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::InvalidConfig("hfov must lie in (0, 180)".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("image must have at least one pixel".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidConfig("max range must be positive".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    pub fn vfov_deg(&self) -> f64 {
        2.0 * ((self.height as f64 / 2.0) / self.focal()).atan().to_degrees()
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Unnormalized camera-frame direction through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3 {
        let f = self.focal();
        Vector3::new(
            (u as f64 + 0.5 - self.width as f64 / 2.0) / f,
            (v as f64 + 0.5 - self.height as f64 / 2.0) / f,
            1.0,
        )
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    #[inline]
    pub fn project(&self, pc: &Vector3) -> Option<(f64, f64)> {
        if pc.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        Some((
            f * pc.x / pc.z + self.width as f64 / 2.0,
            f * pc.y / pc.z + self.height as f64 / 2.0,
        ))
    }

    /// Distance up to which a voxel of edge `resolution` whose center falls
    /// in a pixel is guaranteed to be crossed by that pixel's center ray.
    ///
    /// Carving farther than this could mark an occupied voxel free when the
    /// center ray slips past it.
    pub fn sound_range(&self, resolution: f64) -> f64 {
        resolution * self.focal() / std::f64::consts::SQRT_2 * (1.0 - 1e-9)
    }

    pub fn carve_range(&self, resolution: f64) -> f64 {
        self.max_range.min(self.sound_range(resolution))
    }
}

/// Sensor mounting and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Rigid offset from the planned body pose to the optical center, in the
    /// body frame.
    pub optical_offset: [f64; 3],
    pub depth_sigma: f64,
    /// Probability of dropping a pixel that sits on a depth discontinuity.
    pub edge_dropout: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            optical_offset: [0.0; 3],
            depth_sigma: 0.0,
            edge_dropout: 0.0,
        }
    }
}

impl SensorConfig {
    pub fn optical_pose(&self, body: &Viewpoint) -> Viewpoint {
        let off = Vector3::from(self.optical_offset);
        Viewpoint::new(body.position + body.orientation * off, body.orientation)
    }

    pub fn is_noisy(&self) -> bool {
        self.depth_sigma > 0.0 || self.edge_dropout > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_points_forward() {
        let v = Viewpoint::look_at(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0));
        assert!((v.forward() - Vector3::x()).norm() < 1e-12);
        // Image down is world down.
        assert!((v.orientation * Vector3::y() - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!(v.is_valid());
    }

    #[test]
    fn default_intrinsics() {
        let c = CameraIntrinsics::default();
        assert!((c.focal() - 56.86).abs() < 0.01);
        assert!(c.vfov_deg() < c.hfov_deg);
        assert!((c.sound_range(0.025) - 1.005).abs() < 0.002);
    }

    #[test]
    fn viewpoint_json_uses_wxyz() {
        let v = Viewpoint::new(Point3::new(1.0, 2.0, 3.0), UnitQuaternion::identity());
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"position":[1.0,2.0,3.0],"orientation":[1.0,0.0,0.0,0.0]}"#);
        let back: Viewpoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
