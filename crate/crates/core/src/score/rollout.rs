use crate::error::{Error, Result};
use crate::registration::{Belief, RegistrationConfig};
use crate::scene::{GroundTruth, SceneSpec};
use crate::sensor::{render_truth, CameraIntrinsics, SensorConfig, Viewpoint};

/// Access to the hidden scene for exact coverage labels.
#[derive(Debug, Clone)]
pub struct RolloutOracle {
    truth: GroundTruth,
    pub intr: CameraIntrinsics,
    pub reg: RegistrationConfig,
    pub sensor: SensorConfig,
}

impl RolloutOracle {
    pub fn new(spec: &SceneSpec, intr: CameraIntrinsics, reg: RegistrationConfig, sensor: SensorConfig) -> Self {
        RolloutOracle {
            truth: GroundTruth::new(spec),
            intr,
            reg,
            sensor,
        }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Coverage after observing from body pose `v`, leaving `belief` intact.
    pub fn label(&self, belief: &Belief, v: &Viewpoint, seed: u64) -> Result<f64> {
        if !v.is_valid() {
            return Err(Error::InfeasibleViewpoint);
        }
        let cam = self.sensor.optical_pose(v);
        let obs = match render_truth(&self.truth, &cam, &self.intr) {
            Err(Error::ViewpointInSolid) => return Err(Error::InfeasibleViewpoint),
            r => r?,
        };
        belief.preview_coverage(&obs, &self.intr, &self.reg, seed)
    }
}

/// One-shot rollout label: renders `v` on `spec` and returns the coverage
/// the belief would reach after integrating that view.
pub fn label_rollout(
    spec: &SceneSpec,
    belief: &Belief,
    v: &Viewpoint,
    intr: &CameraIntrinsics,
    reg: &RegistrationConfig,
    seed: u64,
) -> Result<f64> {
    RolloutOracle::new(spec, *intr, *reg, SensorConfig::default()).label(belief, v, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::scene::{Face, GridDims};
    use crate::sensor::render_depth;

    fn scene() -> SceneSpec {
        let dims = GridDims::new(8, 8, 8, 0.05, Point3::origin()).unwrap();
        let mut spec = SceneSpec::empty(dims, Face::NegX, Point3::new(-0.3, 0.2, 0.2));
        spec.push_voxel_object(vec![[4, 4, 1], [4, 4, 2], [5, 4, 1]]);
        spec
    }

    #[test]
    fn repeated_view_is_idempotent_and_monotone() {
        let spec = scene();
        let intr = CameraIntrinsics::default();
        let reg = RegistrationConfig::default();
        let v = Viewpoint::look_at(Point3::new(-0.1, 0.2, 0.3), Point3::new(0.2, 0.2, 0.1));
        let mut b = Belief::new(spec.dims, reg.eta);
        let first = label_rollout(&spec, &b, &v, &intr, &reg, 1).unwrap();
        assert!(first >= b.coverage());
        let obs = render_depth(&spec, &v, &intr).unwrap();
        b.integrate(&obs, &intr, &reg, 1).unwrap();
        assert_eq!(b.coverage(), first);
        let again = label_rollout(&spec, &b, &v, &intr, &reg, 1).unwrap();
        assert_eq!(again, b.coverage());
    }

    #[test]
    fn solid_viewpoint_is_infeasible() {
        let spec = scene();
        let b = Belief::new(spec.dims, 0.05);
        let v = Viewpoint::look_at(Point3::new(0.225, 0.225, 0.075), Point3::new(0.0, 0.2, 0.1));
        let r = label_rollout(&spec, &b, &v, &CameraIntrinsics::default(), &RegistrationConfig::default(), 0);
        assert!(matches!(r, Err(Error::InfeasibleViewpoint)));
    }
}
