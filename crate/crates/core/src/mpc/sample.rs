use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Quaternion, UnitQuaternion};
use crate::motion::CollisionModel;
use crate::rng::Rng;
use crate::sensor::Viewpoint;

/// Diagonal Gaussian over `[px, py, pz, qw, qx, qy, qz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian7 {
    pub mean: [f64; 7],
    pub sigma: [f64; 7],
}

/// Where candidate viewpoints come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Proposal {
    /// Uniform position over the sampling bounds, uniform orientation.
    Uniform,
    Gaussian(Gaussian7),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub viewpoints: Vec<Viewpoint>,
    pub attempts: usize,
    /// Set when the attempt budget ran out before `n` samples were accepted.
    pub exhausted: bool,
}

/// Attempt budget for `n` requested samples.
pub fn attempt_budget(n: usize) -> usize {
    100 * n + 1000
}

pub fn uniform_orientation(rng: &mut Rng) -> UnitQuaternion {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let q = Quaternion::new(g[0], g[1], g[2], g[3]);
        if q.norm() > 1e-6 {
            return UnitQuaternion::new_normalize(q);
        }
    }
}

fn draw(m: &CollisionModel, dist: &Proposal, rng: &mut Rng) -> Option<Viewpoint> {
    match dist {
        Proposal::Uniform => {
            let b = m.sampling_bounds();
            let p = Point3::new(
                rng.random_range(b.min.x..=b.max.x),
                rng.random_range(b.min.y..=b.max.y),
                rng.random_range(b.min.z..=b.max.z),
            );
            Some(Viewpoint::new(p, uniform_orientation(rng)))
        }
        Proposal::Gaussian(g) => {
            let mut v = [0.0; 7];
            for d in 0..7 {
                let z: f64 = StandardNormal.sample(rng);
                v[d] = g.mean[d] + g.sigma[d] * z;
            }
            Viewpoint::from_vec7(&v).ok()
        }
    }
}

/// Draws from `dist` until `n` candidates pass the feasibility predicate or
/// the attempt budget is spent. Fails only when nothing was accepted.
pub fn sample_feasible(m: &CollisionModel, dist: &Proposal, n: usize, rng: &mut Rng) -> Result<Samples> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let budget = attempt_budget(n);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < budget {
        attempts += 1;
        if let Some(v) = draw(m, dist, rng) {
            if m.is_free(&v) {
                out.push(v);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoFeasibleSamples { attempts });
    }
    Ok(Samples {
        exhausted: out.len() < n,
        viewpoints: out,
        attempts,
    })
}

/// Floor on fitted standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Per-dimension mean and sample standard deviation of the elites. Each
/// quaternion is first flipped into the hemisphere of the first elite; the
/// mean quaternion is renormalized.
pub fn fit_distribution(elites: &[Viewpoint]) -> Result<Gaussian7> {
    if elites.len() < 2 {
        return Err(Error::EmptyInput("elites (need at least 2)"));
    }
    let q0 = elites[0].orientation.into_inner();
    let rows: Vec<[f64; 7]> = elites
        .iter()
        .map(|v| {
            let mut r = v.to_vec7();
            if v.orientation.into_inner().dot(&q0) < 0.0 {
                for x in &mut r[3..] {
                    *x = -*x;
                }
            }
            r
        })
        .collect();
    let n = rows.len() as f64;
    let mut mean = [0.0; 7];
    for r in &rows {
        for d in 0..7 {
            mean[d] += r[d];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sigma = [0.0; 7];
    for r in &rows {
        for d in 0..7 {
            sigma[d] += (r[d] - mean[d]).powi(2);
        }
    }
    for s in &mut sigma {
        *s = (*s / (n - 1.0)).sqrt().max(SIGMA_FLOOR);
    }
    let qn = mean[3..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if qn > 1e-12 {
        mean[3..].iter_mut().for_each(|x| *x /= qn);
    } else {
        mean[3..].copy_from_slice(&rows[0][3..]);
    }
    Ok(Gaussian7 { mean, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{build_collision_model, MotionConfig, Workspace};
    use crate::registration::InstanceStore;
    use crate::rng;
    use crate::scene::{BeliefGrid, Face, GridDims};

    fn fresh_model() -> CollisionModel {
        let dims = GridDims::new(12, 12, 8, 0.05, Point3::origin()).unwrap();
        let ws = Workspace {
            dims,
            opening: Face::NegX,
            base: Point3::new(-0.3, 0.3, 0.2),
        };
        build_collision_model(&BeliefGrid::unknown(dims), &InstanceStore::new(&dims, 0.05), &ws, &MotionConfig::default())
    }

    #[test]
    fn uniform_samples_on_fresh_grid_stay_in_staging() {
        let m = fresh_model();
        let s = sample_feasible(&m, &Proposal::Uniform, 200, &mut rng::from_seed(4)).unwrap();
        assert_eq!(s.viewpoints.len(), 200);
        assert!(!s.exhausted);
        for v in &s.viewpoints {
            assert!(m.staging.contains(&v.position));
            assert!((v.orientation.quaternion().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_gaussian_returns_mean() {
        let m = fresh_model();
        let mu = Viewpoint::look_at(Point3::new(-0.2, 0.3, 0.2), Point3::new(0.3, 0.3, 0.2));
        let g = Gaussian7 {
            mean: mu.to_vec7(),
            sigma: [0.0; 7],
        };
        let s = sample_feasible(&m, &Proposal::Gaussian(g), 5, &mut rng::from_seed(1)).unwrap();
        for v in &s.viewpoints {
            assert_eq!(v.position, mu.position);
            assert!(v.orientation.angle_to(&mu.orientation) < 1e-12);
        }
    }

    #[test]
    fn infeasible_gaussian_fails() {
        let m = fresh_model();
        let g = Gaussian7 {
            mean: [0.3, 0.3, 0.2, 1.0, 0.0, 0.0, 0.0],
            sigma: [0.0; 7],
        };
        let r = sample_feasible(&m, &Proposal::Gaussian(g), 3, &mut rng::from_seed(1));
        assert!(matches!(r, Err(Error::NoFeasibleSamples { .. })));
    }

    #[test]
    fn fit_handles_identity_midpoint_and_double_cover() {
        let v = Viewpoint::look_at(Point3::new(0.1, 0.2, 0.3), Point3::new(1.0, 0.0, 0.0));
        let g = fit_distribution(&[v, v, v]).unwrap();
        for d in 0..7 {
            assert!((g.mean[d] - v.to_vec7()[d]).abs() < 1e-12);
            assert_eq!(g.sigma[d], SIGMA_FLOOR);
        }
        let a = Viewpoint::new(Point3::new(0.0, 0.0, 0.0), v.orientation);
        let b = Viewpoint::new(Point3::new(1.0, 2.0, -2.0), UnitQuaternion::new_unchecked(-v.orientation.into_inner()));
        let g = fit_distribution(&[a, b]).unwrap();
        assert_eq!(&g.mean[..3], &[0.5, 1.0, -1.0]);
        let q = v.orientation.quaternion();
        for (m, e) in g.mean[3..].iter().zip([q.w, q.i, q.j, q.k]) {
            assert!((m - e).abs() < 1e-12);
        }
        assert!(fit_distribution(&[v]).is_err());
    }
}
