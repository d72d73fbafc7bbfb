use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::collision::{CollisionModel, MotionConfig};
use crate::error::{Error, Result};
use crate::geometry::{quat_angle, Point3, UnitQuaternion, Vector3};
use crate::rng;
use crate::sensor::Viewpoint;

/// A piecewise-linear camera path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Viewpoint>,
    /// Identifies the collision model the path was planned against.
    pub stamp: u64,
}

impl Path {
    pub fn start(&self) -> &Viewpoint {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &Viewpoint {
        self.waypoints.last().expect("paths have at least two waypoints")
    }

    /// The path resampled so that consecutive positions are at most `step`
    /// apart; orientations are slerped within each segment.
    pub fn densify(&self, step: f64) -> Vec<Viewpoint> {
        let mut out = vec![self.waypoints[0]];
        for w in self.waypoints.windows(2) {
            let n = segment_samples(&w[0].position, &w[1].position, step);
            for s in 1..=n {
                out.push(interpolate(&w[0], &w[1], s as f64 / n as f64));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn segment_samples(a: &Point3, b: &Point3, step: f64) -> usize {
    ((b - a).norm() / step).ceil().max(1.0) as usize
}

fn interpolate(a: &Viewpoint, b: &Viewpoint, t: f64) -> Viewpoint {
    let p = a.position + (b.position - a.position) * t;
    let q = a.orientation.try_slerp(&b.orientation, t, 1e-12).unwrap_or(if t < 0.5 { a.orientation } else { b.orientation });
    Viewpoint::new(p, q)
}

/// Maximum gap between collision checks along a segment.
fn check_step(m: &CollisionModel) -> f64 {
    m.dims.resolution / 4.0
}

/// Gap used by the audit validator; every validator sample is also a
/// planner sample.
pub fn validation_step(m: &CollisionModel) -> f64 {
    m.dims.resolution / 2.0
}

fn segment_clear(m: &CollisionModel, a: &Point3, b: &Point3) -> bool {
    // Twice the validator's sample count, so its samples are a subset.
    let n = 2 * segment_samples(a, b, validation_step(m));
    debug_assert!((b - a).norm() / n as f64 <= check_step(m) + 1e-12);
    (0..=n).all(|s| {
        let t = s as f64 / n as f64;
        m.is_free_position(&(a + (b - a) * t))
    })
}

/// Plans a collision-free path between two feasible poses: the straight
/// segment if it is clear, otherwise an RRT over positions followed by
/// greedy shortcutting. Orientation is slerped along the path by arc length.
pub fn plan_path(from: &Viewpoint, to: &Viewpoint, m: &CollisionModel, cfg: &MotionConfig, seed: u64) -> Result<Path> {
    if !m.is_free(from) || !m.is_free(to) {
        return Err(Error::InfeasibleViewpoint);
    }
    let positions = if segment_clear(m, &from.position, &to.position) {
        vec![from.position, to.position]
    } else {
        let raw = rrt(&from.position, &to.position, m, cfg, seed)?;
        shortcut(&raw, m)
    };
    let path = Path {
        waypoints: orient(&positions, from, to),
        stamp: seed,
    };
    validate_path(&path, m).map_err(|e| Error::Planning(format!("post-validation failed: {e}")))?;
    Ok(path)
}

fn orient(positions: &[Point3], from: &Viewpoint, to: &Viewpoint) -> Vec<Viewpoint> {
    let total: f64 = positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(positions.len());
    for (i, p) in positions.iter().enumerate() {
        if i > 0 {
            acc += (positions[i] - positions[i - 1]).norm();
        }
        let q = if i == 0 {
            from.orientation
        } else if i + 1 == positions.len() {
            to.orientation
        } else {
            interpolate(from, to, if total > 0.0 { acc / total } else { 1.0 }).orientation
        };
        out.push(Viewpoint::new(*p, q));
    }
    if out.len() == 1 {
        out.push(*to);
    }
    out
}

fn rrt(start: &Point3, goal: &Point3, m: &CollisionModel, cfg: &MotionConfig, seed: u64) -> Result<Vec<Point3>> {
    let mut rng = rng::stream(seed, 0x0447);
    let bounds = m.sampling_bounds();
    let mut nodes = vec![*start];
    let mut parent = vec![usize::MAX];
    for _ in 0..cfg.rrt_budget {
        let target = if rng.random::<f64>() < cfg.goal_bias {
            *goal
        } else {
            Point3::new(
                rng.random_range(bounds.min.x..=bounds.max.x),
                rng.random_range(bounds.min.y..=bounds.max.y),
                rng.random_range(bounds.min.z..=bounds.max.z),
            )
        };
        let (near, d2) = nodes
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - target).norm_squared()))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        let d = d2.sqrt();
        let new = if d <= cfg.rrt_step {
            target
        } else {
            nodes[near] + (target - nodes[near]) * (cfg.rrt_step / d)
        };
        if !segment_clear(m, &nodes[near], &new) {
            continue;
        }
        nodes.push(new);
        parent.push(near);
        let last = nodes.len() - 1;
        if (goal - new).norm() <= cfg.rrt_step && segment_clear(m, &new, goal) {
            let mut chain = vec![*goal];
            let mut i = last;
            while i != usize::MAX {
                chain.push(nodes[i]);
                i = parent[i];
            }
            chain.reverse();
            return Ok(chain);
        }
    }
    Err(Error::Planning(format!("no path within {} samples", cfg.rrt_budget)))
}

/// From each kept waypoint, jump to the farthest later waypoint reachable by
/// a clear straight segment.
fn shortcut(points: &[Point3], m: &CollisionModel) -> Vec<Point3> {
    let mut out = vec![points[0]];
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = points.len() - 1;
        while j > i + 1 && !segment_clear(m, &points[i], &points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

/// Where a path first leaves free space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathViolation {
    pub segment: usize,
    pub position: [f64; 3],
}

impl std::fmt::Display for PathViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = self.position;
        write!(f, "segment {} blocked at ({:.4}, {:.4}, {:.4})", self.segment, p[0], p[1], p[2])
    }
}

/// Audits a path by dense interpolation at [`validation_step`]: every
/// sample must satisfy the feasibility predicate.
pub fn validate_path(path: &Path, m: &CollisionModel) -> std::result::Result<(), PathViolation> {
    if path.waypoints.len() < 2 {
        return Err(PathViolation {
            segment: 0,
            position: [f64::NAN; 3],
        });
    }
    let step = validation_step(m);
    for (s, w) in path.waypoints.windows(2).enumerate() {
        let (a, b) = (w[0].position, w[1].position);
        let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            let p = a + (b - a) * (k as f64 / n as f64);
            if !m.is_free_position(&p) {
                return Err(PathViolation {
                    segment: s,
                    position: [p.x, p.y, p.z],
                });
            }
        }
    }
    Ok(())
}

/// `(cspace, workspace)` lengths: positional length plus `lambda` times the
/// rotation angle, and positional length alone.
pub fn path_distances(path: &Path, lambda: f64) -> (f64, f64) {
    let mut cspace = 0.0;
    let mut work = 0.0;
    for w in path.waypoints.windows(2) {
        let d = (w[1].position - w[0].position).norm();
        work += d;
        cspace += d + lambda * quat_angle(&w[0].orientation, &w[1].orientation);
    }
    (cspace, work)
}

/// The pose actually reached at the end of `path` under execution noise.
pub fn execute_with_noise(path: &Path, cfg: &MotionConfig, seed: u64) -> Viewpoint {
    let target = *path.end();
    if cfg.sigma_pos == 0.0 && cfg.sigma_ang == 0.0 {
        return target;
    }
    let mut rng = rng::stream(seed, 0xE8EC);
    let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
    let dp = Vector3::new(g(), g(), g()) * cfg.sigma_pos;
    let w = Vector3::new(g(), g(), g()) * cfg.sigma_ang;
    let q = UnitQuaternion::from_scaled_axis(w) * target.orientation;
    Viewpoint::new(target.position + dp, q)
}

/// Whether an executed pose is close enough to the planned one.
pub fn within_tolerance(real: &Viewpoint, planned: &Viewpoint, cfg: &MotionConfig) -> bool {
    (real.position - planned.position).norm() <= cfg.eps_pos
        && quat_angle(&real.orientation, &planned.orientation) <= cfg.eps_ang_deg.to_radians()
}
