use serde::{Deserialize, Serialize};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type UnitQuaternion = nalgebra::UnitQuaternion<f64>;
pub type Quaternion = nalgebra::Quaternion<f64>;

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Aabb { min, max }
    }

    /// Tight bound of a point set, `None` when empty.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut b = Aabb::new(first, first);
        for p in iter {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: &Point3) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(&other.min);
        b.include(&other.max);
        b
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        let d = Vector3::repeat(r);
        Aabb::new(self.min - d, self.max + d)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    /// Squared Euclidean distance from `p` to the box (zero inside).
    pub fn distance_sq(&self, p: &Point3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    /// Squared gap between two boxes (zero when they overlap).
    pub fn gap_sq(&self, other: &Aabb) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = (self.min[a] - other.max[a]).max(other.min[a] - self.max[a]).max(0.0);
            d2 += v * v;
        }
        d2
    }

    pub fn sphere_intersects(&self, center: &Point3, radius: f64) -> bool {
        self.distance_sq(center) < radius * radius
    }
}

/// Geodesic angle between two orientations, in radians within `[0, pi]`.
pub fn quat_angle(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let rel = a.inverse() * b;
    2.0 * rel.imag().norm().atan2(rel.w.abs())
}
