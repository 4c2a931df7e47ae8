//! Axis-aligned boxes, obstacles and the segment tests used for collision checking.

use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Axis-aligned bounding box in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: min.inf(&max),
            max: min.sup(&max),
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        p.sup(&self.min).inf(&self.max)
    }

    pub fn inflate(&self, margin: f64) -> Self {
        let m = Vec3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Slab test for the closed segment `a → b`.
    pub fn intersects_segment(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for i in 0..3 {
            if d[i].abs() < 1e-12 {
                if a[i] < self.min[i] || a[i] > self.max[i] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / d[i];
            let mut lo = (self.min[i] - a[i]) * inv;
            let mut hi = (self.max[i] - a[i]) * inv;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Static obstacle in the world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Obstacle {
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
}

impl Obstacle {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Obstacle::Sphere { center, radius }
    }

    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let b = Aabb::new(min, max);
        Obstacle::Box {
            min: b.min,
            max: b.max,
        }
    }

    /// Whether `p` lies inside the obstacle grown by `clearance`.
    pub fn contains(&self, p: &Vec3, clearance: f64) -> bool {
        match self {
            Obstacle::Sphere { center, radius } => (p - center).norm() <= radius + clearance,
            Obstacle::Box { min, max } => Aabb::new(*min, *max).inflate(clearance).contains(p),
        }
    }

    /// Whether the segment `a → b` touches the obstacle grown by `clearance`.
    ///
    /// Boxes are grown as boxes, so corners are slightly conservative.
    pub fn intersects_segment(&self, a: &Vec3, b: &Vec3, clearance: f64) -> bool {
        match self {
            Obstacle::Sphere { center, radius } => {
                segment_point_distance(a, b, center) <= radius + clearance
            }
            Obstacle::Box { min, max } => Aabb::new(*min, *max)
                .inflate(clearance)
                .intersects_segment(a, b),
        }
    }
}

/// Distance from `p` to the closed segment `a → b`.
pub fn segment_point_distance(a: &Vec3, b: &Vec3, p: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

/// Distance from `p` to a polyline. Returns infinity for an empty polyline.
pub fn polyline_point_distance(points: &[Vec3], p: &Vec3) -> f64 {
    match points {
        [] => f64::INFINITY,
        [only] => (p - only).norm(),
        _ => points
            .windows(2)
            .map(|w| segment_point_distance(&w[0], &w[1], p))
            .fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_segment_hits_and_misses() {
        let b = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        assert!(b.intersects_segment(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::new(5.0, 0.0, 0.0)));
        assert!(!b.intersects_segment(&Vec3::new(-5.0, 2.0, 0.0), &Vec3::new(5.0, 2.0, 0.0)));
        // segment that stops short of the box
        assert!(!b.intersects_segment(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::new(-1.5, 0.0, 0.0)));
        // axis-parallel segment fully inside
        assert!(b.intersects_segment(&Vec3::new(0.0, 0.0, -0.5), &Vec3::new(0.0, 0.0, 0.5)));
    }

    #[test]
    fn sphere_clearance_is_applied() {
        let s = Obstacle::sphere(Vec3::zeros(), 1.0);
        let a = Vec3::new(-3.0, 1.2, 0.0);
        let b = Vec3::new(3.0, 1.2, 0.0);
        assert!(!s.intersects_segment(&a, &b, 0.0));
        assert!(s.intersects_segment(&a, &b, 0.5));
        assert!(s.contains(&Vec3::new(0.0, 1.4, 0.0), 0.5));
    }

    #[test]
    fn polyline_distance() {
        let pts = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)];
        assert!((polyline_point_distance(&pts, &Vec3::new(5.0, 3.0, 0.0)) - 3.0).abs() < 1e-12);
        assert!((polyline_point_distance(&pts, &Vec3::new(13.0, 4.0, 0.0)) - 5.0).abs() < 1e-12);
    }
}
