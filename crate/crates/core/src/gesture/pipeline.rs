//! Signal conditioning for arm-motion traces: noise removal, arc-length
//! resampling and sensor→world rotation with gravity compensation.

use nalgebra::{Quaternion, UnitQuaternion};

use super::GestureError;
use crate::model::{ImuSample, MotionTrace};
use crate::Vec3;

/// Standard gravity, pointing up along world z as the accelerometer sees it at rest.
pub const GRAVITY: f64 = 9.81;

pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, GRAVITY)
}

pub fn quat(sample: &ImuSample) -> UnitQuaternion<f64> {
    let [w, x, y, z] = sample.orientation;
    UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
}

/// Checks the structural invariants of a trace.
pub fn validate(trace: &MotionTrace) -> Result<(), GestureError> {
    if trace.samples.len() < 2 {
        return Err(GestureError::DegenerateTrace("fewer than two samples"));
    }
    for (i, s) in trace.samples.iter().enumerate() {
        let finite = s.t.is_finite()
            && s.accel.iter().all(|v| v.is_finite())
            && s.orientation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(GestureError::InvalidSample { index: i, reason: "non-finite value" });
        }
        let n = s.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(GestureError::InvalidSample { index: i, reason: "orientation is not a unit quaternion" });
        }
        if i > 0 && s.t <= trace.samples[i - 1].t {
            return Err(GestureError::InvalidSample { index: i, reason: "timestamps not strictly increasing" });
        }
    }
    Ok(())
}

/// Drops every sample whose acceleration differs from the preceding raw
/// sample by less than `epsilon`. The first sample is always kept.
pub fn denoise(trace: &MotionTrace, epsilon: f64) -> Result<MotionTrace, GestureError> {
    let samples = &trace.samples;
    let mut kept = Vec::with_capacity(samples.len());
    if let Some(first) = samples.first() {
        kept.push(*first);
    }
    for w in samples.windows(2) {
        if (w[1].accel - w[0].accel).norm() >= epsilon {
            kept.push(w[1]);
        }
    }
    if kept.len() < 2 {
        return Err(GestureError::DegenerateTrace("fewer than two samples survive denoising"));
    }
    Ok(MotionTrace { samples: kept })
}

/// `m` points equally spaced along the acceleration polyline, with the
/// orientation at each point slerped from the bracketing samples.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub points: Vec<Vec3>,
    pub orientations: Vec<UnitQuaternion<f64>>,
}

pub fn resample(trace: &MotionTrace, m: usize) -> Result<Resampled, GestureError> {
    let s = &trace.samples;
    if s.len() < 2 {
        return Err(GestureError::DegenerateTrace("fewer than two samples"));
    }
    if m < 2 {
        return Err(GestureError::BadConfig("resample count must be at least 2"));
    }
    let mut cumulative = Vec::with_capacity(s.len());
    cumulative.push(0.0);
    for w in s.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (w[1].accel - w[0].accel).norm());
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return Err(GestureError::DegenerateTrace("zero arc length"));
    }

    let mut points = Vec::with_capacity(m);
    let mut orientations = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        if k == m - 1 {
            let last = s.last().unwrap();
            points.push(last.accel);
            orientations.push(quat(last));
            break;
        }
        let target = total * k as f64 / (m - 1) as f64;
        while seg + 1 < s.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let u = if len > 0.0 {
            ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (&s[seg], &s[seg + 1]);
        points.push(a.accel + (b.accel - a.accel) * u);
        let (qa, qb) = (quat(a), quat(b));
        orientations.push(qa.try_slerp(&qb, u, 1e-12).unwrap_or(qa));
    }
    Ok(Resampled { points, orientations })
}

/// Rotates each point into the world frame and removes gravity.
pub fn to_world_frame(points: &[Vec3], orientations: &[UnitQuaternion<f64>]) -> Vec<Vec3> {
    debug_assert_eq!(points.len(), orientations.len());
    let g = gravity();
    points
        .iter()
        .zip(orientations)
        .map(|(a, q)| q * a - g)
        .collect()
}

/// Euclidean distance between two point sequences of equal length.
pub fn distance(a: &[Vec3], b: &[Vec3]) -> Result<f64, GestureError> {
    if a.len() != b.len() {
        return Err(GestureError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm_squared())
        .sum::<f64>()
        .sqrt())
}

/// Normalized sum of the unit directions of the points; zero if undefined.
pub fn mean_orientation(points: &[Vec3]) -> Vec3 {
    let sum: Vec3 = points
        .iter()
        .filter(|p| p.norm() > 1e-12)
        .map(|p| p.normalize())
        .sum();
    let n = sum.norm();
    if n > 1e-12 {
        sum / n
    } else {
        Vec3::zeros()
    }
}
