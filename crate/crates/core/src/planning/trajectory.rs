//! Degree-4 polynomial trajectories through a waypoint path.
//!
//! Each segment is fixed by its start position, velocity and acceleration
//! (inherited from the previous segment) plus its end position and a
//! prescribed end velocity. Position, velocity and acceleration are therefore
//! continuous at every knot. The end acceleration of a segment follows from
//! those five conditions:
//!
//! ```text
//! a1 = a0 + 6 (v0 + v1) / T - 12 (p1 - p0) / T²
//! ```
//!
//! Interior knot velocities are set from the cruise speed and the adjacent
//! leg directions, then shifted by the smallest correction that brings the
//! final acceleration to zero.

use serde::{Deserialize, Serialize};

use super::{Path, PlanError};
use crate::Vec3;

/// `p(τ) = Σ coeffs[k] τ^k` for `τ ∈ [0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub coeffs: [Vec3; 5],
    pub duration: f64,
}

impl TrajectorySegment {
    pub fn position(&self, tau: f64) -> Vec3 {
        let c = &self.coeffs;
        c[0] + (c[1] + (c[2] + (c[3] + c[4] * tau) * tau) * tau) * tau
    }

    pub fn velocity(&self, tau: f64) -> Vec3 {
        let c = &self.coeffs;
        c[1] + (c[2] * 2.0 + (c[3] * 3.0 + c[4] * (4.0 * tau)) * tau) * tau
    }

    pub fn acceleration(&self, tau: f64) -> Vec3 {
        let c = &self.coeffs;
        c[2] * 2.0 + (c[3] * 6.0 + c[4] * (12.0 * tau)) * tau
    }

    /// Segment from boundary conditions; see the module docs.
    pub fn from_boundary(p0: Vec3, v0: Vec3, a0: Vec3, p1: Vec3, v1: Vec3, duration: f64) -> Self {
        let t = duration;
        let r1 = p1 - p0 - v0 * t - a0 * (t * t / 2.0);
        let r2 = v1 - v0 - a0 * t;
        let c3 = (r1 * (4.0 / t) - r2) / (t * t);
        let c4 = (r2 * t - r1 * 3.0) / t.powi(4);
        Self { coeffs: [p0, v0, a0 / 2.0, c3, c4], duration }
    }

    fn retimed(&self, s: f64) -> Self {
        let mut coeffs = self.coeffs;
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c /= s.powi(k as i32);
        }
        Self { coeffs, duration: self.duration * s }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<TrajectorySegment>,
}

/// Largest position, velocity and acceleration jumps over all knots.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KnotMismatch {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl KnotMismatch {
    pub fn max(&self) -> f64 {
        self.position.max(self.velocity).max(self.acceleration)
    }
}

impl Trajectory {
    pub fn from_segments(segments: Vec<TrajectorySegment>) -> Self {
        Self { segments }
    }

    /// Holds `p` for `duration` seconds.
    pub fn hold(p: Vec3, duration: f64) -> Self {
        let z = Vec3::zeros();
        Self::from_segments(vec![TrajectorySegment { coeffs: [p, z, z, z, z], duration }])
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    fn locate(&self, t: f64) -> Option<(&TrajectorySegment, f64)> {
        let mut rest = t.max(0.0);
        let last = self.segments.len().checked_sub(1)?;
        for (i, s) in self.segments.iter().enumerate() {
            if rest <= s.duration || i == last {
                return Some((s, rest.min(s.duration)));
            }
            rest -= s.duration;
        }
        None
    }

    /// Position at time `t`, held at the ends.
    pub fn position(&self, t: f64) -> Option<Vec3> {
        self.locate(t).map(|(s, tau)| s.position(tau))
    }

    pub fn velocity(&self, t: f64) -> Option<Vec3> {
        if t > self.duration() {
            return self.segments.last().map(|_| Vec3::zeros());
        }
        self.locate(t).map(|(s, tau)| s.velocity(tau))
    }

    pub fn acceleration(&self, t: f64) -> Option<Vec3> {
        self.locate(t).map(|(s, tau)| s.acceleration(tau))
    }

    pub fn start(&self) -> Option<Vec3> {
        self.segments.first().map(|s| s.coeffs[0])
    }

    pub fn end(&self) -> Option<Vec3> {
        self.segments.last().map(|s| s.position(s.duration))
    }

    pub fn knot_mismatch(&self) -> KnotMismatch {
        let mut m = KnotMismatch::default();
        for w in self.segments.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            m.position = m.position.max((a.position(a.duration) - b.position(0.0)).norm());
            m.velocity = m.velocity.max((a.velocity(a.duration) - b.velocity(0.0)).norm());
            m.acceleration = m.acceleration.max((a.acceleration(a.duration) - b.acceleration(0.0)).norm());
        }
        m
    }

    /// Peak speed and acceleration magnitude, sampled.
    pub fn peaks(&self, samples_per_segment: usize) -> (f64, f64) {
        let n = samples_per_segment.max(2);
        let mut v: f64 = 0.0;
        let mut a: f64 = 0.0;
        for s in &self.segments {
            for k in 0..=n {
                let tau = s.duration * k as f64 / n as f64;
                v = v.max(s.velocity(tau).norm());
                a = a.max(s.acceleration(tau).norm());
            }
        }
        (v, a)
    }

    /// Slows the whole trajectory down by `s` (> 1 is slower).
    pub fn retimed(&self, s: f64) -> Self {
        Self { segments: self.segments.iter().map(|g| g.retimed(s)).collect() }
    }

    /// `(t, position)` every `dt` seconds, end included.
    pub fn sample(&self, dt: f64) -> Vec<(f64, Vec3)> {
        let total = self.duration();
        let mut out = Vec::new();
        if dt <= 0.0 {
            return out;
        }
        let n = (total / dt).floor() as usize;
        for k in 0..=n {
            let t = k as f64 * dt;
            out.extend(self.position(t).map(|p| (t, p)));
        }
        if (n as f64) * dt < total {
            out.extend(self.position(total).map(|p| (total, p)));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    /// Nominal speed along each leg, m/s.
    pub cruise_speed: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// Largest slow-down accepted before the dynamics are declared infeasible.
    pub max_time_scale: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { cruise_speed: 10.0, max_speed: 15.0, max_accel: 5.0, max_time_scale: 4.0 }
    }
}

const PEAK_SAMPLES: usize = 64;

pub fn build_trajectory(path: &Path, cfg: &TrajectoryConfig) -> Result<Trajectory, PlanError> {
    if !(cfg.cruise_speed > 0.0 && cfg.max_speed > 0.0 && cfg.max_accel > 0.0 && cfg.max_time_scale >= 1.0) {
        return Err(PlanError::BadConfig("speeds and acceleration must be positive, time scale at least 1"));
    }
    let mut pts: Vec<Vec3> = Vec::with_capacity(path.waypoints.len());
    for p in &path.waypoints {
        if pts.last().is_none_or(|q: &Vec3| (p - q).norm() > 1e-9) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return Err(PlanError::DegeneratePath);
    }
    let n = pts.len() - 1;
    let lens: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let dirs: Vec<Vec3> = pts.windows(2).zip(&lens).map(|(w, l)| (w[1] - w[0]) / *l).collect();
    let durations: Vec<f64> = lens
        .iter()
        .map(|l| (l / cfg.cruise_speed).max((12.0 * l / cfg.max_accel).sqrt()))
        .collect();

    let mut vel = vec![Vec3::zeros(); n + 1];
    for i in 1..n {
        vel[i] = (dirs[i - 1] + dirs[i]) * (cfg.cruise_speed / 2.0);
    }
    if n > 1 {
        // final acceleration is affine in the interior velocities with
        // gradient g_i = 6 (1/T_{i-1} + 1/T_i), identical on every axis
        let mut a_end = Vec3::zeros();
        for k in 0..n {
            let t = durations[k];
            a_end += (vel[k] + vel[k + 1]) * (6.0 / t) - (pts[k + 1] - pts[k]) * (12.0 / (t * t));
        }
        let g: Vec<f64> = (1..n).map(|i| 6.0 * (1.0 / durations[i - 1] + 1.0 / durations[i])).collect();
        let gg: f64 = g.iter().map(|x| x * x).sum();
        for (i, gi) in (1..n).zip(&g) {
            vel[i] -= a_end * (gi / gg);
        }
    }

    let mut segments = Vec::with_capacity(n);
    let mut a0 = Vec3::zeros();
    for k in 0..n {
        let s = TrajectorySegment::from_boundary(pts[k], vel[k], a0, pts[k + 1], vel[k + 1], durations[k]);
        a0 = s.acceleration(s.duration);
        segments.push(s);
    }
    let traj = Trajectory { segments };
    let (v, a) = traj.peaks(PEAK_SAMPLES);
    let needed = (v / cfg.max_speed).max((a / cfg.max_accel).sqrt());
    if needed <= 1.0 {
        return Ok(traj);
    }
    if needed > cfg.max_time_scale {
        return Err(PlanError::InfeasibleDynamics { needed, limit: cfg.max_time_scale });
    }
    // sampled peaks can miss the true maximum slightly
    Ok(traj.retimed(needed * 1.001))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_rest_to_rest_is_monotone() {
        let p = Path::new(vec![Vec3::new(0.0, 0.0, 5.0), Vec3::new(10.0, 0.0, 5.0)]);
        let t = build_trajectory(&p, &TrajectoryConfig::default()).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert!(t.velocity(0.0).unwrap().norm() < 1e-12);
        assert!(t.velocity(t.duration()).unwrap().norm() < 1e-9);
        let xs: Vec<f64> = t.sample(0.01).iter().map(|(_, p)| p.x).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!((t.end().unwrap() - Vec3::new(10.0, 0.0, 5.0)).norm() < 1e-9);
    }

    #[test]
    fn boundary_conditions_hold() {
        let s = TrajectorySegment::from_boundary(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(0.5, -1.0, 0.0),
            Vec3::new(0.1, 0.2, -0.3),
            Vec3::new(4.0, 0.0, 3.0),
            Vec3::new(1.0, 1.0, 1.0),
            2.5,
        );
        assert!((s.position(2.5) - Vec3::new(4.0, 0.0, 3.0)).norm() < 1e-12);
        assert!((s.velocity(2.5) - Vec3::new(1.0, 1.0, 1.0)).norm() < 1e-12);
        assert!((s.acceleration(0.0) - Vec3::new(0.1, 0.2, -0.3)).norm() < 1e-12);
        // end acceleration closed form
        let a1 = Vec3::new(0.1, 0.2, -0.3) + (Vec3::new(0.5, -1.0, 0.0) + Vec3::new(1.0, 1.0, 1.0)) * (6.0 / 2.5)
            - (Vec3::new(3.0, -2.0, 0.0)) * (12.0 / 6.25);
        assert!((s.acceleration(2.5) - a1).norm() < 1e-12);
    }

    #[test]
    fn l_shape_is_c2_and_ends_at_rest() {
        let p = Path::new(vec![Vec3::new(0.0, 0.0, 5.0), Vec3::new(20.0, 0.0, 5.0), Vec3::new(20.0, 20.0, 5.0)]);
        let t = build_trajectory(&p, &TrajectoryConfig::default()).unwrap();
        assert!(t.knot_mismatch().max() < 1e-6);
        assert!(t.acceleration(t.duration()).unwrap().norm() < 1e-9);
        assert!(t.velocity(t.duration()).unwrap().norm() < 1e-9);
    }

    #[test]
    fn retiming_scales_speed_and_accel() {
        let p = Path::new(vec![Vec3::zeros(), Vec3::new(30.0, 0.0, 0.0)]);
        let t = build_trajectory(&p, &TrajectoryConfig { max_accel: 100.0, ..Default::default() }).unwrap();
        let (v, a) = t.peaks(200);
        let r = t.retimed(2.0);
        let (v2, a2) = r.peaks(200);
        assert!((v2 - v / 2.0).abs() < 1e-9);
        assert!((a2 - a / 4.0).abs() < 1e-9);
        assert!((r.duration() - 2.0 * t.duration()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_limits_too_tight() {
        let p = Path::new(vec![Vec3::zeros(), Vec3::new(30.0, 0.0, 0.0), Vec3::new(30.0, 0.5, 0.0), Vec3::new(60.0, 0.5, 0.0)]);
        let cfg = TrajectoryConfig { cruise_speed: 14.0, max_speed: 1.0, max_time_scale: 1.5, ..Default::default() };
        assert!(matches!(build_trajectory(&p, &cfg), Err(PlanError::InfeasibleDynamics { .. })));
    }
}
