//! Path planning, trajectory generation and search patterns.

pub mod patterns;
pub mod rrt;
pub mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::WorldModel;
use crate::Vec3;

pub use patterns::{generate_pattern, PatternKind, Rect, SearchPatternSpec};
pub use rrt::{plan_path, plan_path_detailed, PlanOutcome, RrtConfig};
pub use trajectory::{build_trajectory, Trajectory, TrajectoryConfig, TrajectorySegment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no path: {0}")]
    NoPath(&'static str),
    #[error("path needs at least two distinct waypoints")]
    DegeneratePath,
    #[error("dynamics infeasible: needs time scale {needed:.2}, limit {limit:.2}")]
    InfeasibleDynamics { needed: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
}

/// Ordered waypoints and their total length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec3>,
    pub cost: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Vec3>) -> Self {
        let cost = polyline_length(&waypoints);
        Self { waypoints, cost }
    }

    /// Whether every leg is clear of obstacles by `clearance`.
    pub fn is_free(&self, world: &WorldModel, clearance: f64) -> bool {
        match self.waypoints.as_slice() {
            [] => true,
            [p] => world.point_free(p, clearance),
            w => w.windows(2).all(|s| world.segment_free(&s[0], &s[1], clearance)),
        }
    }
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
