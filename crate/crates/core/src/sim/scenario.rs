//! Mission scenario configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blend::BlendConfig;
use crate::geometry::{Aabb, Obstacle};
use crate::model::{DroneId, DroneNames, Victim, WorldModel};
use crate::planning::patterns::Rect;
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Ground area `[width, depth]`, meters, with its corner at the origin.
    pub area: [f64; 2],
    pub ceiling: f64,
    pub victims: usize,
    /// Fixed victim ground positions; drawn from `seed` when absent.
    pub victim_positions: Option<Vec<[f64; 2]>>,
    pub deadline: f64,
    pub drones: usize,
    /// Start pads; one per drone, spread along the near edge when absent.
    pub pads: Option<Vec<[f64; 3]>>,
    pub seed: u64,
    /// Ground footprint radius at `footprint_altitude`, scaling linearly with height.
    pub footprint_radius: f64,
    pub footprint_altitude: f64,
    /// Default flight and search altitude.
    pub altitude: f64,
    /// Fixed integration step, seconds.
    pub dt: f64,
    /// Flight time per charge, seconds.
    pub battery: f64,
    pub max_speed: f64,
    pub max_climb: f64,
    pub max_accel: f64,
    pub cruise_speed: f64,
    /// Speed along search patterns.
    pub search_speed: f64,
    pub pattern_spacing: f64,
    /// Side of the square a search command covers around the drone.
    pub search_block: f64,
    pub obstacles: Vec<Obstacle>,
    /// Where the operator stands; origin of pointing rays.
    pub operator: [f64; 3],
    pub names: DroneNames,
    pub fusion_window: f64,
    pub blend: BlendConfig,
    /// Seed of the operator's gesture templates.
    pub gesture_seed: u64,
    /// Seconds between drone telemetry events.
    pub telemetry_period: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area: [120.0, 120.0],
            ceiling: 60.0,
            victims: 6,
            victim_positions: None,
            deadline: 360.0,
            drones: 3,
            pads: None,
            seed: 0,
            footprint_radius: 15.0,
            footprint_altitude: 20.0,
            altitude: 20.0,
            dt: 0.05,
            battery: 1500.0,
            max_speed: 15.0,
            max_climb: 8.0,
            max_accel: 5.0,
            cruise_speed: 10.0,
            search_speed: 2.0,
            pattern_spacing: 15.0,
            search_block: 40.0,
            obstacles: Vec::new(),
            operator: [60.0, -5.0, 1.7],
            names: DroneNames::default(),
            fusion_window: 1.0,
            blend: BlendConfig::default(),
            gesture_seed: 7,
            telemetry_period: 0.25,
        }
    }
}

impl ScenarioConfig {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(Vec3::zeros(), Vec3::new(self.area[0], self.area[1], self.ceiling))
    }

    pub fn ground(&self) -> Rect {
        Rect::new(0.0, 0.0, self.area[0], self.area[1])
    }

    pub fn drone_ids(&self) -> Vec<DroneId> {
        (1..=self.drones as u32).map(DroneId).collect()
    }

    pub fn pad_positions(&self) -> Vec<Vec3> {
        match &self.pads {
            Some(p) => p.iter().map(|[x, y, z]| Vec3::new(*x, *y, *z)).collect(),
            None => (0..self.drones)
                .map(|i| Vec3::new(self.area[0] * (i as f64 + 1.0) / (self.drones as f64 + 1.0), 2.0, 0.0))
                .collect(),
        }
    }

    /// Footprint radius of a camera at height `z`.
    pub fn footprint_at(&self, z: f64) -> f64 {
        self.footprint_radius * z.max(0.0) / self.footprint_altitude
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        let positive = [
            self.area[0],
            self.area[1],
            self.ceiling,
            self.deadline,
            self.dt,
            self.footprint_radius,
            self.footprint_altitude,
            self.max_speed,
            self.max_climb,
            self.max_accel,
            self.cruise_speed,
            self.search_speed,
            self.pattern_spacing,
            self.search_block,
            self.fusion_window,
            self.telemetry_period,
            self.blend.workspace_radius,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("dimensions, speeds, times and radii must be positive");
        }
        if self.drones == 0 {
            return bad("at least one drone is required");
        }
        if self.drones > self.names.names.len() {
            return bad("more drones than entries in the name table");
        }
        if !(self.altitude > 0.0 && self.altitude <= self.ceiling) {
            return bad("altitude must lie in (0, ceiling]");
        }
        let bounds = self.bounds();
        if let Some(p) = &self.pads {
            if p.len() != self.drones {
                return bad("one pad per drone is required");
            }
        }
        if self.pad_positions().iter().any(|p| !bounds.contains(p)) {
            return bad("pads must lie inside the area");
        }
        if let Some(v) = &self.victim_positions {
            if v.len() != self.victims {
                return bad("victim_positions must list every victim");
            }
            if v.iter().any(|[x, y]| !bounds.contains(&Vec3::new(*x, *y, 0.0))) {
                return bad("victims must lie inside the area");
            }
        }
        Ok(())
    }

    /// World with victims placed, seeded by `seed` unless fixed.
    pub fn world(&self) -> WorldModel {
        let mut w = WorldModel::empty(self.bounds());
        w.obstacles = self.obstacles.clone();
        let positions: Vec<[f64; 2]> = match &self.victim_positions {
            Some(v) => v.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let margin = 2.0f64.min(self.area[0] / 4.0).min(self.area[1] / 4.0);
                let mut out = Vec::with_capacity(self.victims);
                let mut attempts = 0;
                while out.len() < self.victims {
                    let p = [
                        rng.random_range(margin..self.area[0] - margin),
                        rng.random_range(margin..self.area[1] - margin),
                    ];
                    attempts += 1;
                    // victims under an obstacle could never be seen
                    if attempts < 10_000 && !w.point_free(&Vec3::new(p[0], p[1], 0.0), 0.0) {
                        continue;
                    }
                    out.push(p);
                }
                out
            }
        };
        w.victims = positions
            .into_iter()
            .map(|[x, y]| Victim { position: Vec3::new(x, y, 0.0), found: false })
            .collect();
        w
    }
}

/// Reads a scenario from its interchange text; missing fields take defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ScenarioError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
