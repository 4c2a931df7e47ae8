//! RRT* in a bounded 3D world with sphere and box obstacles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Path, PlanError};
use crate::model::WorldModel;
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtConfig {
    pub iterations: usize,
    /// Steering step, meters.
    pub step: f64,
    pub goal_bias: f64,
    /// Rewire radius constant: r = max(step, gamma * (ln n / n)^(1/3)).
    pub gamma: f64,
    pub seed: u64,
    /// Distance kept from obstacles, meters.
    pub clearance: f64,
    /// Iterations between best-cost records.
    pub checkpoint_every: usize,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            step: 1.0,
            goal_bias: 0.05,
            gamma: 10.0,
            seed: 0,
            clearance: 0.5,
            checkpoint_every: 250,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    p: Vec3,
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    /// Shortcut-smoothed path.
    pub path: Path,
    /// Best tree path before smoothing.
    pub raw: Path,
    /// `(iteration, best cost)`, infinity until the goal is reached.
    pub history: Vec<(usize, f64)>,
    pub nodes: usize,
}

fn rewire_radius(cfg: &RrtConfig, n: usize) -> f64 {
    let n = n.max(2) as f64;
    cfg.step.max(cfg.gamma * (n.ln() / n).powf(1.0 / 3.0))
}

fn propagate(nodes: &mut [Node], root: usize, delta: f64) {
    let mut stack = nodes[root].children.clone();
    while let Some(i) = stack.pop() {
        nodes[i].cost -= delta;
        stack.extend(nodes[i].children.iter().copied());
    }
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest visible one.
pub fn shortcut(points: &[Vec3], world: &WorldModel, clearance: f64) -> Vec<Vec3> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 && !world.segment_free(&points[i], &points[j], clearance) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

pub fn plan_path_detailed(start: Vec3, goal: Vec3, world: &WorldModel, cfg: &RrtConfig) -> Result<PlanOutcome, PlanError> {
    if !(cfg.step > 0.0 && (0.0..=1.0).contains(&cfg.goal_bias) && cfg.gamma > 0.0) {
        return Err(PlanError::BadConfig("step and gamma must be positive, goal bias in [0, 1]"));
    }
    if !world.point_free(&start, cfg.clearance) {
        return Err(PlanError::NoPath("start is in collision or out of bounds"));
    }
    if !world.point_free(&goal, cfg.clearance) {
        return Err(PlanError::NoPath("goal is in collision or out of bounds"));
    }
    if (goal - start).norm() < 1e-12 {
        let p = Path { waypoints: vec![start], cost: 0.0 };
        return Ok(PlanOutcome { path: p.clone(), raw: p, history: vec![(0, 0.0)], nodes: 1 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nodes = vec![Node { p: start, parent: None, cost: 0.0, children: Vec::new() }];
    let mut goal_nodes: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let (lo, hi) = (world.bounds.min, world.bounds.max);
    let best = |nodes: &[Node], goal_nodes: &[usize]| {
        goal_nodes.iter().map(|&g| nodes[g].cost).fold(f64::INFINITY, f64::min)
    };

    for it in 1..=cfg.iterations {
        let sample = if rng.random_bool(cfg.goal_bias) {
            goal
        } else {
            Vec3::new(
                rng.random_range(lo.x..=hi.x),
                rng.random_range(lo.y..=hi.y),
                rng.random_range(lo.z..=hi.z),
            )
        };
        let (nearest, d) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n.p - sample).norm()))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        if d > 1e-12 {
            let new_p = if d <= cfg.step { sample } else { nodes[nearest].p + (sample - nodes[nearest].p) * (cfg.step / d) };
            if world.point_free(&new_p, cfg.clearance) && world.segment_free(&nodes[nearest].p, &new_p, cfg.clearance) {
                let r = rewire_radius(cfg, nodes.len() + 1);
                let near: Vec<usize> = (0..nodes.len()).filter(|&i| (nodes[i].p - new_p).norm() <= r).collect();
                let mut parent = nearest;
                let mut cost = nodes[nearest].cost + (new_p - nodes[nearest].p).norm();
                for &i in &near {
                    let c = nodes[i].cost + (new_p - nodes[i].p).norm();
                    if c < cost && world.segment_free(&nodes[i].p, &new_p, cfg.clearance) {
                        parent = i;
                        cost = c;
                    }
                }
                let id = nodes.len();
                nodes.push(Node { p: new_p, parent: Some(parent), cost, children: Vec::new() });
                nodes[parent].children.push(id);
                for &i in &near {
                    if i == parent {
                        continue;
                    }
                    let c = cost + (nodes[i].p - new_p).norm();
                    if c < nodes[i].cost - 1e-12 && world.segment_free(&new_p, &nodes[i].p, cfg.clearance) {
                        let old = nodes[i].parent.expect("only the root has no parent");
                        nodes[old].children.retain(|&k| k != i);
                        nodes[i].parent = Some(id);
                        nodes[id].children.push(i);
                        let delta = nodes[i].cost - c;
                        nodes[i].cost = c;
                        propagate(&mut nodes, i, delta);
                    }
                }
                if (new_p - goal).norm() < 1e-12 {
                    goal_nodes.push(id);
                }
            }
        }
        if cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 {
            history.push((it, best(&nodes, &goal_nodes)));
        }
    }
    if history.last().is_none_or(|(i, _)| *i != cfg.iterations) {
        history.push((cfg.iterations, best(&nodes, &goal_nodes)));
    }

    let Some(&g) = goal_nodes.iter().min_by(|a, b| nodes[**a].cost.total_cmp(&nodes[**b].cost)) else {
        return Err(PlanError::NoPath("goal not reached within the iteration budget"));
    };
    let mut chain = vec![nodes[g].p];
    let mut cur = g;
    while let Some(p) = nodes[cur].parent {
        chain.push(nodes[p].p);
        cur = p;
    }
    chain.reverse();
    let raw = Path::new(chain);
    let path = Path::new(shortcut(&raw.waypoints, world, cfg.clearance));
    Ok(PlanOutcome { path, raw, history, nodes: nodes.len() })
}

/// Lowest-cost RRT* path from `start` to `goal`, shortcut-smoothed.
pub fn plan_path(start: Vec3, goal: Vec3, world: &WorldModel, cfg: &RrtConfig) -> Result<Path, PlanError> {
    plan_path_detailed(start, goal, world, cfg).map(|o| o.path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Obstacle};

    fn world() -> WorldModel {
        WorldModel::empty(Aabb::new(Vec3::new(-5.0, -5.0, 0.0), Vec3::new(15.0, 5.0, 10.0)))
    }

    #[test]
    fn goal_equal_start_is_single_waypoint() {
        let p = plan_path(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, 5.0), &world(), &RrtConfig::default()).unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn goal_in_obstacle_is_no_path() {
        let mut w = world();
        w.obstacles.push(Obstacle::sphere(Vec3::new(10.0, 0.0, 5.0), 1.0));
        let r = plan_path(Vec3::new(0.0, 0.0, 5.0), Vec3::new(10.0, 0.0, 5.0), &w, &RrtConfig::default());
        assert!(matches!(r, Err(PlanError::NoPath(_))));
    }

    #[test]
    fn tree_costs_stay_consistent_with_parents() {
        // small run; inspect the raw path costs against its geometry
        let cfg = RrtConfig { iterations: 800, ..Default::default() };
        let mut w = world();
        w.obstacles.push(Obstacle::cuboid(Vec3::new(4.0, -5.0, 0.0), Vec3::new(6.0, 2.0, 10.0)));
        let o = plan_path_detailed(Vec3::new(0.0, 0.0, 5.0), Vec3::new(10.0, 0.0, 5.0), &w, &cfg).unwrap();
        let last = o.history.last().unwrap().1;
        assert!((last - o.raw.cost).abs() < 1e-9, "{last} vs {}", o.raw.cost);
        assert!(o.path.is_free(&w, cfg.clearance));
        assert!(o.path.cost <= o.raw.cost + 1e-9);
    }
}
