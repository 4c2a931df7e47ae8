use hawk_core::geometry::{Aabb, Obstacle};
use hawk_core::model::WorldModel;
use hawk_core::planning::patterns::expanding_leg_lengths;
use hawk_core::planning::{
    build_trajectory, generate_pattern, plan_path, plan_path_detailed, Path, PatternKind, PlanError, Rect, RrtConfig,
    SearchPatternSpec, TrajectoryConfig,
};
use hawk_core::Vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn open_world() -> WorldModel {
    WorldModel::empty(Aabb::new(Vec3::new(-20.0, -20.0, 0.0), Vec3::new(30.0, 20.0, 20.0)))
}

fn cluttered(seed: u64) -> WorldModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = WorldModel::empty(Aabb::new(Vec3::zeros(), Vec3::new(60.0, 60.0, 30.0)));
    for _ in 0..8 {
        let c = Vec3::new(rng.random_range(12.0..48.0), rng.random_range(12.0..48.0), rng.random_range(0.0..30.0));
        w.obstacles.push(Obstacle::sphere(c, rng.random_range(2.0..6.0)));
    }
    w
}

#[test]
fn straight_shot_in_empty_world_is_near_optimal() {
    for seed in 0..20 {
        let cfg = RrtConfig { seed, ..RrtConfig::default() };
        let p = plan_path(Vec3::new(0.0, 0.0, 5.0), Vec3::new(10.0, 0.0, 5.0), &open_world(), &cfg).unwrap();
        assert!(p.cost <= 10.5, "seed {seed}: {}", p.cost);
    }
}

#[test]
fn wall_forces_a_detour_around_it() {
    let mut w = WorldModel::empty(Aabb::new(Vec3::zeros(), Vec3::new(50.0, 50.0, 30.0)));
    w.obstacles.push(Obstacle::cuboid(Vec3::new(20.0, 0.0, 0.0), Vec3::new(30.0, 40.0, 30.0)));
    let cfg = RrtConfig { step: 2.0, seed: 1, ..RrtConfig::default() };
    let p = plan_path(Vec3::new(5.0, 5.0, 10.0), Vec3::new(45.0, 5.0, 10.0), &w, &cfg).unwrap();
    assert!(p.is_free(&w, cfg.clearance));
    assert!(p.waypoints.iter().any(|q| q.y > 40.0));
    // the way round the wall end is at least this long
    let lower = (Vec3::new(20.0, 40.0, 10.0) - Vec3::new(5.0, 5.0, 10.0)).norm() + 10.0 + (Vec3::new(45.0, 5.0, 10.0) - Vec3::new(30.0, 40.0, 10.0)).norm();
    assert!(p.cost >= lower - 1e-6);
}

#[test]
fn sealed_goal_has_no_path() {
    let mut w = WorldModel::empty(Aabb::new(Vec3::zeros(), Vec3::new(50.0, 50.0, 30.0)));
    w.obstacles.push(Obstacle::cuboid(Vec3::new(20.0, -1.0, -1.0), Vec3::new(30.0, 51.0, 31.0)));
    let cfg = RrtConfig { iterations: 800, ..RrtConfig::default() };
    let r = plan_path(Vec3::new(5.0, 5.0, 10.0), Vec3::new(45.0, 5.0, 10.0), &w, &cfg);
    assert!(matches!(r, Err(PlanError::NoPath(_))));
}

#[test]
fn best_cost_never_increases() {
    for seed in 0..5 {
        let w = cluttered(seed);
        let cfg = RrtConfig { iterations: 1500, step: 2.0, gamma: 30.0, seed, ..RrtConfig::default() };
        let o = plan_path_detailed(Vec3::new(2.0, 2.0, 15.0), Vec3::new(58.0, 58.0, 15.0), &w, &cfg).unwrap();
        for pair in o.history.windows(2) {
            assert!(pair[1].1 <= pair[0].1, "seed {seed}: {:?}", o.history);
        }
        assert!(o.path.cost <= o.raw.cost + 1e-9);
    }
}

#[test]
fn l_shaped_path_keeps_acceleration_through_the_corner() {
    let p = Path::new(vec![Vec3::new(0.0, 0.0, 10.0), Vec3::new(20.0, 0.0, 10.0), Vec3::new(20.0, 20.0, 10.0)]);
    let t = build_trajectory(&p, &TrajectoryConfig::default()).unwrap();
    assert_eq!(t.segments.len(), 2);
    let a = &t.segments[0];
    let b = &t.segments[1];
    assert!((a.position(a.duration) - b.position(0.0)).norm() < 1e-6);
    assert!((a.velocity(a.duration) - b.velocity(0.0)).norm() < 1e-6);
    assert!((a.acceleration(a.duration) - b.acceleration(0.0)).norm() < 1e-6);
    assert!(t.velocity(0.0).unwrap().norm() < 1e-9);
    assert!(t.velocity(t.duration()).unwrap().norm() < 1e-9);
}

#[test]
fn ninety_degree_parallel_track_is_covered() {
    let spec = SearchPatternSpec {
        kind: PatternKind::ParallelTrack,
        area: Rect::new(0.0, 0.0, 100.0, 60.0),
        spacing: 20.0,
        altitude: 20.0,
        entry: [0.0, 0.0],
    };
    let p = generate_pattern(&spec);
    let legs = p.waypoints.windows(2).filter(|w| (w[1].x - w[0].x).abs() > 1e-9).count();
    assert_eq!(legs, 3);
    assert!(max_gap(&p, &spec.area) <= 10.0 + 1e-6);
}

/// Largest ground distance from a 1 m grid point of `area` to the path.
fn max_gap(p: &Path, area: &Rect) -> f64 {
    let segs: Vec<(Vec3, Vec3)> = p
        .waypoints
        .windows(2)
        .map(|w| (Vec3::new(w[0].x, w[0].y, 0.0), Vec3::new(w[1].x, w[1].y, 0.0)))
        .collect();
    let mut worst: f64 = 0.0;
    let nx = area.width().floor() as usize;
    let ny = area.height().floor() as usize;
    for i in 0..=nx {
        for j in 0..=ny {
            let q = Vec3::new(area.min[0] + i as f64, area.min[1] + j as f64, 0.0);
            let d = segs
                .iter()
                .map(|(a, b)| {
                    let ab = b - a;
                    let l2 = ab.norm_squared();
                    let u = if l2 > 0.0 { ((q - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
                    (a + ab * u - q).norm()
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_paths_are_c2(pts in prop::collection::vec(prop::array::uniform3(0.0..100.0f64), 2..8)) {
        let wps: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        prop_assume!(wps.windows(2).all(|w| (w[1] - w[0]).norm() > 0.5));
        let t = build_trajectory(&Path::new(wps.clone()), &TrajectoryConfig::default()).unwrap();
        prop_assert!(t.knot_mismatch().max() < 1e-6);
        prop_assert!(t.duration().is_finite() && t.duration() > 0.0);
        prop_assert!((t.start().unwrap() - wps[0]).norm() < 1e-9);
        prop_assert!((t.end().unwrap() - wps[wps.len() - 1]).norm() < 1e-6);
    }

    #[test]
    fn planned_paths_are_collision_free(seed in 0u64..1000) {
        let w = cluttered(seed);
        let cfg = RrtConfig { iterations: 1200, step: 2.0, gamma: 30.0, seed, ..RrtConfig::default() };
        let start = Vec3::new(2.0, 2.0, 15.0);
        let goal = Vec3::new(58.0, 58.0, 15.0);
        if let Ok(p) = plan_path(start, goal, &w, &cfg) {
            prop_assert!(p.is_free(&w, cfg.clearance));
            let sum: f64 = p.waypoints.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
            prop_assert!((p.cost - sum).abs() < 1e-9);
            prop_assert_eq!(p.waypoints[0], start);
            prop_assert_eq!(*p.waypoints.last().unwrap(), goal);
        }
    }

    #[test]
    fn lawnmowers_cover_their_area(
        w in 5.0..90.0f64,
        h in 5.0..90.0f64,
        spacing in 4.0..25.0f64,
        creeping in any::<bool>(),
        ex in 0.0..1.0f64,
        ey in 0.0..1.0f64,
    ) {
        let area = Rect::new(3.0, -7.0, 3.0 + w, -7.0 + h);
        let kind = if creeping { PatternKind::CreepingLine } else { PatternKind::ParallelTrack };
        let spec = SearchPatternSpec { kind, area, spacing, altitude: 12.0, entry: [3.0 + ex * w, -7.0 + ey * h] };
        let p = generate_pattern(&spec);
        prop_assert!(max_gap(&p, &area) <= spacing / 2.0 + 1e-6);
        prop_assert!(p.waypoints.iter().all(|q| q.z == 12.0));
    }

    #[test]
    fn expanding_square_leg_sequence(spacing in 1.0..30.0f64) {
        let area = Rect::new(-1000.0, -1000.0, 1000.0, 1000.0);
        let spec = SearchPatternSpec { kind: PatternKind::Expanding, area, spacing, altitude: 20.0, entry: [0.0, 0.0] };
        let p = generate_pattern(&spec);
        let legs: Vec<f64> = p.waypoints.windows(2).take(8).map(|w| (w[1] - w[0]).norm()).collect();
        let want = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0].map(|k| k * spacing);
        for (a, b) in legs.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert_eq!(expanding_leg_lengths(spacing, 8), want.to_vec());
    }
}
