use hawk_core::blend::{
    handle_mode, replan_on_exit, step_blend, BlendConfig, BlendEvent, BlendState, InterventionSignal, InterventionSource,
    ModeInput, ModeState,
};
use hawk_core::geometry::{Aabb, Obstacle};
use hawk_core::model::{CommandVerb, ControlMode, HandPose, WorldModel};
use hawk_core::planning::{PlanError, RrtConfig, TrajectoryConfig};
use hawk_core::Vec3;
use proptest::prelude::*;

fn nudge(d: Vec3) -> InterventionSignal {
    InterventionSignal { delta: d, source: InterventionSource::JoystickGesture }
}

fn mixed_state() -> BlendState {
    let mut s = BlendState::new(&BlendConfig::default());
    s.mixed = true;
    s
}

fn replans(ev: &[BlendEvent]) -> usize {
    ev.iter().filter(|e| matches!(e, BlendEvent::ReplanRequested { .. })).count()
}

#[test]
fn release_decays_to_zero_in_ten_ticks() {
    let mut s = mixed_state();
    s.h = Vec3::new(1.0, 0.0, 0.0);
    s.mixed = false;
    let mut norms = vec![1.0];
    for _ in 0..10 {
        s.step(Vec3::zeros(), None, 0.2);
        norms.push(s.h.norm());
    }
    assert_eq!(s.h, Vec3::zeros());
    // one tick earlier it had not yet arrived
    assert!(norms[9] > 0.0);
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn ramp_past_radius_requests_one_replan_at_the_crossing() {
    let mut s = mixed_state();
    let mut at = Vec::new();
    for tick in 0..40 {
        let (_, ev) = s.step(Vec3::zeros(), Some(&nudge(Vec3::new(0.15, 0.0, 0.0))), 0.05);
        if replans(&ev) > 0 {
            at.push(tick);
        }
    }
    // 0.15 per tick passes 2 m on the 14th tick
    assert_eq!(at, vec![13]);
}

#[test]
fn recrossing_after_return_requests_again() {
    let mut s = mixed_state();
    let mut count = 0;
    let plan = [(0.3, 10), (-0.3, 5), (0.3, 5), (-0.3, 5)];
    for (dx, n) in plan {
        for _ in 0..n {
            let (_, ev) = s.step(Vec3::zeros(), Some(&nudge(Vec3::new(dx, 0.0, 0.0))), 0.05);
            count += replans(&ev);
        }
    }
    assert_eq!(count, 2);
}

#[test]
fn feedback_tracks_offset() {
    let mut s = mixed_state();
    let (_, ev) = s.step(Vec3::zeros(), Some(&nudge(Vec3::new(0.5, 0.0, 0.0))), 0.05);
    assert_eq!(ev, vec![BlendEvent::FeedbackPulse { intensity: 0.25 }]);
    let (_, ev) = s.step(Vec3::zeros(), None, 0.05);
    let BlendEvent::FeedbackPulse { intensity } = ev[0] else { panic!("{ev:?}") };
    assert!((intensity - 0.475 / 2.0).abs() < 1e-12);
}

#[test]
fn oversized_delta_is_clamped() {
    let mut s = mixed_state();
    s.step(Vec3::zeros(), Some(&nudge(Vec3::new(3.0, 4.0, 0.0))), 0.05);
    assert!((s.h - Vec3::new(0.3, 0.4, 0.0)).norm() < 1e-12);
}

#[test]
fn hand_closed_without_trace_changes_nothing() {
    let mut s = ModeState::default();
    let t = handle_mode(&mut s, ModeInput::Pose(HandPose::Closed));
    assert!(!t.changed());
    assert_eq!(s.mode, ControlMode::Autonomous);
}

#[test]
fn hand_open_during_task_keeps_it_running() {
    let mut s = ModeState::default();
    handle_mode(&mut s, ModeInput::Command(&CommandVerb::SearchParallelTrack));
    let t = handle_mode(&mut s, ModeInput::Pose(HandPose::Open));
    assert_eq!(t.to, ControlMode::MixedInitiative);
    assert_eq!(s.task, Some(CommandVerb::SearchParallelTrack));
    let t = handle_mode(&mut s, ModeInput::Command(&CommandVerb::Brake));
    assert_eq!(t.to, ControlMode::Teleoperated);
    assert_eq!(s.task, None);
}

fn world() -> WorldModel {
    WorldModel::empty(Aabb::new(Vec3::zeros(), Vec3::new(60.0, 60.0, 30.0)))
}

#[test]
fn replan_starts_at_the_deviated_position() {
    let here = Vec3::new(12.5, 20.0, 15.0);
    let next = Vec3::new(40.0, 20.0, 15.0);
    let rest = [Vec3::new(40.0, 40.0, 15.0)];
    let (path, traj) = replan_on_exit(here, next, &rest, &world(), &RrtConfig::default(), &TrajectoryConfig::default()).unwrap();
    assert_eq!(path.waypoints[0], here);
    assert_eq!(*path.waypoints.last().unwrap(), rest[0]);
    assert!(path.waypoints.contains(&next));
    assert!((traj.start().unwrap() - here).norm() < 1e-9);

    let mut s = mixed_state();
    s.h = Vec3::new(2.5, 0.0, 0.0);
    s.outside = true;
    s.reset();
    assert_eq!(s.h, Vec3::zeros());
}

#[test]
fn boxed_in_deviation_has_no_path() {
    let mut w = world();
    // a closed cell around (30, 30, 15)
    let (lo, hi) = (Vec3::new(25.0, 25.0, 10.0), Vec3::new(35.0, 35.0, 20.0));
    for axis in 0..3 {
        let mut a_max = hi;
        a_max[axis] = lo[axis] + 1.0;
        w.obstacles.push(Obstacle::cuboid(lo, a_max));
        let mut b_min = lo;
        b_min[axis] = hi[axis] - 1.0;
        w.obstacles.push(Obstacle::cuboid(b_min, hi));
    }
    let cfg = RrtConfig { iterations: 600, ..RrtConfig::default() };
    let r = replan_on_exit(Vec3::new(30.0, 30.0, 15.0), Vec3::new(50.0, 50.0, 15.0), &[], &w, &cfg, &TrajectoryConfig::default());
    assert!(matches!(r, Err(PlanError::NoPath(_))));
}

fn arb_step() -> impl Strategy<Value = Option<[f64; 3]>> {
    prop::option::weighted(0.6, prop::array::uniform3(-0.5..0.5f64))
}

proptest! {
    #[test]
    fn h_is_the_sum_of_interventions(deltas in prop::collection::vec(prop::array::uniform3(-0.28..0.28f64), 0..60)) {
        let mut s = mixed_state();
        let mut sum = Vec3::zeros();
        for d in &deltas {
            let d = Vec3::new(d[0], d[1], d[2]);
            sum += d;
            s.step(Vec3::zeros(), Some(&nudge(d)), 0.05);
        }
        prop_assert!((s.h - sum).norm() < 1e-9);
    }

    #[test]
    fn mixed_minus_planned_is_h(
        steps in prop::collection::vec((arb_step(), prop::array::uniform3(-100.0..100.0f64)), 1..80),
        mixed in any::<bool>(),
    ) {
        let mut s = BlendState::new(&BlendConfig::default());
        s.mixed = mixed;
        for (u, a) in steps {
            let a = Vec3::new(a[0], a[1], a[2]);
            let u = u.map(|d| nudge(Vec3::new(d[0], d[1], d[2])));
            let (m, next, _) = step_blend(&s, a, u.as_ref(), 0.05);
            prop_assert!((m - a - next.h).norm() < 1e-9);
            if !mixed {
                prop_assert_eq!(m, a);
            }
            s = next;
        }
    }

    #[test]
    fn replan_fires_iff_radius_crossed(steps in prop::collection::vec(arb_step(), 1..120)) {
        let mut s = mixed_state();
        let mut was_out = false;
        for u in steps {
            let u = u.map(|d| nudge(Vec3::new(d[0], d[1], d[2])));
            let (_, ev) = s.step(Vec3::zeros(), u.as_ref(), 0.05);
            let out = s.h.norm() > s.workspace_radius;
            prop_assert_eq!(replans(&ev), usize::from(out && !was_out));
            was_out = out;
        }
    }

    #[test]
    fn decay_is_monotone_without_overshoot(h in prop::array::uniform3(-3.0..3.0f64), rate in 0.05..2.0f64, dt in 0.01..0.5f64) {
        let cfg = BlendConfig { lambda_rate: rate, ..BlendConfig::default() };
        let mut s = BlendState::new(&cfg);
        s.h = Vec3::new(h[0], h[1], h[2]);
        let start = s.h;
        let mut prev = s.h.norm();
        let bound = (prev / (rate * dt)).ceil() as usize + 1;
        for _ in 0..bound {
            s.step(Vec3::zeros(), None, dt);
            let n = s.h.norm();
            prop_assert!(n < prev || n == 0.0);
            for k in 0..3 {
                prop_assert!(s.h[k] * start[k] >= 0.0);
            }
            prev = n;
        }
        prop_assert_eq!(s.h, Vec3::zeros());
    }
}
