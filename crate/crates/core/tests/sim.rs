use std::collections::BTreeMap;

use hawk_core::model::{CommandVerb, ControlMode, DroneId, HandPose, OperatorEvent, OperatorPayload, PointingRay};
use hawk_core::planning::{Trajectory, TrajectorySegment};
use hawk_core::sim::{
    reference_script, run_headless, Mission, MissionMetrics, Modality, OperatorScript, ScenarioConfig, SimError,
    SimEvent,
};
use hawk_core::Vec3;

const D1: DroneId = DroneId(1);

fn one_drone(pad: [f64; 3]) -> ScenarioConfig {
    ScenarioConfig { drones: 1, pads: Some(vec![pad]), ..ScenarioConfig::default() }
}

fn say(t: f64, text: &str) -> OperatorEvent {
    OperatorEvent::new(t, OperatorPayload::transcript(text))
}

fn line(from: Vec3, to: Vec3, duration: f64) -> Trajectory {
    let v = (to - from) / duration;
    Trajectory::from_segments(vec![TrajectorySegment::from_boundary(from, v, Vec3::zeros(), to, v, duration)])
}

#[test]
fn thirty_meter_leg_takes_three_seconds() {
    let start = Vec3::new(10.0, 10.0, 20.0);
    let end = Vec3::new(40.0, 10.0, 20.0);
    let mut m = Mission::new(one_drone([10.0, 10.0, 20.0])).unwrap();
    assert!(m.install_trajectory(D1, CommandVerb::GoThere { target: end }, line(start, end, 3.0)));
    let mut arrived = None;
    for _ in 0..200 {
        m.step();
        if arrived.is_none() && (m.drone(D1).unwrap().position - end).norm() < 1e-6 {
            arrived = Some(m.ticks());
        }
    }
    let ticks = arrived.expect("drone arrives") as i64;
    assert!((ticks - 60).abs() <= 1, "{ticks} ticks");
}

#[test]
fn airspeed_is_clamped() {
    let start = Vec3::new(10.0, 10.0, 20.0);
    let end = Vec3::new(110.0, 10.0, 20.0);
    let mut m = Mission::new(one_drone([10.0, 10.0, 20.0])).unwrap();
    m.install_trajectory(D1, CommandVerb::GoThere { target: end }, line(start, end, 2.0));
    let mut fastest: f64 = 0.0;
    for _ in 0..40 {
        m.step();
        fastest = fastest.max(m.drone(D1).unwrap().velocity.norm());
    }
    assert!((fastest - 15.0).abs() < 1e-9, "{fastest}");
}

#[test]
fn zero_dt_is_rejected() {
    let cfg = ScenarioConfig { dt: 0.0, ..ScenarioConfig::default() };
    assert!(matches!(Mission::new(cfg), Err(SimError::Scenario(_))));
}

fn victim_below(offset: f64) -> ScenarioConfig {
    ScenarioConfig {
        victims: 1,
        victim_positions: Some(vec![[50.0 + offset, 50.0]]),
        ..one_drone([50.0, 50.0, 20.0])
    }
}

#[test]
fn footprint_boundary_is_strict() {
    let m = Mission::new(victim_below(0.0)).unwrap();
    assert_eq!(m.detectable(), vec![(0, D1)]);
    let m = Mission::new(victim_below(15.0)).unwrap();
    assert_eq!(m.detectable(), vec![(0, D1)]);
    let m = Mission::new(victim_below(15.01)).unwrap();
    assert!(m.detectable().is_empty());
}

#[test]
fn mark_confirms_and_is_a_noop_without_a_victim() {
    let mut m = Mission::new(victim_below(0.0)).unwrap();
    let ev = m.apply(&OperatorEvent::new(0.0, OperatorPayload::Mark));
    assert!(ev.iter().any(|e| matches!(e, SimEvent::VictimDetected { victim: 0, .. })));
    let ev = m.apply(&OperatorEvent::new(0.0, OperatorPayload::Mark));
    assert!(matches!(ev.as_slice(), [SimEvent::Ignored { .. }]));
    assert_eq!(m.metrics().detected, 1);
}

/// Flies one drone to each victim in turn and marks it, recording the
/// operator's actions as a script.
fn sweep_script(cfg: &ScenarioConfig) -> OperatorScript {
    let mut m = Mission::new(cfg.clone()).unwrap();
    let op = Vec3::new(cfg.operator[0], cfg.operator[1], cfg.operator[2]);
    let victims: Vec<Vec3> = m.world().victims.iter().map(|v| v.position).collect();
    let mut events = Vec::new();
    let mut act = |m: &mut Mission, p: OperatorPayload| {
        let e = OperatorEvent::new(m.clock(), p);
        m.apply(&e);
        events.push(e);
    };
    act(&mut m, OperatorPayload::transcript("take off"));
    let mut next = 0;
    let mut quiet_until = 3.0;
    while !m.finished() {
        m.step();
        if m.detectable().iter().any(|(v, _)| !m.world().victims[*v].found) {
            act(&mut m, OperatorPayload::Mark);
        }
        let idle = m.drone(D1).unwrap().active_task.is_none();
        if idle && m.clock() >= quiet_until && next < victims.len() {
            act(&mut m, OperatorPayload::transcript("go there"));
            act(&mut m, OperatorPayload::PointingRay { ray: PointingRay::new(op, victims[next] - op) });
            next += 1;
            quiet_until = m.clock() + 2.0;
        }
    }
    assert_eq!(m.metrics().detected, victims.len());
    OperatorScript { events }
}

#[test]
fn full_sweep_finds_all_six() {
    let cfg = ScenarioConfig { seed: 4, ..one_drone([60.0, 5.0, 0.0]) };
    let script = sweep_script(&cfg);
    let metrics = run_headless(&cfg, &script).unwrap();
    assert_eq!(metrics.detected, 6);
    assert!(metrics.detected <= metrics.victims);
    let mut times: Vec<f64> = metrics.detections.iter().map(|d| d.time).collect();
    times.dedup();
    assert_eq!(times.len(), 6);
}

#[test]
fn empty_script_leaves_everyone_idle() {
    let cfg = ScenarioConfig::default();
    let metrics = run_headless(&cfg, &OperatorScript { events: vec![] }).unwrap();
    assert_eq!(metrics.detected, 0);
    for modes in metrics.mode_time.values() {
        for (mode, t) in modes {
            if *mode != ControlMode::Autonomous {
                assert_eq!(*t, 0.0);
            }
        }
        assert!((modes[&ControlMode::Autonomous] - cfg.deadline).abs() <= cfg.dt);
    }
}

fn tally(script: &OperatorScript) -> BTreeMap<Modality, usize> {
    let mut out = BTreeMap::new();
    for e in &script.events {
        *out.entry(Modality::of(&e.payload)).or_insert(0) += 1;
    }
    out
}

fn check_accounting(m: &MissionMetrics, cfg: &ScenarioConfig) {
    for (id, modes) in &m.mode_time {
        let sum: f64 = modes.values().sum();
        assert!((sum - m.elapsed).abs() <= cfg.dt + 1e-9, "{id:?}: {sum} vs {}", m.elapsed);
    }
    let selected: f64 = m.selection_time.values().sum();
    assert!((selected - m.elapsed).abs() <= cfg.dt + 1e-9);
    assert!(m.detected <= m.victims);
}

#[test]
fn reference_run_accounting() {
    for drones in [2, 3] {
        let cfg = ScenarioConfig { drones, seed: 9, ..ScenarioConfig::default() };
        let script = reference_script(&cfg);
        let a = run_headless(&cfg, &script).unwrap();
        assert_eq!(a.interactions, tally(&script));
        check_accounting(&a, &cfg);
        assert!((a.elapsed - cfg.deadline).abs() < 1e-9);
        let b = run_headless(&cfg, &script).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn identical_inputs_give_identical_event_streams() {
    let cfg = ScenarioConfig { drones: 2, deadline: 90.0, seed: 2, ..ScenarioConfig::default() };
    let script = reference_script(&cfg);
    let record = || {
        let mut m = Mission::new(cfg.clone()).unwrap();
        let mut log = Vec::new();
        m.run_script(&script, |t, e| log.push((t, e))).unwrap();
        serde_json::to_string(&log).unwrap()
    };
    assert_eq!(record(), record());
}

#[test]
fn script_naming_a_missing_drone_aborts() {
    let cfg = ScenarioConfig { drones: 2, ..ScenarioConfig::default() };
    let script = OperatorScript { events: vec![say(1.0, "green hawk land")] };
    assert!(matches!(run_headless(&cfg, &script), Err(SimError::Script(_))));
}

#[test]
fn brake_then_open_hand_gives_teleoperation_within_bounds() {
    let cfg = one_drone([5.0, 5.0, 0.0]);
    let mut m = Mission::new(cfg.clone()).unwrap();
    m.apply(&say(0.0, "take off"));
    m.run_until(1.5, |_, _| {});
    assert_eq!(m.drone(D1).unwrap().active_task, Some(CommandVerb::TakeOff));
    m.apply(&say(m.clock(), "brake"));
    m.run_until(3.0, |_, _| {});
    assert_eq!(m.drone(D1).unwrap().active_task, None);
    m.apply(&OperatorEvent::new(m.clock(), OperatorPayload::PoseChange { pose: HandPose::Open }));
    assert_eq!(m.drone(D1).unwrap().mode, ControlMode::Teleoperated);

    // push hard toward the corner; the drone must stay inside the area
    let bounds = m.world().bounds;
    for _ in 0..400 {
        let e = OperatorEvent::new(m.clock(), OperatorPayload::JoystickDelta { delta: Vec3::new(-1.0, -1.0, 1.0) });
        m.apply(&e);
        m.step();
        assert!(bounds.contains(&m.drone(D1).unwrap().position));
    }
    let p = m.drone(D1).unwrap().position;
    assert!(p.x < 1e-9 && p.y < 1e-9 && (p.z - cfg.ceiling).abs() < 1e-9, "{p:?}");
    check_accounting(m.metrics(), &cfg);
}
