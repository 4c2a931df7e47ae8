//! Timed operator scripts driving headless missions.
//!
//! A script file holds one operator event per line in the interchange
//! format; blank lines and lines starting with `#` are skipped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::ScenarioConfig;
use crate::gesture::synth::{self, Mounting, Style};
use crate::model::{DroneId, GestureLabel, HandPose, OperatorEvent, OperatorPayload, PointingRay};
use crate::planning::patterns::{generate_pattern, PatternKind, Rect, SearchPatternSpec};
use crate::planning::{build_trajectory, Path, TrajectoryConfig};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("event {index}: timestamp {timestamp} goes backwards")]
    OutOfOrder { index: usize, timestamp: f64 },
    #[error("event {index}: timestamp {timestamp} outside the mission (deadline {deadline})")]
    OutsideMission { index: usize, timestamp: f64, deadline: f64 },
    #[error("event {index}: unknown drone `{name}`")]
    UnknownDrone { index: usize, name: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorScript {
    pub events: Vec<OperatorEvent>,
}

impl OperatorScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let e: OperatorEvent = serde_json::from_str(l).map_err(|e| ScriptError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(e);
        }
        Ok(Self { events })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&serde_json::to_string(e).expect("operator events serialize"));
            s.push('\n');
        }
        s
    }

    /// Checks ordering, timing and drone names against a scenario.
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<(), ScriptError> {
        let fleet = cfg.drone_ids();
        let mut last = f64::NEG_INFINITY;
        for (index, e) in self.events.iter().enumerate() {
            let t = e.timestamp;
            if !(t.is_finite() && t >= 0.0 && t <= cfg.deadline) {
                return Err(ScriptError::OutsideMission { index, timestamp: t, deadline: cfg.deadline });
            }
            if t < last {
                return Err(ScriptError::OutOfOrder { index, timestamp: t });
            }
            last = t;
            if let OperatorPayload::Transcript { text, alternatives, .. } = &e.payload {
                let texts = std::iter::once(text).chain(alternatives.iter().map(|a| &a.text));
                for text in texts {
                    let lower = text.to_lowercase();
                    for (name, id) in &cfg.names.names {
                        if lower.contains(name.as_str()) && !fleet.contains(id) {
                            return Err(ScriptError::UnknownDrone { index, name: name.clone() });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn trajectory_config(cfg: &ScenarioConfig, cruise: f64) -> TrajectoryConfig {
    TrajectoryConfig {
        cruise_speed: cruise,
        max_speed: cfg.max_speed,
        max_accel: cfg.max_accel,
        ..TrajectoryConfig::default()
    }
}

fn flight_time(points: Vec<Vec3>, cfg: &TrajectoryConfig) -> f64 {
    build_trajectory(&Path::new(points), cfg).map(|t| t.duration()).unwrap_or(0.0)
}

/// Square blocks tiling the area, in serpentine order.
pub fn search_blocks(cfg: &ScenarioConfig) -> Vec<Rect> {
    let side = cfg.search_block;
    let nx = (cfg.area[0] / side).ceil().max(1.0) as usize;
    let ny = (cfg.area[1] / side).ceil().max(1.0) as usize;
    let ground = cfg.ground();
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let i = if j % 2 == 0 { i } else { nx - 1 - i };
            let (x, y) = ((i as f64 + 0.5) * side, (j as f64 + 0.5) * side);
            out.push(Rect::block_around(x, y, side, &ground));
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Phase {
    Idle,
    Transit,
}

struct Tasking {
    id: DroneId,
    name: String,
    blocks: Vec<Rect>,
    next_block: usize,
    phase: Phase,
    ready: f64,
    at: Vec3,
}

/// A scripted stand-in for a trained operator searching the whole area.
///
/// The area is cut into square blocks handed out round-robin. For each
/// block the operator says "go there" while pointing at the block centre,
/// then orders a parallel-track search by voice and gesture together once
/// the drone should have arrived. In between, the operator cycles through
/// the drones, selecting each by name and marking whatever its camera shows.
/// Timing comes from the operator's own estimate of flight times.
pub fn reference_script(cfg: &ScenarioConfig) -> OperatorScript {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.gesture_seed);
    // the operator who recorded the gesture templates
    let style = Style::random(&mut rng);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);

    let transit = trajectory_config(cfg, cfg.cruise_speed);
    let search = trajectory_config(cfg, cfg.search_speed);
    let op = Vec3::new(cfg.operator[0], cfg.operator[1], cfg.operator[2]);
    let blocks = search_blocks(cfg);
    let ids = cfg.drone_ids();
    let pads = cfg.pad_positions();

    let mut events = Vec::new();
    let mut push = |t: f64, p: OperatorPayload| events.push(OperatorEvent::new(t, p));

    let mut t = 0.5;
    push(t, OperatorPayload::transcript("all hawks take off"));
    let mut drones: Vec<Tasking> = ids
        .iter()
        .zip(&pads)
        .enumerate()
        .map(|(k, (id, pad))| {
            let top = Vec3::new(pad.x, pad.y, cfg.altitude);
            Tasking {
                id: *id,
                name: cfg.names.name_of(*id).unwrap_or("").to_string(),
                blocks: blocks.iter().skip(k).step_by(ids.len()).copied().collect(),
                next_block: 0,
                phase: Phase::Idle,
                ready: t + cfg.fusion_window + flight_time(vec![*pad, top], &transit) + 1.0,
                at: top,
            }
        })
        .collect();
    t += 2.0;

    let mut poll = 0usize;
    let end = cfg.deadline - 3.0;
    while t < end {
        let next = drones
            .iter_mut()
            .filter(|d| d.ready <= t && (matches!(d.phase, Phase::Transit) || d.next_block < d.blocks.len()))
            .min_by(|a, b| a.ready.total_cmp(&b.ready).then(a.id.cmp(&b.id)));
        match next {
            Some(d) if matches!(d.phase, Phase::Idle) => {
                let block = d.blocks[d.next_block];
                let [cx, cy] = block.center();
                push(t, OperatorPayload::transcript(format!("{} go there", d.name)));
                let ray = PointingRay::new(op, Vec3::new(cx, cy, 0.0) - op);
                push(t + 0.3, OperatorPayload::PointingRay { ray });
                let target = Vec3::new(cx, cy, d.at.z);
                d.ready = t + 0.3 + flight_time(vec![d.at, target], &transit) + 1.0;
                d.at = target;
                d.phase = Phase::Transit;
                t += 2.0;
            }
            Some(d) => {
                let block = d.blocks[d.next_block];
                let perf = style.jitter(&mut rng);
                let trace = synth::perform(GestureLabel::SearchParallelTrack, &perf, &Mounting::random(&mut rng), 0.05, &mut rng);
                push(t, OperatorPayload::PoseChange { pose: HandPose::Closed });
                push(t + 0.3, OperatorPayload::transcript(format!("{} search parallel track", d.name)));
                push(t + perf.duration, OperatorPayload::MotionTrace { trace });
                push(t + perf.duration, OperatorPayload::PoseChange { pose: HandPose::Other });
                let pattern = generate_pattern(&SearchPatternSpec {
                    kind: PatternKind::ParallelTrack,
                    area: block,
                    spacing: cfg.pattern_spacing,
                    altitude: d.at.z,
                    entry: [d.at.x, d.at.y],
                });
                let mut pts = vec![d.at];
                pts.extend(pattern.waypoints);
                d.at = *pts.last().expect("pattern has waypoints");
                d.ready = t + perf.duration + flight_time(pts, &search) + 1.0;
                d.next_block += 1;
                d.phase = Phase::Idle;
                t += perf.duration + 1.0;
            }
            None => {
                let d = &drones[poll % drones.len()];
                poll += 1;
                push(t, OperatorPayload::transcript(d.name.clone()));
                push(t + cfg.fusion_window + 0.3, OperatorPayload::Mark);
                t += cfg.fusion_window + 1.0;
            }
        }
    }
    OperatorScript { events }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let s = OperatorScript {
            events: vec![
                OperatorEvent::new(1.0, OperatorPayload::transcript("red hawk take off")),
                OperatorEvent::new(2.5, OperatorPayload::Mark),
            ],
        };
        let text = s.to_text();
        assert_eq!(OperatorScript::parse(&format!("# header\n\n{text}")).unwrap(), s);
    }

    #[test]
    fn malformed_line_is_reported() {
        let e = OperatorScript::parse("{\"timestamp\": 1, \"type\": \"mark\"}\n{\"timestamp\": 2, \"type\": \"wave\"}\n").unwrap_err();
        assert!(matches!(e, ScriptError::Malformed { line: 2, .. }));
    }

    #[test]
    fn validation() {
        let cfg = ScenarioConfig { drones: 2, ..Default::default() };
        let bad = OperatorScript { events: vec![OperatorEvent::new(1.0, OperatorPayload::transcript("green hawk land"))] };
        assert!(matches!(bad.validate(&cfg), Err(ScriptError::UnknownDrone { index: 0, .. })));
        let late = OperatorScript { events: vec![OperatorEvent::new(400.0, OperatorPayload::Mark)] };
        assert!(matches!(late.validate(&cfg), Err(ScriptError::OutsideMission { .. })));
        let back = OperatorScript {
            events: vec![OperatorEvent::new(2.0, OperatorPayload::Mark), OperatorEvent::new(1.0, OperatorPayload::Mark)],
        };
        assert!(matches!(back.validate(&cfg), Err(ScriptError::OutOfOrder { index: 1, .. })));
    }

    #[test]
    fn reference_script_is_valid_for_each_fleet() {
        for drones in [1, 2, 3] {
            let cfg = ScenarioConfig { drones, ..Default::default() };
            let s = reference_script(&cfg);
            s.validate(&cfg).unwrap();
            assert!(s.events.len() > 20);
        }
    }

    #[test]
    fn blocks_tile_the_area() {
        let b = search_blocks(&ScenarioConfig::default());
        assert_eq!(b.len(), 9);
        let area: f64 = b.iter().map(|r| r.width() * r.height()).sum();
        assert_eq!(area, 120.0 * 120.0);
    }
}
