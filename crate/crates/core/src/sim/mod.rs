//! Deterministic fixed-step mission simulator.
//!
//! Operator events run through the recognizers and the fusion window; the
//! commands that come out are executed by the addressed drones, which fly
//! planned trajectories blended with the operator's corrections. Victims are
//! confirmed only when the operator marks them while a drone that sees them
//! is selected.

pub mod metrics;
pub mod scenario;
pub mod script;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blend::{handle_mode, replan_on_exit, BlendEvent, BlendState, InterventionSignal, InterventionSource, ModeInput, ModeState, ModeTransition};
use crate::fusion::{Channel, ChannelEvent, FusionConfig, FusionEngine, FusionOutcome, RuleSet};
use crate::geometry::{Aabb, Obstacle};
use crate::gesture::synth;
use crate::gesture::{classify, GestureConfig, TrainingSet};
use crate::model::{
    resolve_selection, Command, CommandVerb, ControlMode, DroneId, DroneState, HandPose, Metaphor, OperatorEvent, OperatorPayload,
    Selection, SelectionInput, TranscriptHypothesis, Victim, WorldModel, DEFAULT_POINTING_CONE_DEG,
};
use crate::planning::patterns::{generate_pattern, PatternKind, Rect, SearchPatternSpec};
use crate::planning::{build_trajectory, plan_path, Path, PlanError, RrtConfig, Trajectory};
use crate::speech::{parse_hypotheses, Grammar, SpeechContext};
use crate::Vec3;

pub use metrics::{Detection, FleetSummary, MissionMetrics, Modality};
pub use scenario::{parse_scenario, ScenarioConfig, ScenarioError};
pub use script::{reference_script, OperatorScript, ScriptError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("gesture templates: {0}")]
    Templates(String),
}

/// Everything the simulator reports while running.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimEvent {
    Command { command: Command, drones: Vec<DroneId> },
    Rejected { reason: String },
    Selection { drones: Vec<DroneId> },
    ModeChanged { drone: DroneId, from: ControlMode, to: ControlMode },
    TaskStarted { drone: DroneId, task: String, waypoints: Vec<Vec3>, duration: f64 },
    TaskCompleted { drone: DroneId, task: String },
    ReplanRequested { drone: DroneId, offset: f64 },
    Replanned { drone: DroneId, waypoints: Vec<Vec3> },
    /// Planning failed; the drone holds position.
    PlanFailed { drone: DroneId, reason: String },
    FeedbackPulse { drone: DroneId, intensity: f64 },
    BatteryDepleted { drone: DroneId },
    VictimDetected { victim: usize, drone: DroneId, time: f64 },
    /// An operator action with no effect.
    Ignored { reason: String },
    MetricUpdate { detected: usize, elapsed: f64 },
    Telemetry { drones: Vec<DroneState> },
    MissionEnded { metrics: MissionMetrics },
}

#[derive(Clone, Debug)]
struct Plan {
    task: CommandVerb,
    waypoints: Vec<Vec3>,
    trajectory: Trajectory,
    cruise: f64,
    tau: f64,
}

impl Plan {
    /// Index of the segment being flown.
    fn segment(&self) -> usize {
        let mut acc = 0.0;
        for (i, s) in self.trajectory.segments.iter().enumerate() {
            acc += s.duration;
            if self.tau < acc {
                return i;
            }
        }
        self.trajectory.segments.len().saturating_sub(1)
    }

    fn remaining_after(&self, seg: usize) -> Vec<Vec3> {
        self.waypoints.get(seg + 1..).map(<[Vec3]>::to_vec).unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
struct Drone {
    state: DroneState,
    plan: Option<Plan>,
    hover: Vec3,
    blend: BlendState,
    modes: ModeState,
    time_rate: f64,
    nudge: Option<Vec3>,
    braked: Option<(CommandVerb, Vec<Vec3>, f64)>,
    airborne: bool,
    pulse: Option<i64>,
}

/// A drone as shown to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneView {
    #[serde(flatten)]
    pub state: DroneState,
    pub metaphor: Metaphor,
    pub offset: Vec3,
    pub footprint: f64,
    pub time_rate: f64,
    pub airborne: bool,
    /// Waypoints still ahead of the drone.
    pub route: Vec<Vec3>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub clock: f64,
    pub deadline: f64,
    pub finished: bool,
    pub bounds: Aabb,
    pub obstacles: Vec<Obstacle>,
    pub victims: Vec<Victim>,
    pub drones: Vec<DroneView>,
    pub selection: Vec<DroneId>,
    pub metrics: MissionMetrics,
}

/// Recognizers and fusion window of the single operator.
#[derive(Clone, Debug)]
struct Operator {
    grammar: Grammar,
    speech: SpeechContext,
    training: TrainingSet,
    gesture: GestureConfig,
    fusion: FusionEngine,
}

fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

fn dedup(points: Vec<Vec3>) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|q| (p - q).norm() > 1e-9) {
            out.push(p);
        }
    }
    out
}

/// Gesture templates of the scenario's operator: ten performances per label.
pub fn operator_templates(cfg: &ScenarioConfig, gesture: &GestureConfig) -> Result<TrainingSet, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.gesture_seed);
    let corpus = synth::corpus(10, 0, 0.05, &mut rng);
    let mut ts = TrainingSet::new(gesture.points);
    for lt in &corpus.train {
        let label = lt.label.expect("synthetic traces are labelled");
        ts.add_template(&lt.trace, label, gesture).map_err(|e| SimError::Templates(e.to_string()))?;
    }
    Ok(ts)
}

#[derive(Clone, Debug)]
pub struct Mission {
    cfg: ScenarioConfig,
    world: WorldModel,
    drones: Vec<Drone>,
    op: Operator,
    selection: Vec<DroneId>,
    tick: u64,
    telemetry_every: u64,
    plans: u64,
    metrics: MissionMetrics,
    ended: bool,
}

impl Mission {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let gesture = GestureConfig::default();
        let training = operator_templates(&cfg, &gesture)?;
        Ok(Self::with_templates(cfg, training))
    }

    /// Like [`Mission::new`] with precomputed templates.
    pub fn with_templates(cfg: ScenarioConfig, training: TrainingSet) -> Self {
        let world = cfg.world();
        let ids = cfg.drone_ids();
        let drones = ids
            .iter()
            .zip(cfg.pad_positions())
            .map(|(id, pad)| Drone {
                state: DroneState::new(*id, pad, cfg.battery),
                plan: None,
                hover: pad,
                blend: BlendState::new(&cfg.blend),
                modes: ModeState::default(),
                time_rate: 1.0,
                nudge: None,
                braked: None,
                airborne: false,
                pulse: None,
            })
            .collect();
        let fusion_cfg = FusionConfig {
            duration: cfg.fusion_window,
            bounds: cfg.bounds(),
            ..FusionConfig::default()
        };
        let op = Operator {
            grammar: Grammar::default_grammar(),
            speech: SpeechContext {
                names: cfg.names.clone(),
                fleet: ids.clone(),
                ..SpeechContext::default()
            },
            gesture: GestureConfig::default(),
            training,
            fusion: FusionEngine::new(RuleSet::default_rules(), fusion_cfg),
        };
        let telemetry_every = ((cfg.telemetry_period / cfg.dt).round() as u64).max(1);
        Self {
            metrics: MissionMetrics::new(world.victims.len(), &ids),
            world,
            drones,
            op,
            selection: ids,
            tick: 0,
            telemetry_every,
            plans: 0,
            cfg,
            ended: false,
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn clock(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn finished(&self) -> bool {
        self.ended
    }

    pub fn metrics(&self) -> &MissionMetrics {
        &self.metrics
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn selection(&self) -> &[DroneId] {
        &self.selection
    }

    pub fn drone(&self, id: DroneId) -> Option<&DroneState> {
        self.drones.iter().find(|d| d.state.id == id).map(|d| &d.state)
    }

    pub fn drone_states(&self) -> Vec<DroneState> {
        self.drones.iter().map(|d| d.state.clone()).collect()
    }

    /// Current operator offset of a drone.
    pub fn offset(&self, id: DroneId) -> Option<Vec3> {
        self.drones.iter().find(|d| d.state.id == id).map(|d| d.blend.h)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            clock: self.clock(),
            deadline: self.cfg.deadline,
            finished: self.ended,
            bounds: self.world.bounds,
            obstacles: self.world.obstacles.clone(),
            victims: self.world.victims.clone(),
            drones: self
                .drones
                .iter()
                .map(|d| DroneView {
                    state: d.state.clone(),
                    metaphor: d.modes.metaphor,
                    offset: d.blend.h,
                    footprint: self.cfg.footprint_at(d.state.position.z),
                    time_rate: d.time_rate,
                    airborne: d.airborne,
                    route: d.plan.as_ref().map(|p| p.remaining_after(p.segment())).unwrap_or_default(),
                })
                .collect(),
            selection: self.selection.clone(),
            metrics: self.metrics.clone(),
        }
    }

    fn index(&self, id: DroneId) -> Option<usize> {
        self.drones.iter().position(|d| d.state.id == id)
    }

    /// Victims inside the footprint of a drone, as `(victim, drone)`.
    pub fn detectable(&self) -> Vec<(usize, DroneId)> {
        let mut out = Vec::new();
        for (i, v) in self.world.victims.iter().enumerate() {
            for d in &self.drones {
                let p = d.state.position;
                let r = self.cfg.footprint_at(p.z);
                let off = ((p.x - v.position.x).powi(2) + (p.y - v.position.y).powi(2)).sqrt();
                if r > 0.0 && off <= r {
                    out.push((i, d.state.id));
                }
            }
        }
        out
    }

    /// Applies one operator event at the current clock.
    pub fn apply(&mut self, e: &OperatorEvent) -> Vec<SimEvent> {
        *self.metrics.interactions.entry(Modality::of(&e.payload)).or_insert(0) += 1;
        let t = e.timestamp;
        let mut out = Vec::new();
        let outcomes = match &e.payload {
            OperatorPayload::Transcript { text, confidence, alternatives } => {
                let mut hyps = vec![TranscriptHypothesis { text: text.clone(), confidence: confidence.unwrap_or(1.0) }];
                hyps.extend(alternatives.iter().cloned());
                match parse_hypotheses(&hyps, &self.op.grammar, &self.op.speech) {
                    Ok(nb) => self.op.fusion.ingest(ChannelEvent::speech(nb, t)),
                    Err(err) => vec![FusionOutcome::Rejected { timestamp: t, reason: err.to_string() }],
                }
            }
            OperatorPayload::MotionTrace { trace } => match classify(trace, &self.op.training, &self.op.gesture) {
                Ok(nb) => {
                    let dur = match (trace.samples.first(), trace.samples.last()) {
                        (Some(a), Some(b)) => b.t - a.t,
                        _ => 0.0,
                    };
                    self.op.fusion.ingest(ChannelEvent::gesture(&nb, t - dur, t))
                }
                Err(err) => {
                    self.op.fusion.activity_ended(Channel::Gesture);
                    vec![FusionOutcome::Rejected { timestamp: t, reason: err.to_string() }]
                }
            },
            OperatorPayload::PointingRay { ray } => self.op.fusion.ingest(ChannelEvent::pointing(*ray, t)),
            OperatorPayload::PoseChange { pose } => {
                match pose {
                    HandPose::Closed => self.op.fusion.activity_started(Channel::Gesture, t),
                    _ => self.op.fusion.activity_ended(Channel::Gesture),
                }
                for id in self.selection.clone() {
                    if let Some(i) = self.index(id) {
                        let tr = handle_mode(&mut self.drones[i].modes, ModeInput::Pose(*pose));
                        self.after_transition(i, tr, &mut out);
                    }
                }
                Vec::new()
            }
            OperatorPayload::JoystickDelta { delta } => {
                let mut moved = false;
                for id in self.selection.clone() {
                    let Some(i) = self.index(id) else { continue };
                    let d = &mut self.drones[i];
                    match d.modes.mode {
                        ControlMode::Teleoperated if d.modes.metaphor == Metaphor::Joystick => {
                            d.hover = self.world.bounds.clamp(&(d.hover + delta));
                            d.airborne |= d.hover.z > 0.0;
                            moved = true;
                        }
                        ControlMode::MixedInitiative if d.modes.mixed() => {
                            *d.nudge.get_or_insert(Vec3::zeros()) += delta;
                            moved = true;
                        }
                        _ => {}
                    }
                }
                if !moved {
                    out.push(SimEvent::Ignored { reason: "joystick input while no selected drone accepts it".into() });
                }
                Vec::new()
            }
            OperatorPayload::Mark => {
                self.mark(&mut out);
                Vec::new()
            }
        };
        for o in outcomes {
            self.execute(o, &mut out);
        }
        self.sync_tasks();
        out
    }

    fn sync_tasks(&mut self) {
        for d in &mut self.drones {
            d.state.active_task = d.plan.as_ref().map(|p| p.task.clone());
        }
    }

    fn mark(&mut self, out: &mut Vec<SimEvent>) {
        let now = self.clock();
        let mut hits = Vec::new();
        for (v, d) in self.detectable() {
            if self.selection.contains(&d) && !self.world.victims[v].found && !hits.iter().any(|(w, _)| *w == v) {
                hits.push((v, d));
            }
        }
        if hits.is_empty() {
            out.push(SimEvent::Ignored { reason: "mark: no unconfirmed victim in view of the selected drones".into() });
            return;
        }
        for (v, d) in hits {
            self.world.victims[v].found = true;
            self.metrics.detected += 1;
            self.metrics.detections.push(Detection { victim: v, drone: d, time: now });
            out.push(SimEvent::VictimDetected { victim: v, drone: d, time: now });
        }
        out.push(SimEvent::MetricUpdate { detected: self.metrics.detected, elapsed: self.metrics.elapsed });
    }

    fn after_transition(&mut self, i: usize, tr: ModeTransition, out: &mut Vec<SimEvent>) {
        let d = &mut self.drones[i];
        d.state.mode = d.modes.mode;
        d.blend.mixed = tr.mixed;
        if tr.to == ControlMode::Teleoperated && tr.changed() {
            d.plan = None;
            d.hover = d.state.position;
        }
        if tr.changed() {
            out.push(SimEvent::ModeChanged { drone: d.state.id, from: tr.from, to: tr.to });
        }
    }

    fn resolve(&self, sel: &Selection) -> Result<(Vec<DroneId>, bool), String> {
        let all: Vec<DroneId> = self.drones.iter().map(|d| d.state.id).collect();
        match sel {
            Selection::Current | Selection::Deictic => Ok((self.selection.clone(), false)),
            Selection::All => Ok((all, true)),
            Selection::Drones { ids } => {
                let known: Vec<DroneId> = ids.iter().copied().filter(|i| all.contains(i)).collect();
                if known.len() != ids.len() || known.is_empty() {
                    return Err(format!("unknown drone in selection {ids:?}"));
                }
                Ok((known, true))
            }
            Selection::Pointed { ray } => {
                let fleet = self.drone_states();
                match resolve_selection(SelectionInput::Ray(ray), &fleet, &self.cfg.names, DEFAULT_POINTING_CONE_DEG) {
                    Ok(ids) => Ok((ids, true)),
                    // the previous selection stays
                    Err(_) => Ok((self.selection.clone(), false)),
                }
            }
        }
    }

    fn execute(&mut self, o: FusionOutcome, out: &mut Vec<SimEvent>) {
        let command = match o {
            FusionOutcome::Rejected { reason, .. } => {
                self.metrics.rejected += 1;
                out.push(SimEvent::Rejected { reason });
                return;
            }
            FusionOutcome::Command { command } => command,
        };
        let (targets, explicit) = match self.resolve(&command.selection) {
            Ok(r) => r,
            Err(reason) => {
                self.metrics.rejected += 1;
                out.push(SimEvent::Rejected { reason });
                return;
            }
        };
        self.metrics.commands += 1;
        out.push(SimEvent::Command { command: command.clone(), drones: targets.clone() });
        if explicit && targets != self.selection {
            self.selection = targets.clone();
            out.push(SimEvent::Selection { drones: targets.clone() });
        }
        for id in targets {
            if let Some(i) = self.index(id) {
                self.command_drone(i, &command.verb, out);
            }
        }
    }

    fn flight_z(&self, i: usize) -> f64 {
        let z = self.drones[i].state.position.z;
        if z > 1.0 {
            z
        } else {
            self.cfg.altitude
        }
    }

    fn command_drone(&mut self, i: usize, verb: &CommandVerb, out: &mut Vec<SimEvent>) {
        let id = self.drones[i].state.id;
        if self.drones[i].state.battery <= 0.0 && !matches!(verb, CommandVerb::Land | CommandVerb::Select) {
            out.push(SimEvent::Ignored { reason: format!("{id}: battery exhausted") });
            return;
        }
        let tr = handle_mode(&mut self.drones[i].modes, ModeInput::Command(verb));
        self.after_transition(i, tr, out);
        let pos = self.drones[i].state.position;
        let bounds = self.world.bounds;
        let climb = |pts: &mut Vec<Vec3>, z: f64| {
            if pos.z < 1.0 {
                pts.push(Vec3::new(pos.x, pos.y, z));
            }
        };
        let cruise = self.cfg.cruise_speed;
        match verb {
            CommandVerb::TakeOff => {
                let z = pos.z.max(self.cfg.altitude);
                self.install(i, verb.clone(), vec![pos, Vec3::new(pos.x, pos.y, z)], cruise, out);
            }
            CommandVerb::Land => self.install(i, verb.clone(), vec![pos, Vec3::new(pos.x, pos.y, 0.0)], cruise, out),
            CommandVerb::Go { direction, distance } => {
                let step = direction.unit(self.drones[i].state.yaw) * distance.unwrap_or(crate::speech::DEFAULT_GO_DISTANCE);
                let mut pts = vec![pos];
                if !matches!(direction, crate::model::Direction::Up | crate::model::Direction::Down) {
                    climb(&mut pts, self.cfg.altitude);
                }
                let from = *pts.last().expect("non-empty");
                pts.push(bounds.clamp(&(from + step)));
                self.install(i, verb.clone(), pts, cruise, out);
            }
            CommandVerb::GoThere { target } => {
                let z = self.flight_z(i);
                let mut pts = vec![pos];
                climb(&mut pts, z);
                pts.push(bounds.clamp(&Vec3::new(target.x, target.y, z)));
                self.install(i, verb.clone(), pts, cruise, out);
            }
            CommandVerb::SearchExpanding | CommandVerb::SearchParallelTrack | CommandVerb::SearchCreepingLine => {
                let kind = match verb {
                    CommandVerb::SearchExpanding => PatternKind::Expanding,
                    CommandVerb::SearchParallelTrack => PatternKind::ParallelTrack,
                    _ => PatternKind::CreepingLine,
                };
                let z = self.flight_z(i);
                let area = Rect::block_around(pos.x, pos.y, self.cfg.search_block, &self.cfg.ground());
                let pattern = generate_pattern(&SearchPatternSpec {
                    kind,
                    area,
                    spacing: self.cfg.pattern_spacing,
                    altitude: z,
                    entry: [pos.x, pos.y],
                });
                let mut pts = vec![pos];
                climb(&mut pts, z);
                pts.extend(pattern.waypoints);
                let speed = self.cfg.search_speed;
                self.install(i, verb.clone(), pts, speed, out);
            }
            CommandVerb::Brake => {
                let d = &mut self.drones[i];
                if let Some(p) = d.plan.take() {
                    let mut rest = vec![d.state.position];
                    rest.extend(p.remaining_after(p.segment()));
                    d.braked = Some((p.task, rest, p.cruise));
                }
                d.hover = d.state.position;
            }
            CommandVerb::Continue => {
                if let Some((task, mut rest, speed)) = self.drones[i].braked.take() {
                    rest[0] = pos;
                    self.install(i, task, rest, speed, out);
                } else {
                    out.push(SimEvent::Ignored { reason: format!("{id}: nothing to continue") });
                }
            }
            CommandVerb::Faster => self.drones[i].time_rate = (self.drones[i].time_rate * 1.2).min(4.0),
            CommandVerb::Slower => self.drones[i].time_rate = (self.drones[i].time_rate * 0.8).max(0.25),
            CommandVerb::RotateClockwise { degrees } | CommandVerb::RotateAntiClockwise { degrees } => {
                let sign = if matches!(verb, CommandVerb::RotateClockwise { .. }) { -1.0 } else { 1.0 };
                let deg = degrees.unwrap_or(crate::speech::DEFAULT_ROTATION_DEG);
                let s = &mut self.drones[i].state;
                s.yaw = normalize_angle(s.yaw + sign * deg.to_radians());
            }
            CommandVerb::RotateOClock { hour } => {
                let s = &mut self.drones[i].state;
                s.yaw = normalize_angle(s.yaw - f64::from(*hour) * 30f64.to_radians());
            }
            CommandVerb::Select | CommandVerb::Switch { .. } => {}
        }
    }

    fn rrt_config(&mut self) -> RrtConfig {
        self.plans += 1;
        RrtConfig {
            seed: self.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ self.plans,
            ..RrtConfig::default()
        }
    }

    /// Replaces straight legs that hit an obstacle with planned detours.
    fn route(&mut self, points: Vec<Vec3>) -> Result<Vec<Vec3>, PlanError> {
        let clearance = RrtConfig::default().clearance;
        let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
        for (k, p) in points.iter().enumerate() {
            match out.last().copied() {
                Some(prev) if k > 0 && !self.world.segment_free(&prev, p, clearance) => {
                    let cfg = self.rrt_config();
                    let detour = plan_path(prev, *p, &self.world, &cfg)?;
                    out.extend(detour.waypoints.into_iter().skip(1));
                }
                _ => out.push(*p),
            }
        }
        Ok(dedup(out))
    }

    fn install(&mut self, i: usize, task: CommandVerb, points: Vec<Vec3>, cruise: f64, out: &mut Vec<SimEvent>) {
        let id = self.drones[i].state.id;
        let kind = task.kind().to_string();
        let fail = |this: &mut Self, reason: String, out: &mut Vec<SimEvent>| {
            let d = &mut this.drones[i];
            d.plan = None;
            d.hover = d.state.position;
            out.push(SimEvent::PlanFailed { drone: id, reason });
            let tr = this.drones[i].modes.task_finished();
            this.after_transition(i, tr, out);
        };
        let points = match self.route(points) {
            Ok(p) => p,
            Err(e) => return fail(self, e.to_string(), out),
        };
        if points.len() < 2 {
            // already there
            out.push(SimEvent::TaskCompleted { drone: id, task: kind });
            self.finish_task(i, &task, out);
            return;
        }
        let tcfg = script::trajectory_config(&self.cfg, cruise);
        match build_trajectory(&Path::new(points.clone()), &tcfg) {
            Ok(trajectory) => {
                out.push(SimEvent::TaskStarted { drone: id, task: kind, waypoints: points.clone(), duration: trajectory.duration() });
                let d = &mut self.drones[i];
                if !matches!(task, CommandVerb::Land) {
                    d.airborne = true;
                }
                d.braked = None;
                d.plan = Some(Plan { task, waypoints: points, trajectory, cruise, tau: 0.0 });
            }
            Err(e) => fail(self, e.to_string(), out),
        }
    }

    /// Installs a ready-made trajectory as the drone's current task.
    pub fn install_trajectory(&mut self, id: DroneId, task: CommandVerb, trajectory: Trajectory) -> bool {
        let Some(i) = self.index(id) else { return false };
        let mut waypoints: Vec<Vec3> = trajectory.segments.iter().map(|s| s.position(0.0)).collect();
        waypoints.extend(trajectory.end());
        let d = &mut self.drones[i];
        if let Some(s) = trajectory.segments.first() {
            d.state.velocity = s.velocity(0.0);
        }
        handle_mode(&mut d.modes, ModeInput::Command(&task));
        d.state.mode = d.modes.mode;
        d.airborne = true;
        d.plan = Some(Plan { task, waypoints, trajectory, cruise: self.cfg.cruise_speed, tau: 0.0 });
        self.sync_tasks();
        true
    }

    fn finish_task(&mut self, i: usize, task: &CommandVerb, out: &mut Vec<SimEvent>) {
        if matches!(task, CommandVerb::Land) {
            self.drones[i].airborne = false;
        }
        let tr = self.drones[i].modes.task_finished();
        self.after_transition(i, tr, out);
    }

    fn replan(&mut self, i: usize, m: Vec3, out: &mut Vec<SimEvent>) -> Vec3 {
        let id = self.drones[i].state.id;
        let Some(plan) = self.drones[i].plan.clone() else {
            let d = &mut self.drones[i];
            d.blend.reset();
            d.hover = m;
            return m;
        };
        let seg = plan.segment();
        let rest = plan.remaining_after(seg);
        let (next, tail) = match rest.split_first() {
            Some((n, t)) => (*n, t.to_vec()),
            None => (m, Vec::new()),
        };
        let rrt = self.rrt_config();
        let tcfg = script::trajectory_config(&self.cfg, plan.cruise);
        let start = self.world.bounds.clamp(&m);
        match replan_on_exit(start, next, &tail, &self.world, &rrt, &tcfg) {
            Ok((path, trajectory)) => {
                out.push(SimEvent::Replanned { drone: id, waypoints: path.waypoints.clone() });
                let d = &mut self.drones[i];
                d.blend.reset();
                d.plan = Some(Plan { task: plan.task, waypoints: dedup(path.waypoints), trajectory, cruise: plan.cruise, tau: 0.0 });
                start
            }
            Err(e) => {
                let d = &mut self.drones[i];
                d.blend.reset();
                d.plan = None;
                d.hover = d.state.position;
                out.push(SimEvent::PlanFailed { drone: id, reason: e.to_string() });
                let tr = self.drones[i].modes.task_finished();
                self.after_transition(i, tr, out);
                self.drones[i].state.position
            }
        }
    }

    fn fly(&mut self, i: usize, out: &mut Vec<SimEvent>) {
        let dt = self.cfg.dt;
        let id = self.drones[i].state.id;
        let d = &mut self.drones[i];
        let a_t = match &mut d.plan {
            Some(p) => {
                p.tau = (p.tau + dt * d.time_rate).min(p.trajectory.duration());
                p.trajectory.position(p.tau).unwrap_or(d.hover)
            }
            None => d.hover,
        };
        let signal = d.nudge.take().map(|delta| InterventionSignal { delta, source: InterventionSource::JoystickGesture });
        d.blend.mixed = d.modes.mixed();
        let (mut m, events) = d.blend.step(a_t, signal.as_ref(), dt);
        let mut replan = false;
        for e in events {
            match e {
                BlendEvent::ReplanRequested { offset } => {
                    out.push(SimEvent::ReplanRequested { drone: id, offset });
                    replan = true;
                }
                BlendEvent::FeedbackPulse { intensity } => {
                    // pulses are reported in steps of 5 %
                    let q = (intensity * 20.0).round() as i64;
                    if d.pulse != Some(q) {
                        d.pulse = Some(q);
                        out.push(SimEvent::FeedbackPulse { drone: id, intensity });
                    }
                }
            }
        }
        if d.blend.h == Vec3::zeros() && d.pulse.take().is_some_and(|q| q != 0) {
            out.push(SimEvent::FeedbackPulse { drone: id, intensity: 0.0 });
        }
        if replan {
            m = self.replan(i, m, out);
        }
        let (max_speed, max_climb) = (self.cfg.max_speed, self.cfg.max_climb);
        let bounds = self.world.bounds;
        let d = &mut self.drones[i];
        let mut v = (m - d.state.position) / dt;
        if v.z.abs() > max_climb {
            v.z = max_climb.copysign(v.z);
        }
        let speed = v.norm();
        if speed > max_speed {
            v *= max_speed / speed;
        }
        let before = d.state.position;
        d.state.position = bounds.clamp(&(before + v * dt));
        d.state.velocity = (d.state.position - before) / dt;
        if d.airborne {
            d.state.battery = (d.state.battery - dt).max(0.0);
        }

        if d.blend.h == Vec3::zeros() {
            let tr = d.modes.offset_settled();
            if tr.changed() {
                self.after_transition(i, tr, out);
            }
        }
        let d = &mut self.drones[i];
        let done = d
            .plan
            .as_ref()
            .is_some_and(|p| p.tau >= p.trajectory.duration() && (d.state.position - m).norm() < 0.05);
        if done {
            let p = d.plan.take().expect("checked");
            d.hover = p.trajectory.end().unwrap_or(d.state.position);
            out.push(SimEvent::TaskCompleted { drone: id, task: p.task.kind().to_string() });
            self.finish_task(i, &p.task, out);
        }
        let d = &mut self.drones[i];
        let landing = d.plan.as_ref().is_some_and(|p| matches!(p.task, CommandVerb::Land));
        if d.airborne && d.state.battery <= 0.0 && !landing {
            out.push(SimEvent::BatteryDepleted { drone: id });
            let pos = d.state.position;
            let tr = handle_mode(&mut d.modes, ModeInput::Command(&CommandVerb::Land));
            self.after_transition(i, tr, out);
            self.install(i, CommandVerb::Land, vec![pos, Vec3::new(pos.x, pos.y, 0.0)], self.cfg.cruise_speed, out);
        }
    }

    fn selection_bucket(&self) -> String {
        match self.selection.as_slice() {
            [] => metrics::NONE_BUCKET.to_string(),
            [one] => one.to_string(),
            s if s.len() == self.drones.len() => metrics::ALL_BUCKET.to_string(),
            s => s.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("+"),
        }
    }

    /// Advances one tick of `dt`.
    pub fn step(&mut self) -> Vec<SimEvent> {
        let mut out = Vec::new();
        if self.ended {
            return out;
        }
        let now = self.clock();
        for o in self.op.fusion.poll(now) {
            self.execute(o, &mut out);
        }
        for i in 0..self.drones.len() {
            self.fly(i, &mut out);
        }
        self.sync_tasks();
        self.tick += 1;
        let dt = self.cfg.dt;
        self.metrics.elapsed = self.clock();
        *self.metrics.selection_time.entry(self.selection_bucket()).or_insert(0.0) += dt;
        for d in &self.drones {
            *self.metrics.mode_time.entry(d.state.id).or_default().entry(d.state.mode).or_insert(0.0) += dt;
        }
        if self.tick % self.telemetry_every == 0 {
            out.push(SimEvent::Telemetry { drones: self.drone_states() });
        }
        if self.clock() >= self.cfg.deadline - 1e-9 {
            for o in self.op.fusion.drain(self.clock()) {
                self.execute(o, &mut out);
            }
            self.ended = true;
            out.push(SimEvent::MissionEnded { metrics: self.metrics.clone() });
        }
        out
    }

    /// Steps until the clock reaches `t` or the mission ends.
    pub fn run_until(&mut self, t: f64, mut sink: impl FnMut(f64, SimEvent)) {
        while !self.ended && self.clock() < t - 1e-9 {
            for e in self.step() {
                sink(self.clock(), e);
            }
        }
    }

    /// Plays a script to the deadline.
    pub fn run_script(&mut self, script: &OperatorScript, mut sink: impl FnMut(f64, SimEvent)) -> Result<(), SimError> {
        script.validate(&self.cfg)?;
        for e in &script.events {
            self.run_until(e.timestamp, &mut sink);
            let now = self.clock();
            for ev in self.apply(e) {
                sink(now, ev);
            }
        }
        self.run_until(self.cfg.deadline, sink);
        Ok(())
    }
}

/// Runs a scripted mission without any client attached.
pub fn run_headless(cfg: &ScenarioConfig, script: &OperatorScript) -> Result<MissionMetrics, SimError> {
    let mut m = Mission::new(cfg.clone())?;
    m.run_script(script, |_, _| {})?;
    Ok(m.metrics)
}

/// [`run_headless`] with templates shared across runs.
pub fn run_headless_with(cfg: &ScenarioConfig, script: &OperatorScript, templates: &TrainingSet) -> Result<MissionMetrics, SimError> {
    cfg.validate()?;
    let mut m = Mission::with_templates(cfg.clone(), templates.clone());
    m.run_script(script, |_, _| {})?;
    Ok(m.metrics)
}
