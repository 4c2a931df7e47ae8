//! Mixed-initiative control: operator offsets blended into the planned
//! trajectory, interaction-mode switching and replanning on workspace exit.
//!
//! While the operator intervenes, the offset accumulates,
//! `h(t) = h(t-1) + human(t)`; otherwise it shrinks linearly toward zero at a
//! fixed rate. The flown position is `m(t) = a(t) + h(t)`.
//!
//! Decay acts on the length of `h` and keeps its direction. Decaying each
//! axis at the same rate instead would zero the short components first and
//! swing the offset toward its longest axis.

use serde::{Deserialize, Serialize};

use crate::model::{CommandVerb, ControlMode, HandPose, Metaphor, WorldModel};
use crate::planning::{build_trajectory, plan_path, Path, PlanError, RrtConfig, Trajectory, TrajectoryConfig};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    pub workspace_radius: f64,
    /// Decay speed of the offset once released, m/s.
    pub lambda_rate: f64,
    /// Largest intervention accepted per tick, meters.
    pub max_intervention: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { workspace_radius: 2.0, lambda_rate: 0.5, max_intervention: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionSource {
    JoystickGesture,
    VoiceNudge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionSignal {
    pub delta: Vec3,
    pub source: InterventionSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum BlendEvent {
    ReplanRequested { offset: f64 },
    FeedbackPulse { intensity: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendState {
    pub h: Vec3,
    pub mixed: bool,
    pub workspace_radius: f64,
    pub lambda_rate: f64,
    pub max_intervention: f64,
    /// Set while |h| is beyond the workspace radius.
    pub outside: bool,
}

impl BlendState {
    pub fn new(cfg: &BlendConfig) -> Self {
        Self {
            h: Vec3::zeros(),
            mixed: false,
            workspace_radius: cfg.workspace_radius,
            lambda_rate: cfg.lambda_rate,
            max_intervention: cfg.max_intervention,
            outside: false,
        }
    }

    /// Advances one tick in place; returns `m_t` and the events raised.
    pub fn step(&mut self, a_t: Vec3, u: Option<&InterventionSignal>, dt: f64) -> (Vec3, Vec<BlendEvent>) {
        let mut events = Vec::new();
        if !(dt > 0.0) {
            return (a_t + self.h, events);
        }
        match u {
            Some(u) if self.mixed => {
                let d = u.delta;
                let n = d.norm();
                let d = if n > self.max_intervention && n > 0.0 { d * (self.max_intervention / n) } else { d };
                self.h += d;
            }
            _ => {
                let n = self.h.norm();
                let step = (self.lambda_rate * dt).min(n);
                if n > 0.0 {
                    self.h -= self.h * (step / n);
                }
                if self.h.norm() < 1e-9 {
                    self.h = Vec3::zeros();
                }
            }
        }
        let n = self.h.norm();
        if n > self.workspace_radius {
            if !self.outside {
                self.outside = true;
                events.push(BlendEvent::ReplanRequested { offset: n });
            }
        } else {
            self.outside = false;
        }
        if n > 0.0 {
            events.push(BlendEvent::FeedbackPulse { intensity: (n / self.workspace_radius).min(1.0) });
        }
        (a_t + self.h, events)
    }

    /// Clears the offset after a replan has absorbed it.
    pub fn reset(&mut self) {
        self.h = Vec3::zeros();
        self.outside = false;
    }
}

/// Pure form of [`BlendState::step`].
pub fn step_blend(
    s: &BlendState,
    a_t: Vec3,
    u: Option<&InterventionSignal>,
    dt: f64,
) -> (Vec3, BlendState, Vec<BlendEvent>) {
    let mut next = s.clone();
    let (m, ev) = next.step(a_t, u, dt);
    (m, next, ev)
}

/// Interaction state of one drone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub mode: ControlMode,
    pub metaphor: Metaphor,
    /// Task being executed.
    pub task: Option<CommandVerb>,
    /// Task stopped by a brake, resumable with Continue.
    pub braked: Option<CommandVerb>,
}

impl Default for ModeState {
    fn default() -> Self {
        Self { mode: ControlMode::Autonomous, metaphor: Metaphor::Command, task: None, braked: None }
    }
}

impl ModeState {
    /// Whether operator interventions feed the blend.
    pub fn mixed(&self) -> bool {
        self.mode == ControlMode::MixedInitiative && self.metaphor == Metaphor::Joystick
    }

    fn with_task(&self) -> ControlMode {
        match (self.metaphor, self.task.is_some()) {
            (Metaphor::Joystick, true) => ControlMode::MixedInitiative,
            (Metaphor::Joystick, false) => ControlMode::Teleoperated,
            (Metaphor::Command, _) => ControlMode::Autonomous,
        }
    }

    /// The running task has finished.
    pub fn task_finished(&mut self) -> ModeTransition {
        let from = self.mode;
        self.task = None;
        if self.metaphor == Metaphor::Joystick || self.mode != ControlMode::Teleoperated {
            self.mode = self.with_task();
        }
        self.transition(from)
    }

    /// The operator offset has decayed to zero.
    pub fn offset_settled(&mut self) -> ModeTransition {
        let from = self.mode;
        if self.mode == ControlMode::MixedInitiative && self.metaphor == Metaphor::Command {
            self.mode = ControlMode::Autonomous;
        }
        self.transition(from)
    }

    fn transition(&self, from: ControlMode) -> ModeTransition {
        ModeTransition { from, to: self.mode, mixed: self.mixed() }
    }
}

/// Commands that start a task the drone executes over time.
pub fn starts_task(v: &CommandVerb) -> bool {
    matches!(
        v,
        CommandVerb::TakeOff
            | CommandVerb::Land
            | CommandVerb::Go { .. }
            | CommandVerb::GoThere { .. }
            | CommandVerb::SearchExpanding
            | CommandVerb::SearchParallelTrack
            | CommandVerb::SearchCreepingLine
    )
}

#[derive(Clone, Copy, Debug)]
pub enum ModeInput<'a> {
    Pose(HandPose),
    Command(&'a CommandVerb),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeTransition {
    pub from: ControlMode,
    pub to: ControlMode,
    pub mixed: bool,
}

impl ModeTransition {
    pub fn changed(&self) -> bool {
        self.from != self.to
    }
}

fn open_hand(s: &mut ModeState) {
    s.metaphor = Metaphor::Joystick;
    s.mode = s.with_task();
}

fn close_hand(s: &mut ModeState) {
    // the mode stays until the offset has decayed or a command arrives
    s.metaphor = Metaphor::Command;
}

/// Applies a pose change or command to the interaction state.
pub fn handle_mode(s: &mut ModeState, input: ModeInput<'_>) -> ModeTransition {
    let from = s.mode;
    match input {
        ModeInput::Pose(HandPose::Open) => open_hand(s),
        ModeInput::Pose(_) => close_hand(s),
        ModeInput::Command(CommandVerb::Switch { metaphor: Metaphor::Joystick }) => open_hand(s),
        ModeInput::Command(CommandVerb::Switch { metaphor: Metaphor::Command }) => close_hand(s),
        ModeInput::Command(CommandVerb::Brake) => {
            if let Some(t) = s.task.take() {
                s.braked = Some(t);
            }
            s.mode = s.with_task();
        }
        ModeInput::Command(CommandVerb::Continue) => {
            if let Some(t) = s.braked.take() {
                s.task = Some(t);
            }
            s.mode = s.with_task();
        }
        ModeInput::Command(v) if starts_task(v) => {
            s.task = Some(v.clone());
            s.braked = None;
            s.mode = s.with_task();
        }
        ModeInput::Command(_) => {}
    }
    s.transition(from)
}

/// New path and trajectory from the current mixed position through the next
/// waypoint and on along the remaining ones.
pub fn replan_on_exit(
    position: Vec3,
    next_waypoint: Vec3,
    remaining: &[Vec3],
    world: &WorldModel,
    rrt: &RrtConfig,
    traj: &TrajectoryConfig,
) -> Result<(Path, Trajectory), PlanError> {
    let head = plan_path(position, next_waypoint, world, rrt)?;
    let mut wps = head.waypoints;
    wps.extend_from_slice(remaining);
    let path = Path::new(wps);
    let trajectory = build_trajectory(&path, traj)?;
    Ok((path, trajectory))
}
