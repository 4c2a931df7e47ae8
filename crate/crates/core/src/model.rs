//! Shared domain vocabulary: commands, selections, drone and world state, operator events.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Obstacle};
use crate::Vec3;

/// Default half-angle of the pointing cone used to pick a drone, in degrees.
pub const DEFAULT_POINTING_CONE_DEG: f64 = 15.0;

/// Default capacity of an N-best list.
pub const DEFAULT_NBEST: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no drone matches the selection")]
    NoMatch,
    #[error("empty fleet")]
    EmptyFleet,
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("invalid drone id `{0}`")]
    InvalidDroneId(String),
}

/// Drone identifier, rendered as `d<N>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DroneId(pub u32);

impl fmt::Display for DroneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

impl FromStr for DroneId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('d')
            .and_then(|n| n.parse().ok())
            .map(DroneId)
            .ok_or_else(|| ModelError::InvalidDroneId(s.to_string()))
    }
}

impl TryFrom<String> for DroneId {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DroneId> for String {
    fn from(id: DroneId) -> Self {
        id.to_string()
    }
}

/// A pointing gesture: a ray in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointingRay {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl PointingRay {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self { origin, direction }
    }

    pub fn is_finite(&self) -> bool {
        self.origin.iter().chain(self.direction.iter()).all(|v| v.is_finite())
            && self.direction.norm() > 0.0
    }

    /// Angle in radians between the ray and the direction towards `p`.
    pub fn angle_to(&self, p: &Vec3) -> f64 {
        let to = p - self.origin;
        let denom = to.norm() * self.direction.norm();
        if denom == 0.0 {
            return 0.0;
        }
        (to.dot(&self.direction) / denom).clamp(-1.0, 1.0).acos()
    }
}

/// Which drones a command addresses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    /// Whatever the operator currently has selected.
    Current,
    All,
    Drones { ids: Vec<DroneId> },
    /// "you": bound to a pointing ray during fusion, else falls back to the current selection.
    Deictic,
    /// Resolved against the fleet with [`resolve_selection`].
    Pointed { ray: PointingRay },
}

impl Selection {
    pub fn drones(ids: impl IntoIterator<Item = DroneId>) -> Self {
        let mut ids: Vec<_> = ids.into_iter().collect();
        ids.sort();
        ids.dedup();
        Selection::Drones { ids }
    }

    /// True when the selection says nothing beyond "whatever is current".
    pub fn is_implicit(&self) -> bool {
        matches!(self, Selection::Current)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    Ahead,
    Backward,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::Ahead,
        Direction::Backward,
    ];

    /// Unit vector in a body frame with the given yaw (x ahead, y left, z up).
    pub fn unit(self, yaw: f64) -> Vec3 {
        let (s, c) = yaw.sin_cos();
        match self {
            Direction::Up => Vec3::z(),
            Direction::Down => -Vec3::z(),
            Direction::Ahead => Vec3::new(c, s, 0.0),
            Direction::Backward => Vec3::new(-c, -s, 0.0),
            Direction::Left => Vec3::new(-s, c, 0.0),
            Direction::Right => Vec3::new(s, -c, 0.0),
        }
    }
}

/// Interaction metaphor targeted by a `Switch` command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metaphor {
    Command,
    Joystick,
}

/// The sixteen primitive commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum CommandVerb {
    TakeOff,
    Continue,
    Land,
    RotateOClock { hour: u8 },
    Select,
    Faster,
    Slower,
    RotateClockwise { degrees: Option<f64> },
    RotateAntiClockwise { degrees: Option<f64> },
    Brake,
    Go { direction: Direction, distance: Option<f64> },
    SearchExpanding,
    SearchParallelTrack,
    SearchCreepingLine,
    GoThere { target: Vec3 },
    Switch { metaphor: Metaphor },
}

impl CommandVerb {
    /// Stable kind name, also used by the fusion rule file.
    pub fn kind(&self) -> &'static str {
        match self {
            CommandVerb::TakeOff => "TakeOff",
            CommandVerb::Continue => "Continue",
            CommandVerb::Land => "Land",
            CommandVerb::RotateOClock { .. } => "RotateOClock",
            CommandVerb::Select => "Select",
            CommandVerb::Faster => "Faster",
            CommandVerb::Slower => "Slower",
            CommandVerb::RotateClockwise { .. } => "RotateClockwise",
            CommandVerb::RotateAntiClockwise { .. } => "RotateAntiClockwise",
            CommandVerb::Brake => "Brake",
            CommandVerb::Go { .. } => "Go",
            CommandVerb::SearchExpanding => "SearchExpanding",
            CommandVerb::SearchParallelTrack => "SearchParallelTrack",
            CommandVerb::SearchCreepingLine => "SearchCreepingLine",
            CommandVerb::GoThere { .. } => "GoThere",
            CommandVerb::Switch { .. } => "Switch",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CommandVerb::RotateOClock { hour } if !(1..=12).contains(hour) => Err(
                ModelError::InvalidCommand(format!("o'clock hour {hour} outside 1..=12")),
            ),
            CommandVerb::Go {
                distance: Some(d), ..
            } if !(d.is_finite() && *d > 0.0) => Err(ModelError::InvalidCommand(format!(
                "go distance {d} must be positive"
            ))),
            CommandVerb::RotateClockwise { degrees: Some(d) }
            | CommandVerb::RotateAntiClockwise { degrees: Some(d) }
                if !d.is_finite() =>
            {
                Err(ModelError::InvalidCommand("rotation must be finite".into()))
            }
            CommandVerb::GoThere { target } if !target.iter().all(|v| v.is_finite()) => Err(
                ModelError::InvalidCommand("go-there target must be finite".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Same command kind, parameters aside.
    pub fn same_kind(&self, other: &CommandVerb) -> bool {
        match (self, other) {
            (CommandVerb::Go { direction: a, .. }, CommandVerb::Go { direction: b, .. }) => a == b,
            (CommandVerb::Switch { metaphor: a }, CommandVerb::Switch { metaphor: b }) => a == b,
            _ => self.kind() == other.kind(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Speech,
    Gesture,
    Fused,
}

/// A parsed operator intention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    #[serde(flatten)]
    pub verb: CommandVerb,
    pub selection: Selection,
    pub confidence: f64,
    pub source: Source,
    pub timestamp: f64,
    /// Set when a missing parameter was filled with its default.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub defaulted: bool,
}

impl Command {
    pub fn new(verb: CommandVerb, selection: Selection, confidence: f64, source: Source, timestamp: f64) -> Self {
        Self {
            verb,
            selection,
            confidence: confidence.clamp(0.0, 1.0),
            source,
            timestamp,
            defaulted: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(ModelError::InvalidCommand(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        self.verb.validate()
    }
}

/// The fourteen trained arm gestures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GestureLabel {
    Brake,
    GoAhead,
    GoBackward,
    GoDown,
    GoLeft,
    GoRight,
    GoUp,
    RotateAntiClockwise,
    RotateClockwise,
    SearchCreepingLine,
    SearchExpanding,
    SearchParallelTrack,
    Faster,
    Slower,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 14] = [
        GestureLabel::Brake,
        GestureLabel::GoAhead,
        GestureLabel::GoBackward,
        GestureLabel::GoDown,
        GestureLabel::GoLeft,
        GestureLabel::GoRight,
        GestureLabel::GoUp,
        GestureLabel::RotateAntiClockwise,
        GestureLabel::RotateClockwise,
        GestureLabel::SearchCreepingLine,
        GestureLabel::SearchExpanding,
        GestureLabel::SearchParallelTrack,
        GestureLabel::Faster,
        GestureLabel::Slower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::Brake => "brake",
            GestureLabel::GoAhead => "go-ahead",
            GestureLabel::GoBackward => "go-backward",
            GestureLabel::GoDown => "go-down",
            GestureLabel::GoLeft => "go-left",
            GestureLabel::GoRight => "go-right",
            GestureLabel::GoUp => "go-up",
            GestureLabel::RotateAntiClockwise => "rotate-anti-clockwise",
            GestureLabel::RotateClockwise => "rotate-clockwise",
            GestureLabel::SearchCreepingLine => "search-creeping-line",
            GestureLabel::SearchExpanding => "search-expanding",
            GestureLabel::SearchParallelTrack => "search-parallel-track",
            GestureLabel::Faster => "faster",
            GestureLabel::Slower => "slower",
        }
    }

    /// The command a gesture stands for, parameters left to defaults or fusion.
    pub fn verb(self) -> CommandVerb {
        let go = |direction| CommandVerb::Go {
            direction,
            distance: None,
        };
        match self {
            GestureLabel::Brake => CommandVerb::Brake,
            GestureLabel::GoAhead => go(Direction::Ahead),
            GestureLabel::GoBackward => go(Direction::Backward),
            GestureLabel::GoDown => go(Direction::Down),
            GestureLabel::GoLeft => go(Direction::Left),
            GestureLabel::GoRight => go(Direction::Right),
            GestureLabel::GoUp => go(Direction::Up),
            GestureLabel::RotateAntiClockwise => CommandVerb::RotateAntiClockwise { degrees: None },
            GestureLabel::RotateClockwise => CommandVerb::RotateClockwise { degrees: None },
            GestureLabel::SearchCreepingLine => CommandVerb::SearchCreepingLine,
            GestureLabel::SearchExpanding => CommandVerb::SearchExpanding,
            GestureLabel::SearchParallelTrack => CommandVerb::SearchParallelTrack,
            GestureLabel::Faster => CommandVerb::Faster,
            GestureLabel::Slower => CommandVerb::Slower,
        }
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GestureLabel::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown gesture label `{s}`"))
    }
}

/// What a single channel believes the operator meant. Partial intents only
/// become commands once fused with another channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "intent", rename_all = "snake_case")]
pub enum Intent {
    Command { verb: CommandVerb },
    /// "go there" still waiting for a pointed target.
    GoTherePending,
    /// A bare distance ("three meters").
    Distance { meters: f64 },
    /// A bare clock direction ("three o'clock").
    Hour { hour: u8 },
    Pointing { ray: PointingRay },
}

impl Intent {
    pub fn command(verb: CommandVerb) -> Self {
        Intent::Command { verb }
    }

    /// Kind name used by the fusion rule file.
    pub fn kind(&self) -> &'static str {
        match self {
            Intent::Command { verb } => verb.kind(),
            Intent::GoTherePending => "There",
            Intent::Distance { .. } => "Distance",
            Intent::Hour { .. } => "Hour",
            Intent::Pointing { .. } => "Pointing",
        }
    }

    pub const KINDS: [&'static str; 20] = [
        "TakeOff",
        "Continue",
        "Land",
        "RotateOClock",
        "Select",
        "Faster",
        "Slower",
        "RotateClockwise",
        "RotateAntiClockwise",
        "Brake",
        "Go",
        "SearchExpanding",
        "SearchParallelTrack",
        "SearchCreepingLine",
        "GoThere",
        "Switch",
        "There",
        "Distance",
        "Hour",
        "Pointing",
    ];
}

/// A single N-best entry: intent plus who it addresses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    #[serde(flatten)]
    pub intent: Intent,
    pub selection: Selection,
}

impl Interpretation {
    pub fn new(intent: Intent, selection: Selection) -> Self {
        Self { intent, selection }
    }
}

impl From<GestureLabel> for Interpretation {
    fn from(label: GestureLabel) -> Self {
        Interpretation::new(Intent::command(label.verb()), Selection::Current)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored<T> {
    pub item: T,
    pub score: f64,
}

/// Ranked interpretations, highest score first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NBestList<T> {
    entries: Vec<Scored<T>>,
}

impl<T> NBestList<T> {
    /// Sorts by descending score (stable, so equal scores keep input order),
    /// drops non-finite or negative scores and keeps at most `n` entries.
    pub fn from_scored(items: impl IntoIterator<Item = (T, f64)>, n: usize) -> Self {
        let mut entries: Vec<Scored<T>> = items
            .into_iter()
            .filter(|(_, s)| s.is_finite() && *s >= 0.0)
            .map(|(item, score)| Scored { item, score })
            .collect();
        entries.sort_by(|a, b| b.score.total_cmp(&a.score));
        entries.truncate(n);
        Self { entries }
    }

    pub fn single(item: T, score: f64) -> Self {
        Self::from_scored([(item, score)], 1)
    }

    pub fn top(&self) -> Option<&Scored<T>> {
        self.entries.first()
    }

    pub fn entries(&self) -> &[Scored<T>] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scored<T>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].score >= w[1].score)
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> NBestList<U> {
        NBestList {
            entries: self
                .entries
                .into_iter()
                .map(|s| Scored {
                    item: f(s.item),
                    score: s.score,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Autonomous,
    MixedInitiative,
    Teleoperated,
}

impl ControlMode {
    pub const ALL: [ControlMode; 3] = [
        ControlMode::Autonomous,
        ControlMode::MixedInitiative,
        ControlMode::Teleoperated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Autonomous => "autonomous",
            ControlMode::MixedInitiative => "mixed_initiative",
            ControlMode::Teleoperated => "teleoperated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub id: DroneId,
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub mode: ControlMode,
    pub active_task: Option<CommandVerb>,
    /// Seconds of flight left.
    pub battery: f64,
}

impl DroneState {
    pub fn new(id: DroneId, position: Vec3, battery: f64) -> Self {
        Self {
            id,
            position,
            velocity: Vec3::zeros(),
            yaw: 0.0,
            mode: ControlMode::Autonomous,
            active_task: None,
            battery,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Victim {
    pub position: Vec3,
    #[serde(default)]
    pub found: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub bounds: Aabb,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub victims: Vec<Victim>,
}

impl WorldModel {
    pub fn empty(bounds: Aabb) -> Self {
        Self {
            bounds,
            obstacles: Vec::new(),
            victims: Vec::new(),
        }
    }

    pub fn point_free(&self, p: &Vec3, clearance: f64) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p, clearance))
    }

    pub fn segment_free(&self, a: &Vec3, b: &Vec3, clearance: f64) -> bool {
        self.bounds.contains(a)
            && self.bounds.contains(b)
            && !self
                .obstacles
                .iter()
                .any(|o| o.intersects_segment(a, b, clearance))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandPose {
    Open,
    Closed,
    Other,
}

/// One IMU reading from the armband.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    /// Sensor-frame specific force, m/s².
    pub accel: Vec3,
    /// Sensor→world rotation as `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotionTrace {
    pub samples: Vec<ImuSample>,
}

/// Alternative transcript from the recognizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHypothesis {
    pub text: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorPayload {
    Transcript {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        alternatives: Vec<TranscriptHypothesis>,
    },
    MotionTrace {
        trace: MotionTrace,
    },
    PoseChange {
        pose: HandPose,
    },
    PointingRay {
        ray: PointingRay,
    },
    JoystickDelta {
        delta: Vec3,
    },
    /// Tablet confirmation of a victim seen by the selected drone(s).
    Mark,
}

impl OperatorPayload {
    pub fn transcript(text: impl Into<String>) -> Self {
        OperatorPayload::Transcript {
            text: text.into(),
            confidence: None,
            alternatives: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorEvent {
    pub timestamp: f64,
    #[serde(flatten)]
    pub payload: OperatorPayload,
}

impl OperatorEvent {
    pub fn new(timestamp: f64, payload: OperatorPayload) -> Self {
        Self { timestamp, payload }
    }
}

/// Session table mapping spoken names to drones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneNames {
    pub names: Vec<(String, DroneId)>,
}

impl Default for DroneNames {
    fn default() -> Self {
        let colors = ["red", "blue", "green", "yellow", "white", "black"];
        Self {
            names: colors
                .iter()
                .enumerate()
                .map(|(i, c)| (format!("{c} hawk"), DroneId(i as u32 + 1)))
                .collect(),
        }
    }
}

impl DroneNames {
    pub fn lookup(&self, name: &str) -> Option<DroneId> {
        let name = name.trim().to_lowercase();
        let singular = name.strip_suffix('s').unwrap_or(&name);
        self.names
            .iter()
            .find(|(n, _)| *n == name || *n == singular)
            .map(|(_, id)| *id)
    }

    pub fn name_of(&self, id: DroneId) -> Option<&str> {
        self.names.iter().find(|(_, i)| *i == id).map(|(n, _)| n.as_str())
    }
}

/// Input to [`resolve_selection`].
#[derive(Clone, Copy, Debug)]
pub enum SelectionInput<'a> {
    Phrase(&'a str),
    Ray(&'a PointingRay),
}

/// Resolve a spoken phrase or a pointing ray to a set of drones.
///
/// Rays pick the drone with the smallest angular error inside a cone of
/// `cone_deg` half-angle; equal errors go to the lowest id.
pub fn resolve_selection(
    input: SelectionInput<'_>,
    fleet: &[DroneState],
    names: &DroneNames,
    cone_deg: f64,
) -> Result<Vec<DroneId>, ModelError> {
    if fleet.is_empty() {
        return Err(ModelError::EmptyFleet);
    }
    let mut ids: Vec<DroneId> = fleet.iter().map(|d| d.id).collect();
    ids.sort();
    match input {
        SelectionInput::Phrase(phrase) => {
            let p = phrase.trim().to_lowercase();
            if p == "all hawks" || p == "all" || p == "all drones" {
                return Ok(ids);
            }
            names
                .lookup(&p)
                .filter(|id| ids.contains(id))
                .map(|id| vec![id])
                .ok_or(ModelError::NoMatch)
        }
        SelectionInput::Ray(ray) => {
            if !ray.is_finite() {
                return Err(ModelError::NoMatch);
            }
            let cone = cone_deg.to_radians();
            let mut sorted: Vec<&DroneState> = fleet.iter().collect();
            sorted.sort_by_key(|d| d.id);
            let mut best: Option<(f64, DroneId)> = None;
            for d in sorted {
                let angle = ray.angle_to(&d.position);
                if angle <= cone && best.is_none_or(|(b, _)| angle < b) {
                    best = Some((angle, d.id));
                }
            }
            best.map(|(_, id)| vec![id]).ok_or(ModelError::NoMatch)
        }
    }
}
