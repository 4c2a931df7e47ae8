//! Late fusion of speech, gesture and pointing interpretations.
//!
//! The first event opens a synchronization window. A second event from a
//! different channel that starts inside the window is fused with it and the
//! window closes; otherwise the pending event is emitted alone when the
//! window times out. While a channel is known to be active (the hand is
//! closed for a gesture) the window is held open until its event arrives.

pub mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rules::{RuleError, RuleSet};
use rules::{Action, Preference, Template};

use crate::geometry::Aabb;
use crate::model::{
    Command, CommandVerb, GestureLabel, Intent, Interpretation, NBestList, PointingRay, Scored, Selection, Source,
};
use crate::speech::default_parameters;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Speech,
    Gesture,
    Pointing,
}

impl Channel {
    fn source(self) -> Source {
        match self {
            Channel::Speech => Source::Speech,
            Channel::Gesture | Channel::Pointing => Source::Gesture,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub channel: Channel,
    pub nbest: NBestList<Interpretation>,
    pub start: f64,
    pub end: f64,
}

impl ChannelEvent {
    pub fn speech(nbest: NBestList<Interpretation>, t: f64) -> Self {
        Self { channel: Channel::Speech, nbest, start: t, end: t }
    }

    pub fn gesture(nbest: &NBestList<GestureLabel>, start: f64, end: f64) -> Self {
        Self {
            channel: Channel::Gesture,
            nbest: nbest.clone().map(Interpretation::from),
            start,
            end,
        }
    }

    pub fn pointing(ray: PointingRay, t: f64) -> Self {
        Self {
            channel: Channel::Pointing,
            nbest: NBestList::single(Interpretation::new(Intent::Pointing { ray }, Selection::Current), 1.0),
            start: t,
            end: t,
        }
    }

    fn check(&self) -> Result<(), String> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err("non-finite event time".into());
        }
        if self.end < self.start {
            return Err("event ends before it starts".into());
        }
        if self.nbest.is_empty() {
            return Err("empty n-best list".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Start,
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub duration: f64,
    pub anchor: Anchor,
    /// Confidence bonus when both channels agree.
    pub reinforcement: f64,
    /// Longest a window is held past its timeout for an active channel.
    pub max_hold: f64,
    /// Ground area pointed targets are clamped to.
    pub bounds: Aabb,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            duration: 1.0,
            anchor: Anchor::Start,
            reinforcement: 0.1,
            max_hold: 3.0,
            bounds: Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(120.0, 120.0, 100.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FusionOutcome {
    Command { command: Command },
    Rejected { timestamp: f64, reason: String },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DeicticError {
    #[error("pointing ray never meets the ground")]
    AboveHorizon,
}

/// Where a pointing ray meets the ground plane, clamped to `bounds`.
pub fn resolve_deictic(ray: &PointingRay, bounds: &Aabb) -> Result<Vec3, DeicticError> {
    let d = ray.direction;
    if !ray.is_finite() || d.z >= 0.0 || ray.origin.z < 0.0 {
        return Err(DeicticError::AboveHorizon);
    }
    let t = -ray.origin.z / d.z;
    let hit = ray.origin + d * t;
    let clamped = bounds.clamp(&Vec3::new(hit.x, hit.y, 0.0));
    Ok(Vec3::new(clamped.x, clamped.y, 0.0))
}

fn finish(mut c: Command) -> Command {
    if c.selection == Selection::Deictic {
        c.selection = Selection::Current;
    }
    default_parameters(c)
}

fn merge_selection(preferred: &Selection, other: &Selection) -> Selection {
    let explicit = |s: &Selection| !matches!(s, Selection::Current | Selection::Deictic);
    if explicit(preferred) || !explicit(other) {
        preferred.clone()
    } else {
        other.clone()
    }
}

fn standalone(i: &Interpretation) -> bool {
    !matches!(i.intent, Intent::Distance { .. } | Intent::GoTherePending)
}

/// A single interpretation turned into a command, if it can stand alone.
fn lone(i: &Interpretation, confidence: f64, source: Source, t: f64) -> Result<Command, String> {
    let (verb, selection) = match &i.intent {
        Intent::Command { verb } => (verb.clone(), i.selection.clone()),
        Intent::Hour { hour } => (CommandVerb::RotateOClock { hour: *hour }, i.selection.clone()),
        Intent::Pointing { ray } => (CommandVerb::Select, Selection::Pointed { ray: *ray }),
        Intent::Distance { .. } => return Err("distance given without a motion command".into()),
        Intent::GoTherePending => return Err("\"go there\" without a pointing gesture".into()),
    };
    let c = finish(Command::new(verb, selection, confidence, source, t));
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn combine(template: Template, x: &Interpretation, y: &Interpretation, bounds: &Aabb) -> Result<Interpretation, String> {
    let mismatch = || format!("rule template {template:?} does not fit ({}, {})", x.intent.kind(), y.intent.kind());
    let verb = match (template, &x.intent, &y.intent) {
        (Template::GoDistance, Intent::Command { verb: CommandVerb::Go { direction, .. } }, Intent::Distance { meters }) => {
            CommandVerb::Go { direction: *direction, distance: Some(*meters) }
        }
        (
            Template::RotateOClock,
            Intent::Command { verb: CommandVerb::RotateClockwise { .. } | CommandVerb::RotateAntiClockwise { .. } },
            Intent::Hour { hour },
        ) => CommandVerb::RotateOClock { hour: *hour },
        (Template::GoThere, Intent::GoTherePending, Intent::Pointing { ray }) => {
            let target = resolve_deictic(ray, bounds).map_err(|e| e.to_string())?;
            CommandVerb::GoThere { target }
        }
        (Template::SelectVerb, Intent::Command { verb: CommandVerb::Select }, Intent::Command { verb }) => {
            return Ok(Interpretation::new(Intent::command(verb.clone()), merge_selection(&x.selection, &y.selection)));
        }
        (Template::PointSelect, Intent::Pointing { ray }, Intent::Command { verb }) => {
            let sel = merge_selection(&y.selection, &Selection::Pointed { ray: *ray });
            return Ok(Interpretation::new(Intent::command(verb.clone()), sel));
        }
        _ => return Err(mismatch()),
    };
    Ok(Interpretation::new(Intent::command(verb), merge_selection(&x.selection, &y.selection)))
}

type Pick<'a> = (&'a Scored<Interpretation>, Channel);

/// Higher confidence first, exact ties to speech; a fragment never beats a
/// usable command.
fn pick_max<'a>(x: Pick<'a>, y: Pick<'a>) -> (Pick<'a>, Pick<'a>) {
    let x_wins = if x.0.score != y.0.score {
        x.0.score > y.0.score
    } else {
        y.1 != Channel::Speech
    };
    let (w, l) = if x_wins { (x, y) } else { (y, x) };
    if !standalone(&w.0.item) && standalone(&l.0.item) {
        (l, w)
    } else {
        (w, l)
    }
}

/// Fuses two synchronized events into one command.
pub fn fuse(a: &ChannelEvent, b: &ChannelEvent, rules: &RuleSet, cfg: &FusionConfig, t: f64) -> Result<Command, String> {
    let (ta, tb) = match (a.nbest.top(), b.nbest.top()) {
        (Some(x), Some(y)) => (x, y),
        (Some(x), None) => return lone(&x.item, x.score, a.channel.source(), t),
        (None, Some(y)) => return lone(&y.item, y.score, b.channel.source(), t),
        (None, None) => return Err("nothing to fuse".into()),
    };
    let (ka, kb) = (ta.item.intent.kind(), tb.item.intent.kind());
    if let Some((rule, forward)) = rules.find(ka, kb) {
        match &rule.action {
            Action::Combine(template) => {
                let (x, y) = if forward { (&ta.item, &tb.item) } else { (&tb.item, &ta.item) };
                let interp = combine(*template, x, y, &cfg.bounds)?;
                let conf = (ta.score + tb.score) / 2.0;
                return lone(&interp, conf, Source::Fused, t);
            }
            Action::Disambiguate(pref) => {
                let choice = match pref {
                    Preference::Kind(k) if k == ka => Some((ta, a.channel)),
                    Preference::Kind(k) if k == kb => Some((tb, b.channel)),
                    Preference::Speech | Preference::Gesture => {
                        let want = if *pref == Preference::Speech { Channel::Speech } else { Channel::Gesture };
                        [(ta, a.channel), (tb, b.channel)].into_iter().find(|(_, c)| *c == want)
                    }
                    Preference::Kind(_) => None,
                };
                let (w, c) = choice.unwrap_or_else(|| pick_max((ta, a.channel), (tb, b.channel)).0);
                return lone(&w.item, w.score, c.source(), t);
            }
        }
    }

    if let (Intent::Command { verb: va }, Intent::Command { verb: vb }) = (&ta.item.intent, &tb.item.intent) {
        if va.same_kind(vb) {
            let ((w, _), (l, _)) = pick_max((ta, a.channel), (tb, b.channel));
            let (Intent::Command { verb: wv }, Intent::Command { verb: lv }) = (&w.item.intent, &l.item.intent) else {
                unreachable!("both are commands")
            };
            let verb = merge_parameters(wv, lv);
            let sel = merge_selection(&w.item.selection, &l.item.selection);
            let conf = (ta.score.max(tb.score) + cfg.reinforcement).min(1.0);
            return lone(&Interpretation::new(Intent::command(verb), sel), conf, Source::Fused, t);
        }
    }

    let ((w, c), _) = pick_max((ta, a.channel), (tb, b.channel));
    lone(&w.item, w.score, c.source(), t)
}

/// Parameters of `w`, with gaps filled from `l`.
fn merge_parameters(w: &CommandVerb, l: &CommandVerb) -> CommandVerb {
    match (w, l) {
        (CommandVerb::Go { direction, distance: None }, CommandVerb::Go { distance: Some(d), .. }) => {
            CommandVerb::Go { direction: *direction, distance: Some(*d) }
        }
        (CommandVerb::RotateClockwise { degrees: None }, CommandVerb::RotateClockwise { degrees: Some(d) }) => {
            CommandVerb::RotateClockwise { degrees: Some(*d) }
        }
        (CommandVerb::RotateAntiClockwise { degrees: None }, CommandVerb::RotateAntiClockwise { degrees: Some(d) }) => {
            CommandVerb::RotateAntiClockwise { degrees: Some(*d) }
        }
        _ => w.clone(),
    }
}

/// One operator's fusion window.
#[derive(Clone, Debug)]
pub struct FusionEngine {
    pub rules: RuleSet,
    pub cfg: FusionConfig,
    pending: Option<ChannelEvent>,
    anchor: f64,
    active: Option<(Channel, f64)>,
}

impl FusionEngine {
    pub fn new(rules: RuleSet, cfg: FusionConfig) -> Self {
        Self { rules, cfg, pending: None, anchor: 0.0, active: None }
    }

    pub fn pending(&self) -> Option<&ChannelEvent> {
        self.pending.as_ref()
    }

    fn deadline(&self) -> f64 {
        self.anchor + self.cfg.duration
    }

    fn open(&mut self, e: ChannelEvent) {
        self.anchor = match self.cfg.anchor {
            Anchor::Start => e.start,
            Anchor::End => e.end,
        };
        self.pending = Some(e);
    }

    fn emit(result: Result<Command, String>, t: f64) -> FusionOutcome {
        match result {
            Ok(command) => FusionOutcome::Command { command },
            Err(reason) => FusionOutcome::Rejected { timestamp: t, reason },
        }
    }

    fn flush(&mut self, t: f64) -> Option<FusionOutcome> {
        let p = self.pending.take()?;
        let top = p.nbest.top()?;
        Some(Self::emit(lone(&top.item, top.score, p.channel.source(), t), t))
    }

    /// Marks a channel as producing an event that has not arrived yet.
    pub fn activity_started(&mut self, channel: Channel, t: f64) {
        self.active = Some((channel, t));
    }

    pub fn activity_ended(&mut self, channel: Channel) {
        if self.active.is_some_and(|(c, _)| c == channel) {
            self.active = None;
        }
    }

    /// Feeds one event, in arrival order.
    pub fn ingest(&mut self, e: ChannelEvent) -> Vec<FusionOutcome> {
        let at = e.end;
        if let Err(reason) = e.check() {
            return vec![FusionOutcome::Rejected { timestamp: at, reason }];
        }
        self.activity_ended(e.channel);
        let mut out = Vec::new();
        let Some(p) = self.pending.take() else {
            self.open(e);
            return out;
        };
        if e.start > self.deadline() || e.channel == p.channel {
            let t = if e.start > self.deadline() { self.deadline().max(p.end) } else { at };
            self.pending = Some(p);
            out.extend(self.flush(t));
            self.open(e);
            return out;
        }
        out.push(Self::emit(fuse(&p, &e, &self.rules, &self.cfg, at), at));
        out
    }

    /// Emits the pending event if its window has run out by `now`.
    pub fn poll(&mut self, now: f64) -> Vec<FusionOutcome> {
        let Some(p) = &self.pending else {
            return Vec::new();
        };
        let deadline = self.deadline().max(p.end);
        if now < deadline {
            return Vec::new();
        }
        let held = self
            .active
            .is_some_and(|(c, t)| c != p.channel && t <= self.deadline() && now < deadline + self.cfg.max_hold);
        if held {
            return Vec::new();
        }
        self.flush(now.min(deadline + self.cfg.max_hold).max(deadline)).into_iter().collect()
    }

    /// Emits whatever is pending regardless of time.
    pub fn drain(&mut self, now: f64) -> Vec<FusionOutcome> {
        self.active = None;
        let t = self.pending.as_ref().map(|p| self.deadline().max(p.end).min(now.max(p.end)));
        t.and_then(|t| self.flush(t)).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;

    fn speech(intent: Intent, conf: f64, t: f64) -> ChannelEvent {
        ChannelEvent::speech(NBestList::single(Interpretation::new(intent, Selection::Current), conf), t)
    }

    fn gesture(label: GestureLabel, conf: f64, t: f64) -> ChannelEvent {
        ChannelEvent::gesture(&NBestList::single(label, conf), t, t)
    }

    fn engine() -> FusionEngine {
        FusionEngine::new(RuleSet::default_rules(), FusionConfig::default())
    }

    fn command(o: &[FusionOutcome]) -> &Command {
        match o {
            [FusionOutcome::Command { command }] => command,
            other => panic!("expected one command, got {other:?}"),
        }
    }

    #[test]
    fn lone_gesture_emitted_at_timeout_with_default() {
        let mut e = engine();
        assert!(e.ingest(gesture(GestureLabel::GoLeft, 0.4, 0.0)).is_empty());
        assert!(e.poll(0.95).is_empty());
        let out = e.poll(1.0);
        let c = command(&out);
        assert_eq!(c.verb, CommandVerb::Go { direction: Direction::Left, distance: Some(2.0) });
        assert!(c.defaulted);
        assert_eq!(c.timestamp, 1.0);
        assert_eq!(c.source, Source::Gesture);
    }

    #[test]
    fn gesture_plus_distance() {
        let mut e = engine();
        e.ingest(gesture(GestureLabel::GoLeft, 0.4, 0.0));
        let out = e.ingest(speech(Intent::Distance { meters: 3.0 }, 1.0, 0.4));
        let c = command(&out);
        assert_eq!(c.verb, CommandVerb::Go { direction: Direction::Left, distance: Some(3.0) });
        assert!(!c.defaulted);
        assert_eq!(c.source, Source::Fused);
        assert!((c.confidence - 0.7).abs() < 1e-12);
        assert!(e.pending().is_none());
    }

    #[test]
    fn go_there_with_pointing() {
        let mut e = engine();
        e.ingest(speech(Intent::GoTherePending, 1.0, 0.0));
        let ray = PointingRay::new(Vec3::new(10.0, 10.0, 1.7), Vec3::new(1.0, 0.0, -1.0).normalize());
        let c = command(&e.ingest(ChannelEvent::pointing(ray, 0.3))).clone();
        match c.verb {
            CommandVerb::GoThere { target } => assert!((target - Vec3::new(11.7, 10.0, 0.0)).norm() < 1e-9),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn conflicting_channels_max_confidence() {
        let out = fuse(
            &gesture(GestureLabel::Faster, 0.6, 0.0),
            &speech(Intent::command(CommandVerb::Slower), 0.9, 0.2),
            &RuleSet::default_rules(),
            &FusionConfig::default(),
            0.2,
        )
        .unwrap();
        assert_eq!(out.verb, CommandVerb::Slower);
        assert_eq!(out.source, Source::Speech);
        // exact tie goes to speech
        let out = fuse(
            &gesture(GestureLabel::Faster, 0.7, 0.0),
            &speech(Intent::command(CommandVerb::Slower), 0.7, 0.2),
            &RuleSet::default_rules(),
            &FusionConfig::default(),
            0.2,
        )
        .unwrap();
        assert_eq!(out.verb, CommandVerb::Slower);
    }

    #[test]
    fn agreement_reinforces() {
        let out = fuse(
            &gesture(GestureLabel::Brake, 0.8, 0.0),
            &speech(Intent::command(CommandVerb::Brake), 0.8, 0.2),
            &RuleSet::default_rules(),
            &FusionConfig::default(),
            0.2,
        )
        .unwrap();
        assert_eq!(out.verb, CommandVerb::Brake);
        assert!((out.confidence - 0.9).abs() < 1e-12);
        let out = fuse(
            &gesture(GestureLabel::Brake, 0.95, 0.0),
            &speech(Intent::command(CommandVerb::Brake), 0.8, 0.2),
            &RuleSet::default_rules(),
            &FusionConfig::default(),
            0.2,
        )
        .unwrap();
        assert_eq!(out.confidence, 1.0);
    }

    #[test]
    fn rotation_plus_hour() {
        let mut e = engine();
        e.ingest(gesture(GestureLabel::RotateClockwise, 0.3, 0.0));
        let c = command(&e.ingest(speech(Intent::Hour { hour: 3 }, 1.0, 0.5))).clone();
        assert_eq!(c.verb, CommandVerb::RotateOClock { hour: 3 });
    }

    #[test]
    fn events_beyond_the_window_are_not_fused() {
        let mut e = engine();
        e.ingest(gesture(GestureLabel::GoLeft, 0.4, 0.0));
        let out = e.ingest(speech(Intent::Distance { meters: 3.0 }, 1.0, 1.2));
        assert_eq!(command(&out).verb, CommandVerb::Go { direction: Direction::Left, distance: Some(2.0) });
        let out = e.poll(2.5);
        assert!(matches!(out.as_slice(), [FusionOutcome::Rejected { .. }]));
    }

    #[test]
    fn same_channel_flushes_previous() {
        let mut e = engine();
        e.ingest(speech(Intent::command(CommandVerb::Land), 1.0, 0.0));
        let out = e.ingest(speech(Intent::command(CommandVerb::TakeOff), 1.0, 0.3));
        assert_eq!(command(&out).verb, CommandVerb::Land);
        assert_eq!(command(&e.poll(1.3)).verb, CommandVerb::TakeOff);
    }

    #[test]
    fn active_channel_holds_window() {
        let mut e = engine();
        e.activity_started(Channel::Gesture, 0.0);
        e.ingest(speech(Intent::Distance { meters: 4.0 }, 1.0, 0.3));
        assert!(e.poll(1.3).is_empty());
        let g = ChannelEvent::gesture(&NBestList::single(GestureLabel::GoUp, 0.3), 0.0, 1.5);
        let c = command(&e.ingest(g)).clone();
        assert_eq!(c.verb, CommandVerb::Go { direction: Direction::Up, distance: Some(4.0) });
    }

    #[test]
    fn pointing_selects_for_a_verb() {
        let mut e = engine();
        let ray = PointingRay::new(Vec3::zeros(), Vec3::x());
        e.ingest(ChannelEvent::pointing(ray, 0.0));
        let c = command(&e.ingest(speech(Intent::command(CommandVerb::Land), 1.0, 0.2))).clone();
        assert_eq!(c.selection, Selection::Pointed { ray });
        assert_eq!(c.verb, CommandVerb::Land);
    }

    #[test]
    fn deictic_geometry() {
        let b = FusionConfig::default().bounds;
        let b = Aabb::new(b.min - Vec3::new(10.0, 10.0, 0.0), b.max);
        let r = PointingRay::new(Vec3::new(0.0, 0.0, 1.7), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(resolve_deictic(&r, &b).unwrap(), Vec3::zeros());
        let r = PointingRay::new(Vec3::new(0.0, 0.0, 1.7), Vec3::new(1.0, 0.0, -1.0) / 2f64.sqrt());
        assert!((resolve_deictic(&r, &b).unwrap() - Vec3::new(1.7, 0.0, 0.0)).norm() < 1e-12);
        let r = PointingRay::new(Vec3::new(0.0, 0.0, 1.7), Vec3::new(1.0, 0.0, 0.1));
        assert_eq!(resolve_deictic(&r, &b), Err(DeicticError::AboveHorizon));
        let far = PointingRay::new(Vec3::new(0.0, 0.0, 1.7), Vec3::new(1.0, 0.0, -0.001));
        assert_eq!(resolve_deictic(&far, &b).unwrap().x, b.max.x);
    }
}
