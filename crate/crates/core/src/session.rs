//! Operator sessions: an event log around one mission, with record and replay.
//!
//! Every change a session goes through is appended to its log as a
//! [`WireEvent`] with a gap-free sequence number. A log written to disk as
//! one JSON object per line is also a trace: replaying it re-submits the
//! operator events at their recorded times and reproduces the log byte for
//! byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::OperatorEvent;
use crate::sim::{Mission, ScenarioConfig, ScenarioError, SimError, SimEvent, Snapshot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("event at {timestamp} is earlier than the previous event at {previous}")]
    OutOfOrder { timestamp: f64, previous: f64 },
    #[error("corrupt trace at byte {offset}: {message}")]
    CorruptTrace { offset: usize, message: String },
}

impl From<ScenarioError> for SessionError {
    fn from(e: ScenarioError) -> Self {
        SessionError::InvalidScenario(e.to_string())
    }
}

impl From<SimError> for SessionError {
    fn from(e: SimError) -> Self {
        SessionError::InvalidScenario(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Driven by connected clients; events are stamped with the session clock.
    Live,
    /// Re-running a recorded log.
    Replay,
    /// Driven by a script; events carry their own times.
    Headless,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WirePayload {
    SessionOpened { scenario: ScenarioConfig },
    Operator { event: OperatorEvent },
    Mission { event: SimEvent },
    SessionClosed { clock: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub seq: u64,
    pub timestamp: f64,
    #[serde(flatten)]
    pub payload: WirePayload,
}

impl WireEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire events serialize")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub seq: u64,
    pub timestamp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub mode: SessionMode,
    pub running: bool,
    pub closed: bool,
    /// Sequence number of the last logged event; the stream continues after it.
    pub seq: u64,
    pub mission: Snapshot,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub mode: SessionMode,
    pub running: bool,
    mission: Mission,
    log: Vec<WireEvent>,
    closed: bool,
    /// Timestamp of the last operator event.
    last_event: f64,
}

impl Session {
    /// Opens a paused session on a validated scenario.
    pub fn open(id: impl Into<String>, scenario: ScenarioConfig, mode: SessionMode) -> Result<Self, SessionError> {
        let mission = Mission::new(scenario.clone())?;
        let mut s = Self { id: id.into(), mode, running: false, mission, log: Vec::new(), closed: false, last_event: 0.0 };
        s.push(0.0, WirePayload::SessionOpened { scenario });
        Ok(s)
    }

    /// Opens a session from scenario text in the interchange format.
    pub fn open_text(id: impl Into<String>, text: &str, mode: SessionMode) -> Result<Self, SessionError> {
        let cfg = crate::sim::parse_scenario(text)?;
        Self::open(id, cfg, mode)
    }

    fn push(&mut self, timestamp: f64, payload: WirePayload) {
        let seq = self.log.last().map_or(0, |e| e.seq + 1);
        self.log.push(WireEvent { seq, timestamp, payload });
    }

    fn record(&mut self, events: Vec<(f64, SimEvent)>) {
        for (t, e) in events {
            self.push(t, WirePayload::Mission { event: e });
        }
    }

    pub fn clock(&self) -> f64 {
        self.mission.clock()
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn mission(&self) -> &Mission {
        &self.mission
    }

    pub fn log(&self) -> &[WireEvent] {
        &self.log
    }

    pub fn last_seq(&self) -> u64 {
        self.log.last().map_or(0, |e| e.seq)
    }

    /// Log as one JSON object per line.
    pub fn log_text(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&e.to_line());
            s.push('\n');
        }
        s
    }

    /// Logs and applies an operator event.
    pub fn submit(&mut self, mut e: OperatorEvent) -> Result<Ack, SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        match self.mode {
            SessionMode::Live => e.timestamp = self.clock(),
            SessionMode::Replay | SessionMode::Headless => {
                // times between ticks take effect on the next tick
                if !e.timestamp.is_finite() || e.timestamp < self.last_event {
                    return Err(SessionError::OutOfOrder { timestamp: e.timestamp, previous: self.last_event });
                }
                self.advance_to(e.timestamp);
            }
        }
        let ts = e.timestamp;
        self.last_event = ts;
        self.push(ts, WirePayload::Operator { event: e.clone() });
        let seq = self.last_seq();
        let now = self.clock();
        let events = self.mission.apply(&e).into_iter().map(|ev| (now, ev)).collect();
        self.record(events);
        Ok(Ack { seq, timestamp: ts })
    }

    /// Runs `ticks` simulation steps.
    pub fn advance(&mut self, ticks: u64) {
        if self.closed {
            return;
        }
        let mut events = Vec::new();
        for _ in 0..ticks {
            if self.mission.finished() {
                break;
            }
            let out = self.mission.step();
            let now = self.mission.clock();
            events.extend(out.into_iter().map(|e| (now, e)));
        }
        self.record(events);
    }

    /// Runs until the clock reaches `t`.
    pub fn advance_to(&mut self, t: f64) {
        if self.closed {
            return;
        }
        let mut events = Vec::new();
        self.mission.run_until(t, |now, e| events.push((now, e)));
        self.record(events);
    }

    pub fn close(&mut self) -> Result<(), SessionError> {
        if self.closed {
            return Err(SessionError::SessionClosed);
        }
        let clock = self.clock();
        self.push(clock, WirePayload::SessionClosed { clock });
        self.closed = true;
        self.running = false;
        Ok(())
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            mode: self.mode,
            running: self.running,
            closed: self.closed,
            seq: self.last_seq(),
            mission: self.mission.snapshot(),
        }
    }
}

/// Parses a recorded log, checking framing and sequence numbers.
pub fn parse_log(text: &str) -> Result<Vec<WireEvent>, SessionError> {
    let mut out: Vec<WireEvent> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let corrupt = |message: String| SessionError::CorruptTrace { offset, message };
        if !line.ends_with('\n') {
            return Err(corrupt("truncated line".into()));
        }
        let body = line.trim_end_matches(['\n', '\r']);
        let e: WireEvent = serde_json::from_str(body).map_err(|e| corrupt(e.to_string()))?;
        let expected = out.last().map_or(0, |p| p.seq + 1);
        if e.seq != expected {
            return Err(corrupt(format!("sequence {} where {expected} was expected", e.seq)));
        }
        if out.is_empty() && !matches!(e.payload, WirePayload::SessionOpened { .. }) {
            return Err(corrupt("log does not start with session_opened".into()));
        }
        out.push(e);
        offset += line.len();
    }
    if let Some(last) = out.last() {
        if !matches!(last.payload, WirePayload::SessionClosed { .. }) {
            return Err(SessionError::CorruptTrace { offset, message: "log ends before session_closed".into() });
        }
    }
    Ok(out)
}

/// Re-runs a recorded log. An empty log replays to no session at all.
pub fn replay(text: &str) -> Result<Option<Session>, SessionError> {
    let events = parse_log(text)?;
    let Some(first) = events.first() else {
        return Ok(None);
    };
    let WirePayload::SessionOpened { scenario } = &first.payload else {
        unreachable!("checked by parse_log")
    };
    let mut s = Session::open("replay", scenario.clone(), SessionMode::Replay)?;
    for e in &events[1..] {
        match &e.payload {
            WirePayload::Operator { event } => {
                s.submit(event.clone())?;
            }
            WirePayload::SessionClosed { clock } => {
                s.advance_to(*clock);
                s.close()?;
            }
            WirePayload::SessionOpened { .. } | WirePayload::Mission { .. } => {}
        }
    }
    Ok(Some(s))
}
