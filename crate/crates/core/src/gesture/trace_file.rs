//! Line-oriented armband trace files.
//!
//! ```text
//! hawk-trace 1
//! # free comment
//! label go-up
//! pose 0 closed
//! imu 0.01 0.12 -0.3 9.79 1 0 0 0
//! pose 1.2 other
//! ```
//!
//! `imu` records carry timestamp, three acceleration components and the
//! sensor→world quaternion as `w x y z`. Numbers are written in Rust's
//! shortest round-trip form, so a parsed file serializes back byte for byte.
//! A `label` record names the gesture of the next closed-hand segment.

use std::fmt::Write as _;

use thiserror::Error;

use super::synth::LabeledTrace;
use crate::model::{GestureLabel, HandPose, ImuSample, MotionTrace};
use crate::Vec3;

pub const HEADER: &str = "hawk-trace 1";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceRecord {
    Comment(String),
    Label(GestureLabel),
    Pose { t: f64, pose: HandPose },
    Imu(ImuSample),
}

fn pose_name(p: HandPose) -> &'static str {
    match p {
        HandPose::Open => "open",
        HandPose::Closed => "closed",
        HandPose::Other => "other",
    }
}

pub fn parse(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => {
            return Err(TraceParseError {
                line: 1,
                message: format!("expected header `{HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let err = |message: String| TraceParseError { line: i + 1, message };
        if let Some(c) = line.strip_prefix('#') {
            out.push(TraceRecord::Comment(c.to_string()));
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let num = |s: &str| -> Result<f64, TraceParseError> {
            s.parse::<f64>()
                .map_err(|_| err(format!("bad number `{s}`")))
        };
        match fields.as_slice() {
            ["label", name] => out.push(TraceRecord::Label(name.parse().map_err(err)?)),
            ["pose", t, pose] => {
                let pose = match *pose {
                    "open" => HandPose::Open,
                    "closed" => HandPose::Closed,
                    "other" => HandPose::Other,
                    p => return Err(err(format!("unknown pose `{p}`"))),
                };
                out.push(TraceRecord::Pose { t: num(t)?, pose });
            }
            ["imu", rest @ ..] if rest.len() == 8 => {
                let v = rest.iter().map(|s| num(s)).collect::<Result<Vec<f64>, _>>()?;
                out.push(TraceRecord::Imu(ImuSample {
                    t: v[0],
                    accel: Vec3::new(v[1], v[2], v[3]),
                    orientation: [v[4], v[5], v[6], v[7]],
                }));
            }
            _ => return Err(err(format!("unrecognized record `{line}`"))),
        }
    }
    Ok(out)
}

pub fn serialize(records: &[TraceRecord]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in records {
        match r {
            TraceRecord::Comment(c) => writeln!(s, "#{c}"),
            TraceRecord::Label(l) => writeln!(s, "label {l}"),
            TraceRecord::Pose { t, pose } => writeln!(s, "pose {t} {}", pose_name(*pose)),
            TraceRecord::Imu(x) => {
                let [w, qx, qy, qz] = x.orientation;
                writeln!(
                    s,
                    "imu {} {} {} {} {w} {qx} {qy} {qz}",
                    x.t, x.accel.x, x.accel.y, x.accel.z
                )
            }
        }
        .expect("write to String");
    }
    s
}

/// Splits records into the closed-hand segments they delimit.
pub fn segments(records: &[TraceRecord]) -> Vec<LabeledTrace> {
    let mut out = Vec::new();
    let mut label = None;
    let mut current: Option<MotionTrace> = None;
    for r in records {
        match r {
            TraceRecord::Label(l) => label = Some(*l),
            TraceRecord::Pose { pose, .. } => {
                if let Some(trace) = current.take() {
                    out.push(LabeledTrace {
                        label: label.take(),
                        trace,
                    });
                }
                if *pose == HandPose::Closed {
                    current = Some(MotionTrace::default());
                }
            }
            TraceRecord::Imu(s) => {
                if let Some(t) = current.as_mut() {
                    t.samples.push(*s);
                }
            }
            TraceRecord::Comment(_) => {}
        }
    }
    if let Some(trace) = current {
        out.push(LabeledTrace { label, trace });
    }
    out
}

/// Records for a list of labelled traces, each wrapped in closed/other poses.
pub fn records_for(traces: &[LabeledTrace]) -> Vec<TraceRecord> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    for lt in traces {
        if let Some(l) = lt.label {
            out.push(TraceRecord::Label(l));
        }
        let (start, end) = match (lt.trace.samples.first(), lt.trace.samples.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (0.0, 0.0),
        };
        out.push(TraceRecord::Pose { t: offset + start, pose: HandPose::Closed });
        for s in &lt.trace.samples {
            out.push(TraceRecord::Imu(ImuSample { t: offset + s.t, ..*s }));
        }
        out.push(TraceRecord::Pose { t: offset + end, pose: HandPose::Other });
        offset += end + 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_missing_header_and_bad_lines() {
        assert_eq!(parse("imu 0 0 0 0 1 0 0 0\n").unwrap_err().line, 1);
        let e = parse("hawk-trace 1\npose 0 closed\nimu 0 1 2\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse("hawk-trace 1\nlabel wave\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn segments_follow_closed_hand() {
        let text = "hawk-trace 1\nlabel go-up\npose 0 closed\nimu 0 0 0 9.81 1 0 0 0\nimu 0.1 0 0 10 1 0 0 0\npose 0.2 other\nimu 0.3 0 0 0 1 0 0 0\npose 0.4 closed\nimu 0.5 1 0 0 1 0 0 0\npose 0.6 open\n";
        let recs = parse(text).unwrap();
        assert_eq!(serialize(&recs), text);
        let segs = segments(&recs);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].label, Some(GestureLabel::GoUp));
        assert_eq!(segs[0].trace.samples.len(), 2);
        assert_eq!(segs[1].label, None);
        assert_eq!(segs[1].trace.samples.len(), 1);
    }

    fn arb_record() -> impl Strategy<Value = TraceRecord> {
        let f = prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL;
        prop_oneof![
            "[a-z0-9 ]{0,12}".prop_map(TraceRecord::Comment),
            prop::sample::select(GestureLabel::ALL.to_vec()).prop_map(TraceRecord::Label),
            (f, prop::sample::select(vec![HandPose::Open, HandPose::Closed, HandPose::Other]))
                .prop_map(|(t, pose)| TraceRecord::Pose { t, pose }),
            prop::array::uniform8(f).prop_map(|v| TraceRecord::Imu(ImuSample {
                t: v[0],
                accel: Vec3::new(v[1], v[2], v[3]),
                orientation: [v[4], v[5], v[6], v[7]],
            })),
        ]
    }

    proptest! {
        #[test]
        fn bit_exact_round_trip(records in prop::collection::vec(arb_record(), 0..40)) {
            let text = serialize(&records);
            let back = parse(&text).unwrap();
            // compare bit patterns so -0.0 and 0.0 are told apart
            prop_assert_eq!(format!("{back:?}"), format!("{records:?}"));
            prop_assert_eq!(serialize(&back), text);
        }
    }
}
