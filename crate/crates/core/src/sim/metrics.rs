//! Mission metrics and their plain-text report tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{ControlMode, DroneId, OperatorPayload};

/// Selection-time bucket used while every drone is selected.
pub const ALL_BUCKET: &str = "all";
/// Selection-time bucket used while nothing is selected.
pub const NONE_BUCKET: &str = "none";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub victim: usize,
    pub drone: DroneId,
    /// Seconds from mission start to confirmation.
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Speech,
    Gesture,
    Pointing,
    Pose,
    Joystick,
    Tablet,
}

impl Modality {
    pub fn of(p: &OperatorPayload) -> Self {
        match p {
            OperatorPayload::Transcript { .. } => Modality::Speech,
            OperatorPayload::MotionTrace { .. } => Modality::Gesture,
            OperatorPayload::PointingRay { .. } => Modality::Pointing,
            OperatorPayload::PoseChange { .. } => Modality::Pose,
            OperatorPayload::JoystickDelta { .. } => Modality::Joystick,
            OperatorPayload::Mark => Modality::Tablet,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub victims: usize,
    pub detected: usize,
    pub detections: Vec<Detection>,
    pub elapsed: f64,
    /// Seconds each drone (or the `all` / `none` bucket) was the selection.
    pub selection_time: BTreeMap<String, f64>,
    pub mode_time: BTreeMap<DroneId, BTreeMap<ControlMode, f64>>,
    pub interactions: BTreeMap<Modality, usize>,
    /// Fused commands executed, by source.
    pub commands: usize,
    pub rejected: usize,
}

impl MissionMetrics {
    pub fn new(victims: usize, drones: &[DroneId]) -> Self {
        Self {
            victims,
            mode_time: drones
                .iter()
                .map(|d| (*d, ControlMode::ALL.iter().map(|m| (*m, 0.0)).collect()))
                .collect(),
            ..Default::default()
        }
    }

    pub fn mean_time_to_detect(&self) -> Option<f64> {
        if self.detections.is_empty() {
            return None;
        }
        Some(self.detections.iter().map(|d| d.time).sum::<f64>() / self.detections.len() as f64)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "victims found      {} / {}", self.detected, self.victims).unwrap();
        match self.mean_time_to_detect() {
            Some(t) => writeln!(s, "mean time to find  {t:.1} s").unwrap(),
            None => writeln!(s, "mean time to find  -").unwrap(),
        }
        writeln!(s, "elapsed            {:.2} s", self.elapsed).unwrap();
        writeln!(s, "\nselection time (s)").unwrap();
        for (k, v) in &self.selection_time {
            writeln!(s, "  {k:<6} {v:>8.2}").unwrap();
        }
        writeln!(s, "\noperative mode time (s)\n  drone  autonomous  mixed  teleoperated").unwrap();
        for (d, m) in &self.mode_time {
            let g = |c| m.get(&c).copied().unwrap_or(0.0);
            writeln!(
                s,
                "  {:<6} {:>10.2} {:>6.2} {:>13.2}",
                d.to_string(),
                g(ControlMode::Autonomous),
                g(ControlMode::MixedInitiative),
                g(ControlMode::Teleoperated)
            )
            .unwrap();
        }
        writeln!(s, "\ninteractions").unwrap();
        for (k, v) in &self.interactions {
            writeln!(s, "  {:<9} {v}", format!("{k:?}").to_lowercase()).unwrap();
        }
        s
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Means and standard deviations over runs of one fleet size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub drones: usize,
    pub runs: usize,
    pub victims_mean: f64,
    pub victims_std: f64,
    pub time_to_detect_mean: f64,
    pub time_to_detect_std: f64,
    pub selection_time_mean: BTreeMap<String, f64>,
    pub mode_time_mean: BTreeMap<ControlMode, f64>,
    pub interactions_mean: BTreeMap<Modality, f64>,
}

pub fn summarize(drones: usize, runs: &[MissionMetrics]) -> FleetSummary {
    let n = runs.len().max(1) as f64;
    let victims: Vec<f64> = runs.iter().map(|m| m.detected as f64).collect();
    let ttd: Vec<f64> = runs.iter().flat_map(|m| m.detections.iter().map(|d| d.time)).collect();
    let (vm, vs) = mean_std(&victims);
    let (tm, ts) = mean_std(&ttd);
    let mut sel = BTreeMap::new();
    let mut modes = BTreeMap::new();
    let mut inter = BTreeMap::new();
    for m in runs {
        for (k, v) in &m.selection_time {
            *sel.entry(k.clone()).or_insert(0.0) += v / n;
        }
        for per in m.mode_time.values() {
            for (k, v) in per {
                // per drone, averaged over the fleet
                *modes.entry(*k).or_insert(0.0) += v / n / m.mode_time.len().max(1) as f64;
            }
        }
        for (k, v) in &m.interactions {
            *inter.entry(*k).or_insert(0.0) += *v as f64 / n;
        }
    }
    FleetSummary {
        drones,
        runs: runs.len(),
        victims_mean: vm,
        victims_std: vs,
        time_to_detect_mean: tm,
        time_to_detect_std: ts,
        selection_time_mean: sel,
        mode_time_mean: modes,
        interactions_mean: inter,
    }
}

/// Tables for fleet summaries side by side: results, selection time,
/// operative modes and interaction types.
pub fn comparison_table(summaries: &[FleetSummary]) -> String {
    let mut s = String::new();
    let header = |s: &mut String, title: &str| {
        write!(s, "{title:<24}").unwrap();
        for f in summaries {
            write!(s, " {:>16}", format!("{} drones", f.drones)).unwrap();
        }
        s.push('\n');
    };
    let row = |s: &mut String, name: &str, vals: Vec<String>| {
        write!(s, "{name:<24}").unwrap();
        for v in vals {
            write!(s, " {v:>16}").unwrap();
        }
        s.push('\n');
    };
    let pm = |m: f64, d: f64| if m.is_nan() { "-".to_string() } else { format!("{m:.2} ± {d:.2}") };

    header(&mut s, "Mission results");
    row(&mut s, "runs", summaries.iter().map(|f| f.runs.to_string()).collect());
    row(&mut s, "victims found", summaries.iter().map(|f| pm(f.victims_mean, f.victims_std)).collect());
    row(&mut s, "time to find (s)", summaries.iter().map(|f| pm(f.time_to_detect_mean, f.time_to_detect_std)).collect());

    s.push('\n');
    header(&mut s, "Selection time (s)");
    let mut keys: Vec<&String> = summaries.iter().flat_map(|f| f.selection_time_mean.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        row(
            &mut s,
            k,
            summaries
                .iter()
                .map(|f| f.selection_time_mean.get(k).map_or("-".into(), |v| format!("{v:.1}")))
                .collect(),
        );
    }

    s.push('\n');
    header(&mut s, "Operative mode (s/drone)");
    for m in ControlMode::ALL {
        row(
            &mut s,
            m.name(),
            summaries
                .iter()
                .map(|f| format!("{:.1}", f.mode_time_mean.get(&m).copied().unwrap_or(0.0)))
                .collect(),
        );
    }

    s.push('\n');
    header(&mut s, "Interactions (per run)");
    let mut mods: Vec<&Modality> = summaries.iter().flat_map(|f| f.interactions_mean.keys()).collect();
    mods.sort();
    mods.dedup();
    for k in mods {
        row(
            &mut s,
            &format!("{k:?}").to_lowercase(),
            summaries
                .iter()
                .map(|f| format!("{:.1}", f.interactions_mean.get(k).copied().unwrap_or(0.0)))
                .collect(),
        );
    }
    s
}
