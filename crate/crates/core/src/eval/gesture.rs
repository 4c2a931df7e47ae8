//! Classifier evaluation: overall accuracy and per-label precision/recall.

use serde::{Deserialize, Serialize};

use crate::gesture::synth::LabeledTrace;
use crate::gesture::{classify, GestureConfig, GestureError, TrainingSet};
use crate::model::GestureLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: GestureLabel,
    pub precision: f64,
    pub recall: f64,
    /// Harmonic mean of precision and recall.
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureReport {
    pub probes: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_label: Vec<LabelStats>,
    /// `confusion[i][j]`: probes of label i classified as label j, in
    /// [`GestureLabel::ALL`] order. Failed classifications are not counted.
    pub confusion: Vec<Vec<usize>>,
    pub failures: usize,
}

pub fn train(traces: &[LabeledTrace], cfg: &GestureConfig) -> Result<TrainingSet, GestureError> {
    let mut ts = TrainingSet::new(cfg.points);
    for t in traces {
        if let Some(label) = t.label {
            ts.add_template(&t.trace, label, cfg)?;
        }
    }
    Ok(ts)
}

fn index(l: GestureLabel) -> usize {
    GestureLabel::ALL.iter().position(|x| *x == l).expect("label in ALL")
}

pub fn evaluate(ts: &TrainingSet, probes: &[LabeledTrace], cfg: &GestureConfig) -> Result<GestureReport, GestureError> {
    if ts.is_empty() {
        return Err(GestureError::EmptyTrainingSet);
    }
    let n = GestureLabel::ALL.len();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut failures = 0;
    let mut total = 0;
    for p in probes {
        let Some(truth) = p.label else { continue };
        total += 1;
        match classify(&p.trace, ts, cfg) {
            Ok(nb) => {
                let top = nb.top().expect("non-empty training set").item;
                confusion[index(truth)][index(top)] += 1;
            }
            Err(GestureError::DegenerateTrace(_) | GestureError::InvalidSample { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    let mut per_label = Vec::new();
    for (i, label) in GestureLabel::ALL.iter().enumerate() {
        let tp = confusion[i][i] as f64;
        let predicted: usize = (0..n).map(|r| confusion[r][i]).sum();
        let actual: usize = confusion[i].iter().sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_label.push(LabelStats { label: *label, precision, recall, f1 });
    }
    let macro_f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.iter().map(|s| s.f1).sum::<f64>() / per_label.len() as f64
    };
    Ok(GestureReport {
        probes: total,
        correct,
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        macro_f1,
        per_label,
        confusion,
        failures,
    })
}

impl GestureReport {
    /// Precision / recall / F1 table, one row per label.
    pub fn table(&self) -> String {
        let mut s = format!("{:<24} {:>9} {:>9} {:>9}\n", "gesture", "precision", "recall", "f1");
        for r in &self.per_label {
            s += &format!(
                "{:<24} {:>8.1}% {:>8.1}% {:>8.1}%\n",
                r.label.name(),
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1
            );
        }
        s += &format!(
            "accuracy {:.1}% ({}/{}), macro f1 {:.1}%, failures {}\n",
            100.0 * self.accuracy,
            self.correct,
            self.probes,
            100.0 * self.macro_f1,
            self.failures
        );
        s
    }

    /// Confusion matrix as CSV with a header row of label names.
    pub fn confusion_csv(&self) -> String {
        let names: Vec<&str> = GestureLabel::ALL.iter().map(|l| l.name()).collect();
        let mut s = format!("truth\\predicted,{}\n", names.join(","));
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            s += &format!("{},{}\n", names[i], cells.join(","));
        }
        s
    }
}
