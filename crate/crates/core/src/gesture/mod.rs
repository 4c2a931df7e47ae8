//! Arm-motion gesture recognition by geometric template matching.
//!
//! A trace goes through [`pipeline::denoise`], [`pipeline::resample`] and
//! [`pipeline::to_world_frame`] to become a fixed-size sequence of
//! gravity-free world-frame accelerations, which is compared point-wise with
//! every stored template. Several time-cropped variants of the trace are
//! scored and the best match per label wins; near-ties between the two best
//! labels are settled by the mean orientation of the gesture.

pub mod pipeline;
pub mod synth;
pub mod trace_file;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GestureLabel, MotionTrace, NBestList, DEFAULT_NBEST};
use crate::Vec3;

pub use pipeline::{denoise, resample, to_world_frame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GestureError {
    #[error("degenerate trace: {0}")]
    DegenerateTrace(&'static str),
    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: &'static str },
    #[error("point count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("bad configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GestureConfig {
    /// Number of resampled points.
    pub points: usize,
    /// Noise threshold in m/s².
    pub epsilon: f64,
    /// Number of sliding-window variants, the uncropped trace included.
    pub slides: usize,
    /// Crop step between variants as a fraction of trace duration.
    pub stride: f64,
    /// Relative gap between the two best scores below which orientation re-ranks them.
    pub tie_threshold: f64,
    pub nbest: usize,
}

impl Default for GestureConfig {
    fn default() -> Self {
        Self {
            points: 32,
            epsilon: 0.05,
            slides: 3,
            stride: 0.1,
            tie_threshold: 0.05,
            nbest: DEFAULT_NBEST,
        }
    }
}

impl GestureConfig {
    /// No sliding windows and no orientation re-ranking: plain nearest template.
    pub fn plain(points: usize) -> Self {
        Self {
            points,
            slides: 1,
            tie_threshold: 0.0,
            ..Self::default()
        }
    }
}

/// A gesture reduced to `m` world-frame points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedGesture {
    pub points: Vec<Vec3>,
    pub mean_orientation: Vec3,
}

/// Full conditioning chain for one trace.
pub fn preprocess(trace: &MotionTrace, cfg: &GestureConfig) -> Result<ProcessedGesture, GestureError> {
    pipeline::validate(trace)?;
    let clean = denoise(trace, cfg.epsilon)?;
    let r = resample(&clean, cfg.points)?;
    let points = to_world_frame(&r.points, &r.orientations);
    let mean_orientation = pipeline::mean_orientation(&points);
    Ok(ProcessedGesture {
        points,
        mean_orientation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GestureTemplate {
    pub label: GestureLabel,
    pub points: Vec<Vec3>,
    pub mean_orientation: Vec3,
}

impl GestureTemplate {
    pub fn from_points(label: GestureLabel, points: Vec<Vec3>) -> Self {
        let mean_orientation = pipeline::mean_orientation(&points);
        Self {
            label,
            points,
            mean_orientation,
        }
    }
}

/// Point-wise Euclidean distance between a processed gesture and a template.
pub fn score(gesture: &[Vec3], template: &GestureTemplate) -> Result<f64, GestureError> {
    pipeline::distance(gesture, &template.points)
}

/// Maps a distance to a confidence in (0, 1].
pub fn confidence(score: f64) -> f64 {
    1.0 / (1.0 + score)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub points: usize,
    pub templates: Vec<GestureTemplate>,
}

impl TrainingSet {
    pub fn new(points: usize) -> Self {
        Self {
            points,
            templates: Vec::new(),
        }
    }

    /// Processes `trace` and stores it under `label`.
    pub fn add_template(
        &mut self,
        trace: &MotionTrace,
        label: GestureLabel,
        cfg: &GestureConfig,
    ) -> Result<&GestureTemplate, GestureError> {
        if cfg.points != self.points {
            return Err(GestureError::DimensionMismatch {
                left: cfg.points,
                right: self.points,
            });
        }
        let p = preprocess(trace, cfg)?;
        self.templates.push(GestureTemplate {
            label,
            points: p.points,
            mean_orientation: p.mean_orientation,
        });
        Ok(self.templates.last().unwrap())
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Best match found for one label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatch {
    pub label: GestureLabel,
    pub score: f64,
    pub template: usize,
    pub variant: usize,
}

/// Per-label best scores, ascending, after the orientation re-rank.
#[derive(Clone, Debug)]
pub struct Classification {
    pub matches: Vec<LabelMatch>,
    pub reranked: bool,
}

impl Classification {
    pub fn nbest(&self, n: usize) -> NBestList<GestureLabel> {
        NBestList::from_scored(self.matches.iter().map(|m| (m.label, confidence(m.score))), n)
    }
}

/// Time-cropped copies of a trace, dropping the first `k * stride` of its duration.
pub fn slide_variants(trace: &MotionTrace, slides: usize, stride: f64) -> Vec<MotionTrace> {
    let (Some(first), Some(last)) = (trace.samples.first(), trace.samples.last()) else {
        return vec![trace.clone()];
    };
    let duration = last.t - first.t;
    (0..slides.max(1))
        .map(|k| {
            if k == 0 {
                return trace.clone();
            }
            // tolerance keeps samples sitting exactly on the cut
            let cut = first.t + k as f64 * stride * duration - 1e-9 * duration;
            MotionTrace {
                samples: trace.samples.iter().filter(|s| s.t >= cut).copied().collect(),
            }
        })
        .collect()
}

pub fn classify_detailed(
    trace: &MotionTrace,
    ts: &TrainingSet,
    cfg: &GestureConfig,
) -> Result<Classification, GestureError> {
    if ts.is_empty() {
        return Err(GestureError::EmptyTrainingSet);
    }
    if cfg.points != ts.points {
        return Err(GestureError::DimensionMismatch {
            left: cfg.points,
            right: ts.points,
        });
    }
    let mut processed = Vec::new();
    for (k, variant) in slide_variants(trace, cfg.slides, cfg.stride).iter().enumerate() {
        match preprocess(variant, cfg) {
            Ok(p) => processed.push(p),
            // the uncropped trace must be usable; cropped ones may be too short
            Err(e) if k == 0 => return Err(e),
            Err(_) => {}
        }
    }

    let mut best: Vec<LabelMatch> = Vec::new();
    for (ti, template) in ts.templates.iter().enumerate() {
        for (vi, p) in processed.iter().enumerate() {
            let s = score(&p.points, template)?;
            match best.iter_mut().find(|m| m.label == template.label) {
                Some(m) if s < m.score => {
                    *m = LabelMatch {
                        label: template.label,
                        score: s,
                        template: ti,
                        variant: vi,
                    }
                }
                Some(_) => {}
                None => best.push(LabelMatch {
                    label: template.label,
                    score: s,
                    template: ti,
                    variant: vi,
                }),
            }
        }
    }
    best.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.label.cmp(&b.label)));

    let mut reranked = false;
    if best.len() >= 2 {
        let (s1, s2) = (best[0].score, best[1].score);
        if s2 - s1 < cfg.tie_threshold * s2 {
            let closeness = |m: &LabelMatch| {
                processed[m.variant]
                    .mean_orientation
                    .dot(&ts.templates[m.template].mean_orientation)
            };
            if closeness(&best[1]) > closeness(&best[0]) {
                // the orientation winner takes the better score
                let (first, rest) = best.split_at_mut(1);
                std::mem::swap(&mut first[0].score, &mut rest[0].score);
                best.swap(0, 1);
                reranked = true;
            }
        }
    }
    Ok(Classification {
        matches: best,
        reranked,
    })
}

/// N-best gesture labels with confidences `1 / (1 + score)`.
pub fn classify(
    trace: &MotionTrace,
    ts: &TrainingSet,
    cfg: &GestureConfig,
) -> Result<NBestList<GestureLabel>, GestureError> {
    Ok(classify_detailed(trace, ts, cfg)?.nbest(cfg.nbest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ImuSample;
    use pipeline::GRAVITY;

    /// A trace whose processed form is exactly `points` (identity orientation,
    /// equally spaced input, ε = 0).
    fn trace_for(points: &[Vec3]) -> MotionTrace {
        MotionTrace {
            samples: points
                .iter()
                .enumerate()
                .map(|(i, p)| ImuSample {
                    t: i as f64 * 0.02,
                    accel: p + Vec3::new(0.0, 0.0, GRAVITY),
                    orientation: [1.0, 0.0, 0.0, 0.0],
                })
                .collect(),
        }
    }

    fn column(x: f64, y: f64, m: usize) -> Vec<Vec3> {
        (0..m)
            .map(|i| Vec3::new(x, y, -1.0 + 2.0 * i as f64 / (m - 1) as f64))
            .collect()
    }

    #[test]
    fn exact_template_scores_zero() {
        let cfg = GestureConfig { epsilon: 0.0, ..GestureConfig::plain(16) };
        let mut ts = TrainingSet::new(16);
        let trace = trace_for(&column(0.5, 0.0, 16));
        ts.add_template(&trace, GestureLabel::GoUp, &cfg).unwrap();
        ts.add_template(&trace_for(&column(-0.5, 0.3, 16)), GestureLabel::GoDown, &cfg).unwrap();
        let nb = classify(&trace, &ts, &cfg).unwrap();
        assert_eq!(nb.top().unwrap().item, GestureLabel::GoUp);
        assert_eq!(nb.top().unwrap().score, 1.0);
    }

    #[test]
    fn duplicate_template_changes_nothing() {
        let cfg = GestureConfig { epsilon: 0.0, ..GestureConfig::default() };
        let mut ts = TrainingSet::new(32);
        let a = trace_for(&column(0.5, 0.0, 32));
        let b = trace_for(&column(-0.5, 0.3, 32));
        ts.add_template(&a, GestureLabel::GoUp, &cfg).unwrap();
        ts.add_template(&b, GestureLabel::GoDown, &cfg).unwrap();
        let probe = trace_for(&column(0.2, 0.1, 32));
        let before = classify(&probe, &ts, &cfg).unwrap();
        ts.add_template(&a, GestureLabel::GoUp, &cfg).unwrap();
        assert_eq!(classify(&probe, &ts, &cfg).unwrap(), before);
    }

    #[test]
    fn empty_training_set_rejected() {
        let ts = TrainingSet::new(32);
        let probe = trace_for(&column(0.2, 0.1, 32));
        assert_eq!(
            classify(&probe, &ts, &GestureConfig::default()).unwrap_err(),
            GestureError::EmptyTrainingSet
        );
    }

    #[test]
    fn orientation_breaks_near_ties() {
        let m = 32;
        // probe leans +x; B is slightly closer but leans -x, A leans towards +x/+y
        let probe = column(0.2, 0.0, m);
        let a = GestureTemplate::from_points(GestureLabel::GoLeft, column(0.2, 0.41, m));
        let b = GestureTemplate::from_points(GestureLabel::GoRight, column(-0.2, 0.0, m));
        let da = pipeline::distance(&probe, &a.points).unwrap();
        let db = pipeline::distance(&probe, &b.points).unwrap();
        assert!(db < da && (da - db) < 0.05 * da);
        let ts = TrainingSet { points: m, templates: vec![a, b] };

        let mut cfg = GestureConfig { epsilon: 0.0, ..GestureConfig::plain(m) };
        let plain = classify_detailed(&trace_for(&probe), &ts, &cfg).unwrap();
        assert_eq!(plain.matches[0].label, GestureLabel::GoRight);

        cfg.tie_threshold = 0.05;
        let c = classify_detailed(&trace_for(&probe), &ts, &cfg).unwrap();
        assert!(c.reranked);
        assert_eq!(c.matches[0].label, GestureLabel::GoLeft);
        assert!(c.nbest(5).is_sorted());
    }

    #[test]
    fn slide_variants_crop_from_start() {
        let trace = trace_for(&column(0.0, 0.0, 11));
        let v = slide_variants(&trace, 3, 0.1);
        assert_eq!(v.len(), 3);
        assert_eq!(v[0].samples.len(), 11);
        assert_eq!(v[1].samples.len(), 10);
        assert_eq!(v[2].samples.len(), 9);
        assert_eq!(v[2].samples.last(), trace.samples.last());
    }
}
