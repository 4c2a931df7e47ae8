//! Paired speech/gesture corpus and fusion accuracy.
//!
//! Each item is one intended command expressed on both channels: a spoken
//! transcript and an arm gesture, with the utterance falling inside the
//! gesture. Each channel is corrupted independently. A corrupted utterance
//! carries one recognizer word error and a low recognizer confidence; a
//! corrupted gesture is a slip where the operator performs a different
//! gesture.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fusion::{ChannelEvent, FusionEngine, FusionOutcome};
use crate::gesture::synth::{self, Mounting, Style};
use crate::gesture::{classify, GestureConfig, GestureError, TrainingSet};
use crate::model::{CommandVerb, GestureLabel, MotionTrace};
use crate::speech::{parse, Grammar, SpeechContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedItem {
    pub intended: GestureLabel,
    pub transcript: String,
    pub asr_confidence: f64,
    pub trace: MotionTrace,
    /// Gesture start, seconds.
    pub start: f64,
    /// Utterance time after gesture start, seconds.
    pub speech_offset: f64,
    pub speech_corrupted: bool,
    pub gesture_corrupted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedCorpus {
    pub gesture_config: GestureConfig,
    pub training: TrainingSet,
    pub items: Vec<PairedItem>,
}

#[derive(Clone, Debug)]
pub struct PairedCorpusSpec {
    pub operators: usize,
    pub items_per_label: usize,
    pub noise_frac: f64,
    pub speech_corruption: f64,
    pub gesture_corruption: f64,
}

impl Default for PairedCorpusSpec {
    fn default() -> Self {
        Self {
            operators: 10,
            items_per_label: 30,
            noise_frac: 0.05,
            speech_corruption: 0.1,
            gesture_corruption: 0.1,
        }
    }
}

/// Ways to say each gesture's command.
pub fn phrasings(label: GestureLabel) -> &'static [&'static str] {
    match label {
        GestureLabel::Brake => &["brake", "stop"],
        GestureLabel::GoAhead => &["go ahead", "go forward", "move ahead"],
        GestureLabel::GoBackward => &["go backward", "go back", "move backward"],
        GestureLabel::GoDown => &["go down", "move down"],
        GestureLabel::GoLeft => &["go left", "move left"],
        GestureLabel::GoRight => &["go right", "move right"],
        GestureLabel::GoUp => &["go up", "move up"],
        GestureLabel::RotateAntiClockwise => &["rotate anticlockwise", "rotate counterclockwise", "turn anticlockwise"],
        GestureLabel::RotateClockwise => &["rotate clockwise", "turn clockwise"],
        GestureLabel::SearchCreepingLine => &["search creeping line", "creeping line search"],
        GestureLabel::SearchExpanding => &["search expanding", "expanding search"],
        GestureLabel::SearchParallelTrack => &["search parallel track", "parallel track search"],
        GestureLabel::Faster => &["faster", "go faster", "speed up"],
        GestureLabel::Slower => &["slower", "go slower", "slow down"],
    }
}

/// Words a recognizer may substitute: command vocabulary and filler.
const CONFUSIONS: [&str; 22] = [
    "go", "up", "down", "left", "right", "ahead", "back", "rotate", "clockwise", "search", "line", "track",
    "faster", "slower", "brake", "land", "the", "a", "uh", "lot", "bright", "stock",
];

fn corrupt_transcript(text: &str, rng: &mut impl Rng) -> String {
    let mut words: Vec<&str> = text.split(' ').collect();
    let i = rng.random_range(0..words.len());
    let original = words[i];
    let replacement = loop {
        let w = *CONFUSIONS.choose(rng).expect("non-empty");
        if w != original {
            break w;
        }
    };
    words[i] = replacement;
    words.join(" ")
}

pub fn generate(spec: &PairedCorpusSpec, rng: &mut impl Rng) -> Result<PairedCorpus, GestureError> {
    let cfg = GestureConfig::default();
    let styles: Vec<Style> = (0..spec.operators).map(|_| Style::random(rng)).collect();
    let mut training = TrainingSet::new(cfg.points);
    for label in GestureLabel::ALL {
        for style in &styles {
            let trace = synth::perform(label, &style.jitter(rng), &Mounting::random(rng), spec.noise_frac, rng);
            training.add_template(&trace, label, &cfg)?;
        }
    }
    let mut items = Vec::new();
    let mut clock = 0.0;
    for k in 0..spec.items_per_label {
        for label in GestureLabel::ALL {
            let style = styles[k % styles.len()].jitter(rng);
            let gesture_corrupted = rng.random_bool(spec.gesture_corruption);
            let performed = if gesture_corrupted {
                *GestureLabel::ALL
                    .iter()
                    .filter(|l| **l != label)
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .expect("other labels")
                    .to_owned()
            } else {
                label
            };
            let trace = synth::perform(performed, &style, &Mounting::random(rng), spec.noise_frac, rng);
            let duration = style.duration;
            let speech_corrupted = rng.random_bool(spec.speech_corruption);
            let clean = *phrasings(label).choose(rng).expect("phrasings");
            let (transcript, asr_confidence) = if speech_corrupted {
                (corrupt_transcript(clean, rng), rng.random_range(0.3..0.7))
            } else {
                (clean.to_string(), rng.random_range(0.75..1.0))
            };
            items.push(PairedItem {
                intended: label,
                transcript,
                asr_confidence,
                trace,
                start: clock,
                speech_offset: rng.random_range(0.0..0.8f64.min(duration)),
                speech_corrupted,
                gesture_corrupted,
            });
            clock += duration + 5.0;
        }
    }
    Ok(PairedCorpus { gesture_config: cfg, training, items })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub items: usize,
    pub speech_accuracy: f64,
    pub gesture_accuracy: f64,
    pub fused_accuracy: f64,
    pub speech_corrupted: usize,
    pub gesture_corrupted: usize,
}

fn correct(verb: &CommandVerb, intended: GestureLabel) -> bool {
    verb.same_kind(&intended.verb())
}

/// Scores speech alone, gesture alone and the fused stream on every item.
pub fn evaluate(corpus: &PairedCorpus, grammar: &Grammar, engine: &FusionEngine) -> Result<FusionReport, GestureError> {
    let ctx = SpeechContext::default();
    let cfg = &corpus.gesture_config;
    let (mut s_ok, mut g_ok, mut f_ok) = (0usize, 0usize, 0usize);
    for item in &corpus.items {
        let speech = parse(&item.transcript, Some(item.asr_confidence), grammar, &ctx).ok();
        let gesture = classify(&item.trace, &corpus.training, cfg)?;
        if let Some(Some(top)) = speech.as_ref().map(|nb| nb.top()) {
            if let crate::model::Intent::Command { verb } = &top.item.intent {
                s_ok += usize::from(correct(verb, item.intended));
            }
        }
        if let Some(top) = gesture.top() {
            g_ok += usize::from(correct(&top.item.verb(), item.intended));
        }

        let mut e = engine.clone();
        let t0 = item.start;
        let dur = item.trace.samples.last().map(|s| s.t).unwrap_or(0.0) - item.trace.samples.first().map(|s| s.t).unwrap_or(0.0);
        let t_speech = t0 + item.speech_offset;
        let mut out = Vec::new();
        e.activity_started(crate::fusion::Channel::Gesture, t0);
        if let Some(nb) = speech {
            out.extend(e.ingest(ChannelEvent::speech(nb, t_speech)));
        }
        out.extend(e.poll(t0 + dur - 1e-9));
        out.extend(e.ingest(ChannelEvent::gesture(&gesture, t0, t0 + dur)));
        out.extend(e.poll(t0 + dur + 10.0));
        let commands: Vec<_> = out
            .iter()
            .filter_map(|o| match o {
                FusionOutcome::Command { command } => Some(command),
                FusionOutcome::Rejected { .. } => None,
            })
            .collect();
        if let [c] = commands.as_slice() {
            f_ok += usize::from(correct(&c.verb, item.intended));
        }
    }
    let n = corpus.items.len().max(1) as f64;
    Ok(FusionReport {
        items: corpus.items.len(),
        speech_accuracy: s_ok as f64 / n,
        gesture_accuracy: g_ok as f64 / n,
        fused_accuracy: f_ok as f64 / n,
        speech_corrupted: corpus.items.iter().filter(|i| i.speech_corrupted).count(),
        gesture_corrupted: corpus.items.iter().filter(|i| i.gesture_corrupted).count(),
    })
}
