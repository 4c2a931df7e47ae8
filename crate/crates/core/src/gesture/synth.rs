//! Synthetic armband recordings for training and evaluation.
//!
//! Each label has a prototype world-frame acceleration profile. A performer
//! style (amplitude, tilt, timing) bends the prototype the way one operator
//! would; traces are then expressed in a slowly wobbling sensor frame with
//! gravity added, exactly as the armband would report them.

use std::f64::consts::PI;

use nalgebra::{Unit, UnitQuaternion};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::pipeline::gravity;
use crate::model::{GestureLabel, ImuSample, MotionTrace};
use crate::Vec3;

/// Unit-amplitude world-frame acceleration of a label at phase `u ∈ [0, 1]`.
pub fn prototype(label: GestureLabel, u: f64) -> Vec3 {
    let w = 2.0 * PI * u;
    match label {
        GestureLabel::GoUp => Vec3::new(0.0, 0.0, w.sin()),
        GestureLabel::GoDown => Vec3::new(0.0, 0.0, -w.sin()),
        GestureLabel::GoLeft => Vec3::new(0.0, w.sin(), 0.0),
        GestureLabel::GoRight => Vec3::new(0.0, -w.sin(), 0.0),
        GestureLabel::GoAhead => Vec3::new(w.sin(), 0.0, 0.0),
        GestureLabel::GoBackward => Vec3::new(-w.sin(), 0.0, 0.0),
        GestureLabel::Brake => Vec3::new((2.0 * w).sin(), 0.0, 0.4 * w.sin()),
        GestureLabel::RotateClockwise => Vec3::new(-w.cos(), w.sin(), 0.0),
        GestureLabel::RotateAntiClockwise => Vec3::new(-w.cos(), -w.sin(), 0.0),
        GestureLabel::SearchExpanding => {
            let r = 0.3 + 0.7 * u;
            Vec3::new(r * (2.0 * w).cos(), r * (2.0 * w).sin(), 0.0)
        }
        GestureLabel::SearchParallelTrack => Vec3::new((3.0 * w).sin(), 0.5 * (PI * u).sin(), 0.0),
        GestureLabel::SearchCreepingLine => Vec3::new(0.5 * (PI * u).sin(), (3.0 * w).sin(), 0.0),
        GestureLabel::Faster => Vec3::new((2.0 * w).cos(), 0.0, (2.0 * w).sin()),
        GestureLabel::Slower => Vec3::new((2.0 * w).cos(), 0.0, -(2.0 * w).sin()),
    }
}

/// How one operator performs gestures.
#[derive(Clone, Debug)]
pub struct Style {
    pub amplitude: f64,
    pub tilt: UnitQuaternion<f64>,
    /// Monotone time-warp strength, |warp| < 1/π keeps the warp invertible.
    pub warp: f64,
    pub duration: f64,
}

impl Style {
    pub fn neutral() -> Self {
        Self {
            amplitude: 4.0,
            tilt: UnitQuaternion::identity(),
            warp: 0.0,
            duration: 1.2,
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            amplitude: 4.0 * rng.random_range(0.85..1.15),
            tilt: small_rotation(rng, 10f64.to_radians()),
            warp: rng.random_range(-0.08..0.08),
            duration: rng.random_range(0.9..1.5),
        }
    }

    /// Trial-to-trial variation around this style.
    pub fn jitter(&self, rng: &mut impl Rng) -> Self {
        Self {
            amplitude: self.amplitude * rng.random_range(0.95..1.05),
            tilt: small_rotation(rng, 3f64.to_radians()) * self.tilt,
            warp: self.warp + rng.random_range(-0.02..0.02),
            duration: self.duration * rng.random_range(0.9..1.1),
        }
    }
}

fn small_rotation(rng: &mut impl Rng, max_angle: f64) -> UnitQuaternion<f64> {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    match Unit::try_new(axis, 1e-9) {
        Some(axis) => UnitQuaternion::from_axis_angle(&axis, rng.random_range(-max_angle..max_angle)),
        None => UnitQuaternion::identity(),
    }
}

/// Sensor mounting: fixed yaw of the arm plus a slow wobble.
#[derive(Clone, Debug)]
pub struct Mounting {
    pub base: UnitQuaternion<f64>,
    pub wobble_axis: Unit<Vec3>,
    pub wobble: f64,
}

impl Mounting {
    pub fn identity() -> Self {
        Self {
            base: UnitQuaternion::identity(),
            wobble_axis: Vec3::z_axis(),
            wobble: 0.0,
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let base = UnitQuaternion::from_euler_angles(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-PI..PI),
        );
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Self {
            base,
            wobble_axis: Unit::try_new(axis, 1e-9).unwrap_or(Vec3::z_axis()),
            wobble: rng.random_range(0.0..0.3),
        }
    }

    pub fn at(&self, u: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&self.wobble_axis, self.wobble * (PI * u).sin()) * self.base
    }
}

/// World-frame accelerations of a performance, sampled at `n` phases.
pub fn world_profile(label: GestureLabel, style: &Style, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            let warped = u + style.warp * (PI * u).sin();
            style.tilt * (prototype(label, warped) * style.amplitude)
        })
        .collect()
}

/// Root-mean-square of the per-component signal.
pub fn signal_rms(points: &[Vec3]) -> f64 {
    let sum: f64 = points.iter().map(|p| p.norm_squared()).sum();
    (sum / (3 * points.len()).max(1) as f64).sqrt()
}

/// Builds the raw armband trace for a world-frame profile, adding Gaussian
/// noise with standard deviation `noise_frac × signal RMS` to every component.
pub fn render_trace(
    profile: &[Vec3],
    duration: f64,
    mounting: &Mounting,
    noise_frac: f64,
    rng: &mut impl Rng,
) -> MotionTrace {
    let n = profile.len();
    let sigma = noise_frac * signal_rms(profile);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let g = gravity();
    let samples = profile
        .iter()
        .enumerate()
        .map(|(i, a_world)| {
            let u = i as f64 / (n - 1) as f64;
            let q = mounting.at(u);
            let mut accel = q.inverse() * (a_world + g);
            if sigma > 0.0 {
                accel += Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            }
            let c = q.quaternion().coords;
            ImuSample {
                t: u * duration,
                accel,
                orientation: [c.w, c.x, c.y, c.z],
            }
        })
        .collect();
    MotionTrace { samples }
}

pub const SAMPLES_PER_GESTURE: usize = 60;

/// One performance of `label` by `style`.
pub fn perform(
    label: GestureLabel,
    style: &Style,
    mounting: &Mounting,
    noise_frac: f64,
    rng: &mut impl Rng,
) -> MotionTrace {
    let profile = world_profile(label, style, SAMPLES_PER_GESTURE);
    render_trace(&profile, style.duration, mounting, noise_frac, rng)
}

/// A labelled recording.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTrace {
    pub label: Option<GestureLabel>,
    pub trace: MotionTrace,
}

/// Training and test recordings from a population of operators.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: Vec<LabeledTrace>,
    pub test: Vec<LabeledTrace>,
}

/// `per_label` training performances (one per operator) and `probes` test
/// performances per label by the same operators, all with sensor noise.
pub fn corpus(per_label: usize, probes: usize, noise_frac: f64, rng: &mut impl Rng) -> Corpus {
    let styles: Vec<Style> = (0..per_label).map(|_| Style::random(rng)).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in GestureLabel::ALL {
        for style in &styles {
            let mounting = Mounting::random(rng);
            train.push(LabeledTrace {
                label: Some(label),
                trace: perform(label, &style.jitter(rng), &mounting, noise_frac, rng),
            });
        }
        for i in 0..probes {
            let style = styles[i % styles.len()].jitter(rng);
            let mounting = Mounting::random(rng);
            test.push(LabeledTrace {
                label: Some(label),
                trace: perform(label, &style, &mounting, noise_frac, rng),
            });
        }
    }
    Corpus { train, test }
}
