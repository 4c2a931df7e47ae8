use std::f64::consts::PI;

use hawk_core::gesture::synth::{self, Mounting, Style};
use hawk_core::gesture::{classify, preprocess, resample, trace_file, GestureConfig, TrainingSet};
use hawk_core::model::{GestureLabel, HandPose, ImuSample, MotionTrace};
use hawk_core::Vec3;
use nalgebra::{Unit, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn identity_sample(t: f64, accel: Vec3) -> ImuSample {
    ImuSample { t, accel, orientation: [1.0, 0.0, 0.0, 0.0] }
}

/// Arc-length position of a point known to lie on the polyline, searched
/// from segment `from` on.
fn arc_position(poly: &[Vec3], p: &Vec3, from: usize) -> Option<(usize, f64)> {
    let mut before = 0.0;
    for (j, w) in poly.windows(2).enumerate() {
        let d = w[1] - w[0];
        let len = d.norm();
        if j >= from && len > 0.0 {
            let u = ((p - w[0]).dot(&d) / (len * len)).clamp(0.0, 1.0);
            if (w[0] + d * u - p).norm() < 1e-9 {
                return Some((j, before + u * len));
            }
        }
        before += len;
    }
    None
}

#[test]
fn resampled_gaps_are_equal_on_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let samples: Vec<ImuSample> = (0..50)
            .map(|i| {
                let a = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                identity_sample(i as f64 * 0.02, a)
            })
            .collect();
        let poly: Vec<Vec3> = samples.iter().map(|s| s.accel).collect();
        let total: f64 = poly.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let r = resample(&MotionTrace { samples }, 32).unwrap();
        assert_eq!(r.points.len(), 32);
        let mut seg = 0;
        let mut arcs = Vec::new();
        for p in &r.points {
            let (j, s) = arc_position(&poly, p, seg).expect("resampled point lies on the polyline");
            seg = j;
            arcs.push(s);
        }
        for w in arcs.windows(2) {
            assert!((w[1] - w[0] - total / 31.0).abs() < 1e-6);
        }
    }
}

#[test]
fn resampled_gaps_equal_exactly_on_a_line() {
    // on a straight polyline chord = arc, so all gaps must agree
    let samples: Vec<ImuSample> = (0..50)
        .map(|i| {
            let s = (i as f64).powf(1.7);
            identity_sample(i as f64 * 0.01, Vec3::new(1.0, 2.0, -0.5) * s)
        })
        .collect();
    let r = resample(&MotionTrace { samples }, 32).unwrap();
    let gaps: Vec<f64> = r.points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    for g in &gaps {
        assert!((g - gaps[0]).abs() < 1e-6, "{gaps:?}");
    }
}

fn fixed_mounting(q: UnitQuaternion<f64>) -> Mounting {
    Mounting { base: q, wobble_axis: Vec3::z_axis(), wobble: 0.0 }
}

#[test]
fn rotated_mounting_gives_same_processed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = GestureConfig::default();
    for label in GestureLabel::ALL {
        let profile = synth::world_profile(label, &Style::neutral(), 60);
        let a = synth::render_trace(&profile, 1.2, &Mounting::identity(), 0.0, &mut rng);
        let turned = fixed_mounting(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), PI / 2.0));
        let b = synth::render_trace(&profile, 1.2, &turned, 0.0, &mut rng);
        let axis = Unit::new_normalize(Vec3::new(0.3, -1.0, 0.4));
        let c = synth::render_trace(&profile, 1.2, &fixed_mounting(UnitQuaternion::from_axis_angle(&axis, 1.1)), 0.0, &mut rng);
        let pa = preprocess(&a, &cfg).unwrap();
        for other in [&b, &c] {
            let po = preprocess(other, &cfg).unwrap();
            for (p, q) in pa.points.iter().zip(&po.points) {
                assert!((p - q).norm() < 1e-6, "{label:?}");
            }
        }
    }
}

#[test]
fn time_rescaling_leaves_points_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = GestureConfig::default();
    let t = synth::perform(GestureLabel::RotateClockwise, &Style::random(&mut rng), &Mounting::random(&mut rng), 0.0, &mut rng);
    let slow = MotionTrace { samples: t.samples.iter().map(|s| ImuSample { t: s.t * 2.7 + 5.0, ..*s }).collect() };
    let a = preprocess(&t, &cfg).unwrap();
    let b = preprocess(&slow, &cfg).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((p - q).norm() < 1e-6);
    }
}

#[test]
fn noisy_repetitions_keep_their_label() {
    let cfg = GestureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut ts = TrainingSet::new(cfg.points);
    for label in GestureLabel::ALL {
        let t = synth::perform(label, &Style::neutral(), &Mounting::identity(), 0.0, &mut rng);
        ts.add_template(&t, label, &cfg).unwrap();
    }
    let mut same = 0;
    for i in 0..1000 {
        let label = GestureLabel::ALL[i % GestureLabel::ALL.len()];
        let t = synth::perform(label, &Style::neutral(), &Mounting::identity(), 0.05, &mut rng);
        let nb = classify(&t, &ts, &cfg).unwrap();
        same += usize::from(nb.top().unwrap().item == label);
    }
    assert!(same >= 950, "{same}/1000");
}

#[test]
fn ten_trials_per_label_make_140_templates() {
    let cfg = GestureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus = synth::corpus(10, 0, 0.05, &mut rng);
    let ts = hawk_core::eval::gesture::train(&corpus.train, &cfg).unwrap();
    assert_eq!(ts.len(), 140);
    for label in GestureLabel::ALL {
        assert_eq!(ts.templates.iter().filter(|t| t.label == label).count(), 10);
    }
}

#[test]
fn added_trace_classifies_to_itself() {
    let cfg = GestureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let corpus = synth::corpus(3, 0, 0.05, &mut rng);
    let mut ts = hawk_core::eval::gesture::train(&corpus.train, &cfg).unwrap();
    let extra = synth::perform(GestureLabel::GoUp, &Style::random(&mut rng), &Mounting::random(&mut rng), 0.05, &mut rng);
    ts.add_template(&extra, GestureLabel::GoUp, &cfg).unwrap();
    let nb = classify(&extra, &ts, &cfg).unwrap();
    let top = nb.top().unwrap();
    assert_eq!(top.item, GestureLabel::GoUp);
    assert!((top.score - 1.0).abs() < 1e-12);
}

fn arb_sample() -> impl Strategy<Value = ImuSample> {
    (
        -1e3..1e3f64,
        prop::array::uniform3(-50.0..50.0f64),
        prop::array::uniform4(-1.0..1.0f64),
    )
        .prop_map(|(t, a, q)| ImuSample { t, accel: Vec3::new(a[0], a[1], a[2]), orientation: q })
}

fn arb_record() -> impl Strategy<Value = trace_file::TraceRecord> {
    prop_oneof![
        (0usize..14).prop_map(|i| trace_file::TraceRecord::Label(GestureLabel::ALL[i])),
        (-1e3..1e3f64, 0usize..3).prop_map(|(t, p)| trace_file::TraceRecord::Pose {
            t,
            pose: [HandPose::Open, HandPose::Closed, HandPose::Other][p],
        }),
        arb_sample().prop_map(trace_file::TraceRecord::Imu),
        "[a-z ]{0,20}".prop_map(|s| trace_file::TraceRecord::Comment(s.trim().to_string())),
    ]
}

proptest! {
    #[test]
    fn trace_file_round_trips_bit_exactly(records in prop::collection::vec(arb_record(), 0..40)) {
        let text = trace_file::serialize(&records);
        let back = trace_file::parse(&text).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(trace_file::serialize(&back), text);
    }

    #[test]
    fn nbest_is_sorted_and_deterministic(seed in 0u64..50) {
        let cfg = GestureConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = synth::corpus(2, 1, 0.05, &mut rng);
        let ts = hawk_core::eval::gesture::train(&corpus.train, &cfg).unwrap();
        for p in &corpus.test {
            let a = classify(&p.trace, &ts, &cfg).unwrap();
            let b = classify(&p.trace, &ts, &cfg).unwrap();
            prop_assert!(a.is_sorted());
            prop_assert!(a.len() <= cfg.nbest);
            prop_assert_eq!(a, b);
        }
    }
}
