use proptest::prelude::*;

use super::*;
use crate::rng::GaussianSource;
use crate::signal::SAMPLE_RATE;

fn sawtooth(f0: f64, len: usize) -> SpeechSignal {
    let sr = SAMPLE_RATE as f64;
    let x = (0..len).map(|n| 0.5 * (2.0 * (n as f64 * f0 / sr).fract() - 1.0)).collect();
    SpeechSignal::new(x, SAMPLE_RATE).unwrap()
}

fn impulses(period: usize, offset: usize, len: usize, amplitude: f64) -> SpeechSignal {
    let mut x = vec![0.0; len];
    let mut rng = GaussianSource::new(11);
    for v in x.iter_mut() {
        *v = 0.01 * rng.next_normal();
    }
    for n in (offset..len).step_by(period) {
        x[n] = amplitude;
    }
    SpeechSignal::new(x, SAMPLE_RATE).unwrap()
}

fn constant_track(f0: f64, len: usize) -> PitchTrack {
    let frames = (0..len.div_ceil(160))
        .map(|i| PitchFrame {
            time: i as f64 * PITCH_HOP,
            f0,
            voiced: true,
        })
        .collect();
    PitchTrack::new(frames, PITCH_HOP, 60.0, 400.0).unwrap()
}

#[test]
fn sawtooth_pitch_is_tracked() {
    let track = estimate_pitch(&sawtooth(100.0, 16_000), 60.0, 240.0).unwrap();
    assert_eq!(track.frames().len(), 100);
    for f in track.frames() {
        assert!(f.voiced, "frame at {} unvoiced", f.time);
        assert!((f.f0 - 100.0).abs() <= 2.0, "f0 {} at {}", f.f0, f.time);
    }
}

#[test]
fn white_noise_is_unvoiced() {
    for seed in 0..4 {
        let x = GaussianSource::new(seed).take(16_000).into_iter().map(|v| 0.1 * v).collect();
        let track = estimate_pitch(&SpeechSignal::new(x, SAMPLE_RATE).unwrap(), 60.0, 240.0).unwrap();
        assert!(track.voiced_fraction() <= 0.05, "seed {seed}: {}", track.voiced_fraction());
    }
}

#[test]
fn silence_is_unvoiced() {
    let track = estimate_pitch(&SpeechSignal::zeros(8000, SAMPLE_RATE), 60.0, 240.0).unwrap();
    assert!(track.frames().iter().all(|f| !f.voiced && f.f0 == 0.0));
}

#[test]
fn bad_range_is_rejected() {
    let s = SpeechSignal::zeros(100, SAMPLE_RATE);
    assert!(estimate_pitch(&s, 0.0, 200.0).is_err());
    assert!(estimate_pitch(&s, 200.0, 100.0).is_err());
    assert!(estimate_pitch(&s, 60.0, 4000.0).is_err());
}

#[test]
fn track_invariants_are_enforced() {
    let frame = |time, f0, voiced| PitchFrame { time, f0, voiced };
    assert!(PitchTrack::new(vec![frame(0.0, 500.0, true)], 0.01, 60.0, 400.0).is_err());
    assert!(PitchTrack::new(vec![frame(0.01, 100.0, true), frame(0.01, 100.0, true)], 0.01, 60.0, 400.0).is_err());
    let t = PitchTrack::new(vec![frame(0.0, 123.0, false)], 0.01, 60.0, 400.0).unwrap();
    assert_eq!(t.frames()[0].f0, 0.0);
}

#[test]
fn f0_is_interpolated_between_voiced_frames() {
    let frame = |time, f0| PitchFrame { time, f0, voiced: true };
    let t = PitchTrack::new(vec![frame(0.0, 100.0), frame(0.01, 200.0)], 0.01, 60.0, 400.0).unwrap();
    assert!((t.f0_at(0.0025).unwrap() - 125.0).abs() < 1e-9);
    assert!((t.f0_at(0.0075).unwrap() - 175.0).abs() < 1e-9);
}

#[test]
fn impulse_train_gcis_are_found() {
    let s = impulses(80, 37, 16_000, 1.0);
    let gci = detect_gci(&s, &constant_track(200.0, 16_000));
    let expected: Vec<usize> = (37..16_000).step_by(80).collect();
    assert_eq!(gci.len(), expected.len());
    for (g, e) in gci.instants.iter().zip(&expected) {
        assert!(g.abs_diff(*e) <= 1, "{g} vs {e}");
    }
}

#[test]
fn unvoiced_input_gives_no_gcis() {
    let s = impulses(80, 0, 4000, 1.0);
    let frames = (0..25)
        .map(|i| PitchFrame {
            time: i as f64 * PITCH_HOP,
            f0: 0.0,
            voiced: false,
        })
        .collect();
    let track = PitchTrack::new(frames, PITCH_HOP, 60.0, 400.0).unwrap();
    assert!(detect_gci(&s, &track).is_empty());
}

#[test]
fn polarity_flip_keeps_gcis() {
    let s = impulses(100, 20, 8000, -1.0);
    let flipped = SpeechSignal::new(s.samples().iter().map(|v| -v).collect(), SAMPLE_RATE).unwrap();
    let track = constant_track(160.0, 8000);
    let a = detect_gci(&s, &track);
    let b = detect_gci(&flipped, &track);
    assert_eq!(a, b);
    assert!((20..8000).step_by(100).eq(a.instants.iter().copied()));
}

#[test]
fn gcis_follow_segments() {
    // voiced 0.1-0.4 s and 0.6-0.9 s at 125 Hz
    let s = impulses(128, 0, 16_000, 1.0);
    let frames = (0..100)
        .map(|i| {
            let t = i as f64 * PITCH_HOP;
            let voiced = (0.1..0.4).contains(&t) || (0.6..0.9).contains(&t);
            PitchFrame {
                time: t,
                f0: if voiced { 125.0 } else { 0.0 },
                voiced,
            }
        })
        .collect();
    let track = PitchTrack::new(frames, PITCH_HOP, 60.0, 400.0).unwrap();
    let segments = voiced_segments(&track, s.len(), SAMPLE_RATE);
    assert_eq!(segments.len(), 2);
    let gci = detect_gci(&s, &track);
    for &(a, b) in &segments {
        let count = gci.instants.iter().filter(|&&g| (a..b).contains(&g)).count();
        let expected = ((b - a) as f64 / SAMPLE_RATE as f64 * 125.0).round() as usize;
        assert!(count.abs_diff(expected) <= 1, "{count} vs {expected}");
    }
    assert!(gci.instants.iter().all(|&g| segments.iter().any(|&(a, b)| (a..b).contains(&g))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gci_spacing_stays_within_period_bounds(period in 40usize..250, offset in 0usize..40, jitter in 0usize..4) {
        let len = 8000;
        let mut x = vec![0.0; len];
        let mut n = offset;
        let mut k = 0;
        while n < len {
            x[n] = 1.0;
            n += period + if k % 2 == 0 { jitter } else { 0 };
            k += 1;
        }
        let s = SpeechSignal::new(x, SAMPLE_RATE).unwrap();
        let f0 = SAMPLE_RATE as f64 / period as f64;
        let gci = detect_gci(&s, &constant_track(f0.clamp(60.0, 400.0), len));
        for w in gci.instants.windows(2) {
            let d = (w[1] - w[0]) as f64;
            prop_assert!(w[1] > w[0]);
            prop_assert!(d >= 0.5 * period as f64 && d <= 2.0 * period as f64);
        }
    }

    #[test]
    fn pitch_is_deterministic(seed in 0u64..1000) {
        let x: Vec<f64> = GaussianSource::new(seed).take(3200);
        let s = SpeechSignal::new(x.iter().map(|v| v * 0.1).collect(), SAMPLE_RATE).unwrap();
        prop_assert_eq!(estimate_pitch(&s, 60.0, 240.0).unwrap(), estimate_pitch(&s, 60.0, 240.0).unwrap());
    }
}
