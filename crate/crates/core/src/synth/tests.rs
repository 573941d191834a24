use proptest::prelude::*;
use rustfft::num_complex::Complex64;

use super::*;
use crate::metrics::normalized_correlation;
use crate::signal::rms;
use crate::test_support::toy_model;

const SR: u32 = 16_000;
const SHIFT: usize = 80;

fn params(f0: impl Fn(usize) -> Option<f64>, count: usize, k: usize) -> DsmParams {
    let order = 24;
    DsmParams {
        k,
        order,
        alpha: 0.42,
        gamma: 0.0,
        seed: 5,
        frames: (0..count)
            .map(|i| {
                let f = f0(i);
                DsmFrame {
                    time: i as f64 * 0.005,
                    voiced: f.is_some(),
                    f0: f.unwrap_or(0.0),
                    weights: vec![0.0; k],
                    envelope: vec![0.0; order + 1],
                }
            })
            .collect(),
    }
}

fn target(f0: f64, weights: Vec<f64>) -> GciTarget {
    GciTarget {
        position: 0,
        f0,
        weights,
    }
}

fn silent() -> SynthesisOptions {
    SynthesisOptions {
        noise_gain: Some(0.0),
        beta: None,
    }
}

/// Ideal band-limited interpolation by zero-padding the DFT.
fn fft_upsample(x: &[f64], factor: usize) -> Vec<f64> {
    let n = x.len();
    let spec = Fourier::new(n).spectrum(x);
    let big = Fourier::new(n * factor);
    let mut half: Vec<Complex64> = spec[..=n / 2].to_vec();
    half[n / 2] *= 0.5;
    half.resize(big.bins(), Complex64::new(0.0, 0.0));
    big.inverse_real(&half).into_iter().map(|v| v * factor as f64).collect()
}

fn low_pass(x: &[f64], cut_hz: f64) -> Vec<f64> {
    let f = Fourier::new(next_pow2(x.len()));
    let mut spec = f.spectrum(x);
    spec.truncate(f.bins());
    for (k, v) in spec.iter_mut().enumerate() {
        if (k as f64) * (SR as f64) / (f.size() as f64) >= cut_hz {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    let mut y = f.inverse_real(&spec);
    y.truncate(x.len());
    y
}

#[test]
fn constant_pitch_grid() {
    let p = params(|_| Some(200.0), 200, 0);
    let plan = plan_gci_grid(&p, SR, SHIFT);
    assert_eq!(plan.length, 16_000);
    assert_eq!(plan.targets.len(), 200);
    for w in plan.targets.windows(2) {
        assert!((w[1].position - w[0].position).abs_diff(80) <= 1);
    }
}

#[test]
fn rising_pitch_shortens_periods() {
    let p = params(|i| Some(100.0 + 100.0 * i as f64 / 199.0), 200, 0);
    let plan = plan_gci_grid(&p, SR, SHIFT);
    let periods: Vec<f64> = plan.targets.iter().map(|t| SR as f64 / t.f0).collect();
    assert!(periods.windows(2).all(|w| w[1] < w[0]));
    let spacing: Vec<usize> = plan.targets.windows(2).map(|w| w[1].position - w[0].position).collect();
    assert!(spacing.windows(2).all(|w| w[1] <= w[0] + 1));
    assert!(spacing.first().unwrap() > spacing.last().unwrap());
}

#[test]
fn periods_fill_the_run() {
    let p = params(|i| (20..150).contains(&i).then(|| 120.0 + 60.0 * ((i as f64) / 15.0).sin()), 200, 0);
    let plan = plan_gci_grid(&p, SR, SHIFT);
    assert_eq!(plan.voiced_runs.len(), 1);
    let (a, b) = plan.voiced_runs[0];
    assert_eq!(plan.targets[0].position, a);
    let last = plan.targets.last().unwrap();
    let covered = last.position as f64 + SR as f64 / last.f0 - a as f64;
    assert!((covered - (b - a) as f64).abs() <= SR as f64 / last.f0);
}

#[test]
fn phase_resets_at_each_voiced_run() {
    let p = params(|i| (i % 100 >= 30).then_some(150.0), 200, 0);
    let plan = plan_gci_grid(&p, SR, SHIFT);
    assert_eq!(plan.voiced_runs.len(), 2);
    for &(a, _) in &plan.voiced_runs {
        assert!(plan.targets.iter().any(|t| t.position == a));
    }
}

#[test]
fn identity_path_is_exact() {
    let m = toy_model();
    let cache = ResamplerCache::default();
    let f = synth_voiced_frame(&target(200.0, vec![1.0]), &m.basis, &m.noise, &m.normalization, &silent(), 0, &cache)
        .unwrap();
    let expected: Vec<f64> = m.basis.mean.iter().zip(&m.basis.eigenvectors[0]).map(|(a, b)| a + b).collect();
    assert_eq!(f.samples, expected);
    assert!(!f.energy_hole_risk);
}

#[test]
fn half_pitch_is_band_limited_upsampling() {
    // normalisation leaves the top of the band empty, as here
    let mut m = toy_model();
    let frames: Vec<Vec<f64>> = crate::test_support::pulse_frames(200, 160, 3)
        .iter()
        .map(|f| low_pass(f, 0.85 * 8000.0))
        .collect();
    m.basis = crate::eigen::fit_pca(&frames, &Default::default()).unwrap();
    let cache = ResamplerCache::default();
    let f = synth_voiced_frame(&target(100.0, vec![1.0]), &m.basis, &m.noise, &m.normalization, &silent(), 0, &cache)
        .unwrap();
    let base: Vec<f64> = m.basis.mean.iter().zip(&m.basis.eigenvectors[0]).map(|(a, b)| a + b).collect();
    let oracle = fft_upsample(&base, 2);
    assert_eq!(f.samples.len(), 320);
    let ncc = normalized_correlation(&f.samples, &oracle);
    assert!(ncc > 0.999, "ncc {ncc}");
    assert_eq!(f.band_edge, 4000.0);
}

#[test]
fn noise_only_frame_is_high_band() {
    let mut m = toy_model();
    m.basis.mean.iter_mut().for_each(|v| *v = 0.0);
    let cache = ResamplerCache::default();
    let options = SynthesisOptions::default();
    for f0 in [100.0, 160.0, 250.0] {
        let size = 1024;
        let fourier = Fourier::new(size);
        let mut mean = vec![0.0; fourier.bins()];
        for seed in 0..50 {
            let f = synth_voiced_frame(&target(f0, vec![0.0; 3]), &m.basis, &m.noise, &m.normalization, &options, seed, &cache)
                .unwrap();
            fourier.power(&f.samples).iter().zip(mean.iter_mut()).for_each(|(p, a)| *a += p);
        }
        let bin = |hz: f64| (hz * size as f64 / SR as f64) as usize;
        let high = mean[bin(4000.0)..].iter().sum::<f64>() / (mean.len() - bin(4000.0)) as f64;
        let low = mean[..bin(3500.0)].iter().copied().fold(0.0, f64::max);
        assert!(10.0 * (high / low).log10() >= 20.0, "f0 {f0}");
    }
}

#[test]
fn stochastic_energy_follows_band_ratio() {
    let m = toy_model();
    let cache = ResamplerCache::default();
    for f0 in [110.0, 200.0, 310.0] {
        let (mut det, mut sto) = (0.0, 0.0);
        for seed in 0..200 {
            let t = target(f0, vec![0.4, -0.2]);
            let d = synth_voiced_frame(&t, &m.basis, &m.noise, &m.normalization, &silent(), seed, &cache).unwrap();
            let s = synth_voiced_frame(&t, &m.basis, &m.noise, &m.normalization, &Default::default(), seed, &cache)
                .unwrap();
            det += d.samples.iter().map(|v| v * v).sum::<f64>();
            sto += s.samples.iter().zip(&d.samples).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        let ratio = (sto / det).sqrt();
        let expected = m.noise.band_gain_ratio();
        assert!((ratio - expected).abs() <= 0.05 * expected, "f0 {f0}: {ratio} vs {expected}");
    }
}

#[test]
fn unvoiced_noise_statistics() {
    assert_eq!(synth_unvoiced(100, 3, 1.0), synth_unvoiced(100, 3, 1.0));
    let x = synth_unvoiced(16_000, 9, 0.5);
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((var - 0.25).abs() <= 0.05 * 0.25);
    let fourier = Fourier::new(1024);
    let mut mean = vec![0.0; fourier.bins()];
    for seed in 0..100 {
        let p = fourier.power(&synth_unvoiced(1024, seed, 1.0));
        mean.iter_mut().zip(&p).for_each(|(a, v)| *a += v);
    }
    // octave bands 250-500, ..., 4000-8000 Hz: energy per bin
    let bands: Vec<f64> = [250.0, 500.0, 1000.0, 2000.0, 4000.0]
        .iter()
        .map(|&lo| {
            let a = (lo * 1024.0 / SR as f64) as usize;
            let b = (2.0 * lo * 1024.0 / SR as f64) as usize;
            10.0 * (mean[a..b].iter().sum::<f64>() / (b - a) as f64).log10()
        })
        .collect();
    let spread = bands.iter().copied().fold(f64::NEG_INFINITY, f64::max) - bands.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread <= 2.0, "{bands:?}");
}

#[test]
fn overlap_add_support_and_gaps() {
    let plan = SynthesisPlan {
        targets: vec![target(200.0, vec![]), target(200.0, vec![])]
            .into_iter()
            .zip([300usize, 700])
            .map(|(mut t, p)| {
                t.position = p;
                t
            })
            .collect(),
        length: 1000,
        voiced_runs: vec![],
    };
    let w = centered_blackman(160);
    let out = overlap_add(&plan, &[w.clone(), w.clone()]);
    for (n, v) in out.iter().enumerate() {
        let inside = (220..380).contains(&n) || (620..780).contains(&n);
        if !inside {
            assert_eq!(*v, 0.0, "sample {n}");
        }
    }
    assert!((out[300] - 1.0).abs() < 1e-12);
    assert_eq!(out[220], 0.0);
}

#[test]
fn constant_train_is_periodic() {
    let m = toy_model();
    let p = params(|_| Some(160.0), 100, 2);
    let (exc, plan, _) = excitation(&p, &m, &silent()).unwrap();
    assert_eq!(exc.len(), 8000);
    let segment = &exc[1000..7000];
    let best = (60..140)
        .max_by(|&a, &b| {
            let r = |lag: usize| segment.iter().zip(&segment[lag..]).map(|(x, y)| x * y).sum::<f64>();
            r(a).total_cmp(&r(b))
        })
        .unwrap();
    assert_eq!(best, 100);
    assert!(plan.targets.windows(2).all(|w| w[1].position - w[0].position == 100));
}

#[test]
fn unvoiced_params_give_filtered_noise() {
    let m = toy_model();
    let p = params(|_| None, 137, 0);
    let out = vocode(&p, &m, &Default::default()).unwrap();
    assert_eq!(out.speech.len(), 137 * SHIFT);
    assert_eq!(out.report.voiced_frames, 0);
    assert!((rms(out.speech.samples()) - UNVOICED_SIGMA).abs() < 0.1);
}

#[test]
fn empty_params_give_empty_audio() {
    let out = vocode(&params(|_| None, 0, 0), &toy_model(), &Default::default()).unwrap();
    assert!(out.speech.is_empty());
}

#[test]
fn vocoding_is_deterministic() {
    let m = toy_model();
    let mut p = params(|i| (i % 60 > 15).then_some(100.0 + i as f64), 240, 3);
    for f in &mut p.frames {
        f.weights = vec![0.1, -0.05, 0.02];
        f.envelope[0] = -2.0;
        f.envelope[1] = 0.5;
    }
    let a = vocode(&p, &m, &Default::default()).unwrap();
    let b = vocode(&p, &m, &Default::default()).unwrap();
    assert_eq!(a.speech, b.speech);
    p.seed += 1;
    assert_ne!(vocode(&p, &m, &Default::default()).unwrap().speech, a.speech);
}

#[test]
fn dimension_errors_propagate() {
    let m = toy_model();
    let p = params(|_| Some(150.0), 10, m.basis.component_count() + 1);
    assert!(matches!(excitation(&p, &m, &Default::default()), Err(Error::DimensionMismatch { .. })));
    let mut p = params(|_| Some(150.0), 10, 2);
    p.frames[3].weights.pop();
    assert!(excitation(&p, &m, &Default::default()).is_err());
    let p = params(|_| Some(20.0), 10, 0);
    assert!(excitation(&p, &m, &Default::default()).is_err());
}

#[test]
fn energy_is_continuous_in_voiced_runs() {
    let m = toy_model();
    let mut p = params(|_| Some(137.0), 200, 2);
    p.frames.iter_mut().for_each(|f| f.weights = vec![0.3, 0.1]);
    let (exc, plan, _) = excitation(&p, &m, &Default::default()).unwrap();
    let frame_rms: Vec<f64> = plan.targets.windows(2).skip(2).map(|w| rms(&exc[w[0].position..w[1].position])).collect();
    for w in frame_rms.windows(2) {
        let r = w[1] / w[0];
        assert!((0.5..=2.0).contains(&r), "{r}");
    }
    let level = rms(&exc[400..15_600]);
    assert!((0.5..2.0).contains(&level), "excitation RMS {level}");
}

#[test]
fn voicing_boundaries_do_not_click() {
    let m = toy_model();
    let mut p = params(|i| ((i / 40) % 2 == 1).then_some(140.0), 400, 1);
    for f in &mut p.frames {
        f.weights = vec![0.2];
        f.envelope[0] = -3.0;
        f.envelope[1] = 0.8;
        f.envelope[2] = 0.2;
    }
    let out = vocode(&p, &m, &Default::default()).unwrap();
    let y = out.speech.samples();
    for i in (40..400).step_by(40) {
        let b = i * SHIFT - SHIFT / 2;
        let running = rms(&y[b - 160..b + 160]);
        for n in b - 16..b + 16 {
            assert!((y[n + 1] - y[n]).abs() <= 5.0 * running, "jump at {n}");
        }
    }
}

#[test]
fn first_eigenvector_mode_matches_its_deterministic_part() {
    let m = toy_model();
    let mut full = params(|_| Some(125.0), 200, 15);
    for f in &mut full.frames {
        f.envelope[0] = -1.0;
        f.envelope[1] = 0.6;
        f.weights = (0..15).map(|j| 0.2 / (1.0 + j as f64)).collect();
    }
    let mut single = full.clone();
    single.k = 1;
    single.frames.iter_mut().for_each(|f| f.weights.truncate(1));
    assert!(vocode(&full, &m, &Default::default()).is_ok());
    let noisy = vocode(&single, &m, &Default::default()).unwrap();
    let clean = vocode(&single, &m, &silent()).unwrap();
    let ncc = normalized_correlation(
        &low_pass(noisy.speech.samples(), 4000.0),
        &low_pass(clean.speech.samples(), 4000.0),
    );
    assert!(ncc > 0.9, "ncc {ncc}");
}

#[test]
fn energy_hole_detector() {
    let mut x = vec![0.0; 256];
    x[128] = 1.0;
    assert!(find_energy_hole(&x, SR, 4000.0).is_none());
    // a 1 kHz tone alone leaves most of the low band empty
    let tone: Vec<f64> = (0..256)
        .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / SR as f64).sin())
        .zip(centered_blackman(256))
        .map(|(a, w)| a * w)
        .collect();
    assert!(find_energy_hole(&tone, SR, 4000.0).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frames_above_f0_min_have_no_energy_hole(f0 in 100.0f64..400.0, w1 in -1.0f64..1.0, seed in any::<u64>()) {
        let m = toy_model_cached();
        let cache = ResamplerCache::default();
        let t = target(f0, vec![w1, 0.1]);
        let f = synth_voiced_frame(&t, &m.basis, &m.noise, &m.normalization, &Default::default(), seed, &cache).unwrap();
        prop_assert!(m.normalization.resampling_ratio(f0) <= 2.0 + 1e-12);
        prop_assert!(f.band_edge >= 4000.0 - 1e-9);
        prop_assert!(find_energy_hole(&f.samples, SR, 4000.0).is_none());
    }
}

fn toy_model_cached() -> &'static DsmModel {
    static MODEL: std::sync::OnceLock<DsmModel> = std::sync::OnceLock::new();
    MODEL.get_or_init(toy_model)
}
