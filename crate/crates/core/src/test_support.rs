//! Small trained models for unit tests.

use rustfft::num_complex::Complex64;

use crate::dataset::compute_normalization;
use crate::eigen::{fit_pca, PcaOptions};
use crate::envelope::EnvelopeConfig;
use crate::model::DsmModel;
use crate::noise::{estimate_ar_filter, NoiseModel, DEFAULT_AR_ORDER, DEFAULT_BETA};
use crate::rng::GaussianSource;
use crate::signal::l2_norm;
use crate::spectrum::Fourier;
use crate::window::centered_blackman;

/// Residual-like GCI-centred frames: a sharp pulse, a slow swell and a little noise, unit norm.
pub fn pulse_frames(count: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = GaussianSource::new(seed);
    let w = centered_blackman(len);
    let c = (len / 2) as f64;
    (0..count)
        .map(|i| {
            let lobe = 0.3 + 0.3 * ((i * 7919) % 97) as f64 / 97.0;
            let f: Vec<f64> = (0..len)
                .map(|n| {
                    let t = n as f64 - c;
                    let spike = if t == 0.0 {
                        -1.0
                    } else if t == 1.0 {
                        lobe
                    } else {
                        0.0
                    };
                    let swell = 0.2 * (-(t + 6.0).powi(2) / 18.0).exp();
                    w[n] * (spike + swell + 0.05 * g.next_normal())
                })
                .collect();
            let norm = l2_norm(&f);
            f.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

pub fn high_pass_noise(len: usize, seed: u64, cut_hz: f64, sample_rate: u32) -> Vec<f64> {
    let f = Fourier::new(len);
    let mut spec = f.spectrum(&GaussianSource::new(seed).take(len));
    spec.truncate(f.bins());
    for (k, v) in spec.iter_mut().enumerate() {
        if (k as f64) * (sample_rate as f64) / (len as f64) < cut_hz {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    f.inverse_real(&spec)
}

/// F0_min 100 Hz, normalised length 160, 64 stored eigenvectors.
pub fn toy_model() -> DsmModel {
    let norm = compute_normalization(16_000, 4000.0, 100.0)
        .unwrap()
        .with_f0_max(400.0)
        .unwrap();
    let basis = fit_pca(&pulse_frames(300, norm.normalized_length, 1), &PcaOptions::default()).unwrap();
    let noise_frames: Vec<Vec<f64>> = (0..100).map(|s| high_pass_noise(512, s, 4000.0, 16_000)).collect();
    let refs: Vec<&[f64]> = noise_frames.iter().map(Vec::as_slice).collect();
    let (a, g) = estimate_ar_filter(&refs, 16_000, DEFAULT_AR_ORDER, Some(4000.0)).unwrap();
    DsmModel {
        sample_rate: 16_000,
        normalization: norm,
        basis,
        noise: NoiseModel::new(a, g, DEFAULT_BETA, 0.3).unwrap(),
        envelope: EnvelopeConfig::default(),
    }
}
