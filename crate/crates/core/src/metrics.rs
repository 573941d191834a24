//! Objective measures used by the tests, the CLI reports and the acceptance suite.

use crate::pitch::PitchTrack;
use crate::spectrum::{next_pow2, Fourier};
use crate::window::WindowKind;

/// Mean per-frame SNR in dB over frames where the reference has energy.
/// Per-frame values are clamped to `[-10, 120]` dB.
pub fn segmental_snr(reference: &[f64], test: &[f64], frame_len: usize) -> f64 {
    let n = reference.len().min(test.len());
    let peak_energy = reference
        .chunks(frame_len)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let mut total = 0.0;
    let mut frames = 0usize;
    for start in (0..n).step_by(frame_len) {
        let end = (start + frame_len).min(n);
        let signal: f64 = reference[start..end].iter().map(|v| v * v).sum();
        if signal <= peak_energy * 1e-6 || signal == 0.0 {
            continue;
        }
        let noise: f64 = reference[start..end]
            .iter()
            .zip(&test[start..end])
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let snr = if noise == 0.0 {
            120.0
        } else {
            (10.0 * (signal / noise).log10()).clamp(-10.0, 120.0)
        };
        total += snr;
        frames += 1;
    }
    if frames == 0 {
        return 120.0;
    }
    total / frames as f64
}

/// Normalised cross-correlation at lag zero.
pub fn normalized_correlation(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab / (aa * bb).sqrt()
}

/// Lag in `-max_lag..=max_lag` maximising the cross-correlation of `a` and `b`.
pub fn peak_lag(a: &[f64], b: &[f64], max_lag: usize) -> isize {
    let mut best = (0isize, f64::NEG_INFINITY);
    for lag in -(max_lag as isize)..=max_lag as isize {
        let mut s = 0.0;
        for (i, x) in a.iter().enumerate() {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < b.len() {
                s += x * b[j as usize];
            }
        }
        if s > best.1 {
            best = (lag, s);
        }
    }
    best.0
}

/// Geometric over arithmetic mean of the periodogram (bins 1..N/2).
pub fn spectral_flatness(x: &[f64]) -> f64 {
    let fourier = Fourier::new(next_pow2(x.len()));
    let w = WindowKind::Hanning.symmetric(x.len());
    let xw: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
    let p = fourier.power(&xw);
    let bins = &p[1..p.len() - 1];
    let mean = bins.iter().sum::<f64>() / bins.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let floor = mean * 1e-12;
    let log_mean = bins.iter().map(|v| v.max(floor).ln()).sum::<f64>() / bins.len() as f64;
    log_mean.exp() / mean
}

/// Triangular mel filterbank over `[0, max_hz]` applied to power spectra.
#[derive(Debug, Clone)]
pub struct MelBands {
    fourier: Fourier,
    window: Vec<f64>,
    filters: Vec<Vec<(usize, f64)>>,
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl MelBands {
    pub fn new(frame_len: usize, sample_rate: u32, bands: usize, max_hz: f64) -> Self {
        let fourier = Fourier::new(next_pow2(frame_len) * 2);
        let size = fourier.size();
        let top = hz_to_mel(max_hz);
        let edges: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
            .collect();
        let hz_per_bin = sample_rate as f64 / size as f64;
        let filters = (0..bands)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..fourier.bins())
                    .filter_map(|k| {
                        let f = k as f64 * hz_per_bin;
                        let w = if f > lo && f <= mid {
                            (f - lo) / (mid - lo)
                        } else if f > mid && f < hi {
                            (hi - f) / (hi - mid)
                        } else {
                            0.0
                        };
                        (w > 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect();
        Self {
            fourier,
            window: WindowKind::Hamming.symmetric(frame_len),
            filters,
        }
    }

    /// Band energies in dB of one frame.
    pub fn energies_db(&self, frame: &[f64]) -> Vec<f64> {
        let xw: Vec<f64> = frame.iter().zip(&self.window).map(|(a, b)| a * b).collect();
        let p = self.fourier.power(&xw);
        self.filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().map(|(k, w)| p[*k] * w).sum();
                10.0 * (e + 1e-20).log10()
            })
            .collect()
    }
}

/// Per-frame RMS difference of mel-band energies in dB; frames are centred on `centers`.
pub fn mel_log_spectral_distortion(
    reference: &[f64],
    test: &[f64],
    sample_rate: u32,
    centers: &[usize],
    max_hz: f64,
) -> Vec<f64> {
    let frame_len = (0.025 * sample_rate as f64) as usize;
    let bands = MelBands::new(frame_len, sample_rate, 20, max_hz);
    let take = |x: &[f64], c: usize| -> Vec<f64> {
        (0..frame_len)
            .map(|n| {
                let t = c as isize + n as isize - (frame_len / 2) as isize;
                if t >= 0 && (t as usize) < x.len() {
                    x[t as usize]
                } else {
                    0.0
                }
            })
            .collect()
    };
    centers
        .iter()
        .map(|&c| {
            let a = bands.energies_db(&take(reference, c));
            let b = bands.energies_db(&take(test, c));
            let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            (sq / a.len() as f64).sqrt()
        })
        .collect()
}

/// Relative F0 deviations `|f_b - f_a| / f_a` on frames voiced in both tracks.
pub fn f0_deviations(reference: &PitchTrack, test: &PitchTrack) -> Vec<f64> {
    reference
        .frames()
        .iter()
        .zip(test.frames())
        .filter(|(a, b)| a.voiced && b.voiced)
        .map(|(a, b)| (b.f0 - a.f0).abs() / a.f0)
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_of_identical_signals_is_capped() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(segmental_snr(&x, &x, 100), 120.0);
    }

    #[test]
    fn snr_of_scaled_signal() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.1).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 1.1).collect();
        assert!((segmental_snr(&x, &y, 100) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn flatness_orders_signals() {
        let noise = crate::rng::GaussianSource::new(1).take(1024);
        let tone: Vec<f64> = (0..1024).map(|i| (i as f64 * 0.3).sin()).collect();
        assert!(spectral_flatness(&noise) > 0.3);
        assert!(spectral_flatness(&tone) < 0.01);
    }

    #[test]
    fn peak_lag_finds_shift() {
        let a: Vec<f64> = (0..64).map(|i| if i == 20 { 1.0 } else { 0.0 }).collect();
        let b: Vec<f64> = (0..64).map(|i| if i == 23 { 1.0 } else { 0.0 }).collect();
        assert_eq!(peak_lag(&a, &b, 8), 3);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
