//! High-band stochastic excitation: AR-shaped Gaussian noise under a
//! pitch-synchronous triangular envelope.

use rustfft::num_complex::Complex64;

use crate::rng::GaussianSource;
use crate::spectrum::Fourier;
use crate::{Error, Result};

pub const DEFAULT_AR_ORDER: usize = 18;
pub const DEFAULT_BETA: f64 = 0.5;
/// FFT size for the averaged training periodogram.
pub const AR_FFT_SIZE: usize = 1024;
const MIN_AR_ORDER: usize = 2;
const IMPULSE_LEN: usize = 8192;
const WARMUP_PER_POLE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    ar: Vec<f64>,
    gain: f64,
    beta: f64,
    band_gain_ratio: f64,
    power_gain: f64,
}

impl NoiseModel {
    /// `ar` is monic (`ar[0] == 1`); the filter is `gain / A(z)`.
    pub fn new(ar: Vec<f64>, gain: f64, beta: f64, band_gain_ratio: f64) -> Result<Self> {
        if ar.first() != Some(&1.0) {
            return Err(Error::config("AR polynomial must be monic"));
        }
        if !crate::envelope::filter::is_minimum_phase(&ar) {
            return Err(Error::config("AR polynomial is not minimum phase"));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::config(format!("AR gain {gain} must be positive")));
        }
        check_beta(beta)?;
        if !(band_gain_ratio > 0.0 && band_gain_ratio.is_finite()) {
            return Err(Error::config(format!("band gain ratio {band_gain_ratio} must be positive")));
        }
        let mut impulse = vec![0.0; IMPULSE_LEN];
        impulse[0] = 1.0;
        let power_gain = ar_filter(&ar, gain, &impulse).iter().map(|v| v * v).sum();
        Ok(Self {
            ar,
            gain,
            beta,
            band_gain_ratio,
            power_gain,
        })
    }

    pub fn ar_coefficients(&self) -> &[f64] {
        &self.ar
    }

    pub fn order(&self) -> usize {
        self.ar.len() - 1
    }

    pub fn ar_gain(&self) -> f64 {
        self.gain
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn band_gain_ratio(&self) -> f64 {
        self.band_gain_ratio
    }

    /// Output variance of the filter for unit-variance white input.
    pub fn power_gain(&self) -> f64 {
        self.power_gain
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.ar, self.gain, beta, self.band_gain_ratio)
    }

    pub fn with_band_gain_ratio(self, ratio: f64) -> Result<Self> {
        Self::new(self.ar, self.gain, self.beta, ratio)
    }

    /// `20 log10 |G / A(e^jw)|` at `hz`.
    pub fn response_db(&self, hz: f64, sample_rate: u32) -> f64 {
        let w = 2.0 * std::f64::consts::PI * hz / sample_rate as f64;
        let a: Complex64 = self
            .ar
            .iter()
            .enumerate()
            .map(|(k, c)| Complex64::from_polar(*c, -(k as f64) * w))
            .sum();
        20.0 * (self.gain / a.norm()).log10()
    }

    /// Peak response over `[f_m, Nyquist]` minus the response at `f_m - 500 Hz`, dB.
    pub fn stopband_attenuation(&self, sample_rate: u32, f_m: f64) -> f64 {
        let nyquist = sample_rate as f64 / 2.0;
        let steps = 400;
        let peak = (0..=steps)
            .map(|i| self.response_db(f_m + (nyquist - f_m) * i as f64 / steps as f64, sample_rate))
            .fold(f64::NEG_INFINITY, f64::max);
        peak - self.response_db(f_m - 500.0, sample_rate)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!("envelope floor {beta} outside (0, 1]")));
    }
    Ok(())
}

/// `y[n] = gain * x[n] - sum_k a[k] y[n - k]`.
pub fn ar_filter(a: &[f64], gain: f64, x: &[f64]) -> Vec<f64> {
    let p = a.len() - 1;
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let m = p.min(n);
        // oldest taps first: only the last two terms wait on recent outputs
        let older: f64 = if m >= 2 {
            y[n - m..n - 1].iter().zip(a[2..=m].iter().rev()).map(|(v, c)| c * v).sum()
        } else {
            0.0
        };
        let recent = if m >= 1 { a[1] * y[n - 1] } else { 0.0 };
        y[n] = gain * x[n] - older - recent;
    }
    y
}

/// Monic prediction polynomial and final prediction error for autocorrelation `r[0..=p]`.
/// `None` if the recursion meets a non-positive error or a reflection of modulus >= 1.
pub fn levinson_durbin(r: &[f64], p: usize) -> Option<(Vec<f64>, f64)> {
    if r.len() <= p || !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        if !(k.abs() < 1.0) {
            return None;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            return None;
        }
    }
    Some((a, err))
}

/// Average periodogram of energy-normalised frames, `AR_FFT_SIZE / 2 + 1` bins.
pub fn mean_periodogram(frames: &[&[f64]]) -> Vec<f64> {
    let fourier = Fourier::new(AR_FFT_SIZE);
    let mut acc = vec![0.0; fourier.bins()];
    let mut used = 0usize;
    for f in frames {
        let p = fourier.power(&f[..f.len().min(AR_FFT_SIZE)]);
        let e: f64 = p.iter().sum();
        if e > 0.0 && e.is_finite() {
            acc.iter_mut().zip(&p).for_each(|(a, v)| *a += v / e);
            used += 1;
        }
    }
    if used > 0 {
        acc.iter_mut().for_each(|a| *a /= used as f64);
    }
    acc
}

/// AR fit to the mean periodogram of the frames, optionally after zeroing
/// everything below `high_pass` Hz. The order drops by one on an unstable
/// fit, down to 2.
pub fn estimate_ar_filter(
    frames: &[&[f64]],
    sample_rate: u32,
    order: usize,
    high_pass: Option<f64>,
) -> Result<(Vec<f64>, f64)> {
    if order < MIN_AR_ORDER {
        return Err(Error::config(format!("AR order {order} below {MIN_AR_ORDER}")));
    }
    let mut psd = mean_periodogram(frames);
    if psd.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyCorpus("no frames with energy for the AR fit".into()));
    }
    if let Some(cut) = high_pass {
        let bin_hz = sample_rate as f64 / AR_FFT_SIZE as f64;
        for (k, v) in psd.iter_mut().enumerate() {
            if (k as f64) * bin_hz < cut {
                *v = 0.0;
            }
        }
    }
    let peak = psd.iter().copied().fold(0.0, f64::max);
    // a -40 dB floor: deeper stop bands make the fit ripple in the pass band
    psd.iter_mut().for_each(|v| *v = v.max(peak * 1e-4));
    let autocorr = autocorrelation(&psd);
    let r: Vec<f64> = autocorr.iter().map(|v| v / autocorr[0]).collect();
    for p in (MIN_AR_ORDER..=order).rev() {
        if let Some((a, err)) = levinson_durbin(&r, p) {
            if crate::envelope::filter::is_minimum_phase(&a) {
                return Ok((a, err.sqrt()));
            }
        }
    }
    Err(Error::config("no stable AR fit down to order 2"))
}

fn autocorrelation(half_psd: &[f64]) -> Vec<f64> {
    let fourier = Fourier::new(2 * (half_psd.len() - 1));
    let spectrum: Vec<Complex64> = half_psd.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fourier.inverse_real(&spectrum)
}

/// Mean over frames of `RMS(band >= f_m) / RMS(band < f_m)`.
pub fn measure_band_ratio(frames: &[&[f64]], sample_rate: u32, f_m: f64) -> Option<f64> {
    let fourier = Fourier::new(AR_FFT_SIZE);
    let bin_hz = sample_rate as f64 / AR_FFT_SIZE as f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for f in frames {
        let p = fourier.power(&f[..f.len().min(AR_FFT_SIZE)]);
        let (mut low, mut high) = (0.0, 0.0);
        for (k, v) in p.iter().enumerate() {
            if (k as f64) * bin_hz < f_m {
                low += v;
            } else {
                high += v;
            }
        }
        if low > 0.0 && high.is_finite() {
            sum += (high / low).sqrt();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Piecewise-linear envelope over a two-period frame: `floor` at both ends,
/// 1 at the central GCI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularEnvelope {
    pub length: usize,
    pub apex_index: usize,
    pub floor: f64,
}

impl TriangularEnvelope {
    pub fn values(&self) -> Vec<f64> {
        let rise = self.apex_index.max(1) as f64;
        let fall = (self.length - 1 - self.apex_index).max(1) as f64;
        (0..self.length)
            .map(|i| {
                let d = if i <= self.apex_index {
                    (self.apex_index - i) as f64 / rise
                } else {
                    (i - self.apex_index) as f64 / fall
                };
                1.0 - (1.0 - self.floor) * d
            })
            .collect()
    }
}

pub fn build_envelope(target_period: usize, beta: f64) -> Result<TriangularEnvelope> {
    if target_period < 8 {
        return Err(Error::config(format!("target period {target_period} below 8 samples")));
    }
    check_beta(beta)?;
    Ok(TriangularEnvelope {
        length: 2 * target_period,
        apex_index: target_period,
        floor: beta,
    })
}

/// AR-filtered Gaussian noise with per-sample RMS `band_gain_ratio`, times `envelope`.
pub fn generate_noise_frame(model: &NoiseModel, envelope: &[f64], seed: u64) -> Vec<f64> {
    let len = envelope.len();
    let warmup = WARMUP_PER_POLE * model.order();
    let white = GaussianSource::new(seed).take(warmup + len);
    let shaped = ar_filter(&model.ar, model.gain, &white);
    let scale = model.band_gain_ratio / model.power_gain.sqrt();
    shaped[warmup..]
        .iter()
        .zip(envelope)
        .map(|(v, e)| scale * v * e)
        .collect()
}
