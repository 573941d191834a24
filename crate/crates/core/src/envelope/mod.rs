//! Spectral envelope: mel-cepstral analysis, inverse filtering to the
//! residual, and the matching synthesis filter.

pub mod filter;
pub mod generalized;
pub mod mcep;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::signal::{rms, SpeechSignal};
use crate::spectrum::{next_pow2, Fourier};
use crate::window::WindowKind;
use crate::{Error, Result};

use filter::{is_minimum_phase, mlsa_peak_magnitudes, MglsaFilter, MlsaFilter, MAX_PADE_MAGNITUDE};
use mcep::{mc2b, WarpedGrid};

/// Frames whose RMS is below this are treated as silence.
pub const SILENCE_RMS: f64 = 1e-6;
/// `c0` assigned to silent frames: `ln(1e-5)`.
pub fn silence_log_gain() -> f64 {
    1e-5f64.ln()
}

pub const GAMMA_GENERALIZED: f64 = -1.0 / 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConfig {
    /// Frequency-warping coefficient.
    pub alpha: f64,
    /// Generalization exponent; 0 selects the mel-cepstral / MLSA path,
    /// -1/3 the generalized one.
    pub gamma: f64,
    pub order: usize,
    /// Seconds.
    pub frame_shift: f64,
    /// Seconds.
    pub frame_length: f64,
    pub window: WindowKind,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            alpha: 0.42,
            gamma: 0.0,
            order: 24,
            frame_shift: 0.005,
            frame_length: 0.025,
            window: WindowKind::Hamming,
        }
    }
}

impl EnvelopeConfig {
    /// Default settings with `gamma = -1/3`.
    pub fn generalized() -> Self {
        Self {
            gamma: GAMMA_GENERALIZED,
            ..Self::default()
        }
    }

    pub fn is_generalized(&self) -> bool {
        self.gamma != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha {} outside [0, 1)", self.alpha)));
        }
        if self.gamma != 0.0 && (self.gamma - GAMMA_GENERALIZED).abs() > 1e-12 {
            return Err(Error::config(format!("gamma {} is neither 0 nor -1/3", self.gamma)));
        }
        if self.order < 1 {
            return Err(Error::config("envelope order must be at least 1"));
        }
        if !(self.frame_shift > 0.0 && self.frame_shift < self.frame_length) {
            return Err(Error::config("frame shift must be positive and shorter than the frame"));
        }
        Ok(())
    }

    pub fn shift_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_shift * sample_rate as f64).round() as usize).max(1)
    }

    pub fn length_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_length * sample_rate as f64).round() as usize).max(2)
    }

    /// Number of frames covering `samples` samples.
    pub fn frame_count(&self, samples: usize, sample_rate: u32) -> usize {
        samples.div_ceil(self.shift_samples(sample_rate))
    }
}

/// Per-frame envelope coefficients `c0..c_order`; frame `i` is centred on
/// sample `i * shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrack {
    frames: Vec<Vec<f64>>,
    config: EnvelopeConfig,
    sample_rate: u32,
    flagged: Vec<usize>,
}

impl EnvelopeTrack {
    pub fn new(frames: Vec<Vec<f64>>, config: EnvelopeConfig, sample_rate: u32) -> Result<Self> {
        config.validate()?;
        for (i, f) in frames.iter().enumerate() {
            if f.len() != config.order + 1 {
                return Err(Error::DimensionMismatch {
                    expected: config.order + 1,
                    found: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("envelope frame {i} has non-finite coefficients")));
            }
        }
        Ok(Self {
            frames,
            config,
            sample_rate,
            flagged: Vec::new(),
        })
    }

    /// Flat, unit-gain envelope (all coefficients zero).
    pub fn flat(frames: usize, config: EnvelopeConfig, sample_rate: u32) -> Result<Self> {
        let order = config.order;
        Self::new(vec![vec![0.0; order + 1]; frames], config, sample_rate)
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn config(&self) -> &EnvelopeConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_shift(&self) -> f64 {
        self.config.frame_shift
    }

    /// Frames whose estimation did not converge and reuse the previous frame.
    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    /// `log|H|` of frame `i` at normalised angular frequency `omega` in `[0, pi]`.
    pub fn log_amplitude(&self, i: usize, omega: f64) -> f64 {
        log_amplitude(&self.frames[i], self.config.alpha, self.config.gamma, omega)
    }

    fn check_covers(&self, samples: usize, sample_rate: u32) -> Result<()> {
        if sample_rate != self.sample_rate {
            return Err(Error::config(format!(
                "signal rate {sample_rate} Hz differs from envelope rate {} Hz",
                self.sample_rate
            )));
        }
        let expected = self.config.frame_count(samples, sample_rate);
        if expected != self.frames.len() {
            return Err(Error::DurationMismatch {
                signal: samples,
                envelope: self.frames.len() * self.config.shift_samples(sample_rate),
            });
        }
        Ok(())
    }

    /// Verifies that every frame yields a stable synthesis filter and returns
    /// the MLSA-domain coefficients per frame.
    fn filter_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        let alpha = self.config.alpha;
        let gamma = self.config.gamma;
        self.frames
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if gamma == 0.0 {
                    let b = mc2b(c, alpha);
                    let (f1, f2) = mlsa_peak_magnitudes(&b, alpha);
                    if f1 >= MAX_PADE_MAGNITUDE || f2 >= MAX_PADE_MAGNITUDE {
                        return Err(Error::UnstableFrame { frame: i });
                    }
                    Ok(b)
                } else {
                    let k = 1.0 + gamma * c[0];
                    let mut poly: Vec<f64> = c.iter().map(|v| gamma * v / k).collect();
                    poly[0] = 1.0;
                    if k <= 0.0 || !is_minimum_phase(&poly) {
                        return Err(Error::UnstableFrame { frame: i });
                    }
                    Ok(mc2b(c, alpha))
                }
            })
            .collect()
    }
}

/// `log|H(e^jw)|` for mel-generalized coefficients.
pub fn log_amplitude(c: &[f64], alpha: f64, gamma: f64, omega: f64) -> f64 {
    let beta = mcep::warp(omega, alpha);
    if gamma == 0.0 {
        return c.iter().enumerate().map(|(m, v)| v * (m as f64 * beta).cos()).sum();
    }
    let z: Complex64 = c
        .iter()
        .enumerate()
        .map(|(m, v)| Complex64::from_polar(*v, -(m as f64) * beta))
        .sum();
    (1.0 + gamma * z).norm().ln() / gamma
}

pub fn analyze_envelope(signal: &SpeechSignal, cfg: &EnvelopeConfig) -> Result<EnvelopeTrack> {
    cfg.validate()?;
    let sr = signal.sample_rate();
    let shift = cfg.shift_samples(sr);
    let len = cfg.length_samples(sr);
    let count = cfg.frame_count(signal.len(), sr);
    let fourier = Fourier::new(next_pow2(len));
    let grid = WarpedGrid::new(fourier.bins(), cfg.order, cfg.alpha);
    let window = cfg.window.symmetric(len);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let x = signal.samples();

    let fits: Vec<Option<Vec<f64>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let start = (i * shift) as isize - (len / 2) as isize;
            let segment: Vec<f64> = (0..len)
                .map(|n| {
                    let t = start + n as isize;
                    if t >= 0 && (t as usize) < x.len() {
                        x[t as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            if rms(&segment) < SILENCE_RMS {
                let mut c = vec![0.0; cfg.order + 1];
                c[0] = silence_log_gain();
                return Some(c);
            }
            let windowed: Vec<f64> = segment.iter().zip(&window).map(|(s, w)| s * w).collect();
            let mut power = fourier.power(&windowed);
            let mean = power.iter().sum::<f64>() / power.len() as f64;
            let floor = mean * 1e-10 + f64::MIN_POSITIVE;
            for p in &mut power {
                *p = (*p / window_power).max(floor / window_power);
            }
            let log_p: Vec<f64> = power.iter().map(|p| p.ln()).collect();
            let fitted = mcep::fit(&grid, &log_p);
            fitted.converged.then_some(fitted.coefficients)
        })
        .collect();

    let mut frames = Vec::with_capacity(count);
    let mut flagged = Vec::new();
    for (i, fit) in fits.into_iter().enumerate() {
        let c = match fit {
            Some(c) => c,
            None => {
                flagged.push(i);
                frames.last().cloned().unwrap_or_else(|| {
                    let mut c = vec![0.0; cfg.order + 1];
                    c[0] = silence_log_gain();
                    c
                })
            }
        };
        frames.push(c);
    }
    if cfg.is_generalized() {
        for c in &mut frames {
            *c = generalized::convert(c, 0.0, cfg.gamma);
        }
    }
    let mut track = EnvelopeTrack::new(frames, cfg.clone(), sr)?;
    track.flagged = flagged;
    Ok(track)
}

/// Linear interpolation of per-frame coefficients between frame centres.
struct Interpolator<'a> {
    coeffs: &'a [Vec<f64>],
    shift: usize,
    current: Vec<f64>,
}

impl<'a> Interpolator<'a> {
    fn new(coeffs: &'a [Vec<f64>], shift: usize) -> Self {
        let width = coeffs.first().map_or(0, Vec::len);
        Self {
            coeffs,
            shift,
            current: vec![0.0; width],
        }
    }

    fn at(&mut self, n: usize) -> &[f64] {
        let i = n / self.shift;
        let last = self.coeffs.len() - 1;
        if i >= last {
            self.current.copy_from_slice(&self.coeffs[last]);
        } else {
            let frac = (n - i * self.shift) as f64 / self.shift as f64;
            let (a, b) = (&self.coeffs[i], &self.coeffs[i + 1]);
            for ((o, x), y) in self.current.iter_mut().zip(a).zip(b) {
                *o = x + frac * (y - x);
            }
        }
        &self.current
    }
}

enum Filter {
    Mlsa(MlsaFilter),
    Mglsa(MglsaFilter),
}

impl Filter {
    fn for_config(cfg: &EnvelopeConfig) -> Self {
        if cfg.gamma == 0.0 {
            Filter::Mlsa(MlsaFilter::new(cfg.alpha, cfg.order))
        } else {
            let stages = (-1.0 / cfg.gamma).round() as usize;
            Filter::Mglsa(MglsaFilter::new(cfg.alpha, cfg.order, stages))
        }
    }

    fn synthesize(&mut self, x: f64, b: &[f64]) -> f64 {
        match self {
            Filter::Mlsa(f) => f.synthesize(x, b),
            Filter::Mglsa(f) => f.synthesize(x, b),
        }
    }

    fn inverse(&mut self, y: f64, b: &[f64]) -> f64 {
        match self {
            Filter::Mlsa(f) => f.inverse(y, b),
            Filter::Mglsa(f) => f.inverse(y, b),
        }
    }
}

fn run_filter(signal: &SpeechSignal, env: &EnvelopeTrack, inverse: bool) -> Result<SpeechSignal> {
    env.check_covers(signal.len(), signal.sample_rate())?;
    if signal.is_empty() {
        return Ok(signal.clone());
    }
    let b = env.filter_coefficients()?;
    let mut interp = Interpolator::new(&b, env.config.shift_samples(env.sample_rate));
    let mut filter = Filter::for_config(&env.config);
    let mut out = Vec::with_capacity(signal.len());
    for (n, &x) in signal.samples().iter().enumerate() {
        let coeffs = interp.at(n);
        let y = if inverse {
            filter.inverse(x, coeffs)
        } else {
            filter.synthesize(x, coeffs)
        };
        if !y.is_finite() {
            return Err(Error::UnstableFrame {
                frame: n / env.config.shift_samples(env.sample_rate),
            });
        }
        out.push(y);
    }
    SpeechSignal::new(out, signal.sample_rate())
}

/// Residual of `signal` under its envelope.
pub fn inverse_filter(signal: &SpeechSignal, env: &EnvelopeTrack) -> Result<SpeechSignal> {
    run_filter(signal, env, true)
}

/// Drives the envelope's synthesis filter with `excitation`.
pub fn synthesis_filter(excitation: &SpeechSignal, env: &EnvelopeTrack) -> Result<SpeechSignal> {
    run_filter(excitation, env, false)
}
