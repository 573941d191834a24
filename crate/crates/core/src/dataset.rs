//! Pitch-synchronous residual frames and their pitch/energy normalisation.

use std::io::{Read, Write};

use crate::pitch::{GciSequence, PitchTrack};
use crate::resample::Resampler;
use crate::signal::{l2_norm, SpeechSignal};
use crate::window::centered_blackman;
use crate::{Error, Result};

/// Default maximum voiced frequency, Hz.
pub const DEFAULT_MAX_VOICED_HZ: f64 = 4000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationConfig {
    pub sample_rate: u32,
    /// Nyquist frequency, Hz.
    pub nyquist: f64,
    /// Maximum voiced frequency, Hz.
    pub max_voiced: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    /// Normalisation pitch, Hz.
    pub f0_star: f64,
    /// Samples in a normalised frame: `round(2 * sample_rate / f0_star)`.
    pub normalized_length: usize,
}

impl NormalizationConfig {
    /// Largest normalisation pitch that keeps the deterministic band up to
    /// the maximum voiced frequency for every pitch above `f0_min`.
    pub fn f0_star_bound(&self) -> f64 {
        self.nyquist / self.max_voiced * self.f0_min
    }

    /// Replaces the normalisation pitch with a smaller admissible one.
    pub fn with_f0_star(mut self, f0_star: f64) -> Result<Self> {
        if !(f0_star > 0.0) || f0_star > self.f0_star_bound() * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "f0* = {f0_star} Hz exceeds the bound {} Hz",
                self.f0_star_bound()
            )));
        }
        self.f0_star = f0_star;
        self.normalized_length = normalized_length(self.sample_rate, f0_star);
        Ok(self)
    }

    pub fn with_f0_max(mut self, f0_max: f64) -> Result<Self> {
        if !(f0_max > self.f0_min) {
            return Err(Error::config("f0_max must exceed f0_min"));
        }
        self.f0_max = f0_max;
        Ok(self)
    }

    /// Length ratio `2 P(f0) / normalized_length` of denormalisation to pitch `f0`.
    pub fn resampling_ratio(&self, f0: f64) -> f64 {
        self.f0_star / f0
    }

    /// Upper edge of the deterministic band once a normalised frame is
    /// stretched to pitch `f0`.
    pub fn band_edge(&self, f0: f64) -> f64 {
        (self.nyquist / self.resampling_ratio(f0)).min(self.nyquist)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_voiced > self.nyquist || self.max_voiced <= 0.0 {
            return Err(Error::config("maximum voiced frequency must lie in (0, Nyquist]"));
        }
        if self.f0_star > self.f0_star_bound() * (1.0 + 1e-12) {
            return Err(Error::config("f0* violates the energy-hole bound"));
        }
        if self.normalized_length != normalized_length(self.sample_rate, self.f0_star) {
            return Err(Error::config("normalized length inconsistent with f0*"));
        }
        Ok(())
    }
}

fn normalized_length(sample_rate: u32, f0_star: f64) -> usize {
    (2.0 * sample_rate as f64 / f0_star).round() as usize
}

/// Normalisation settings with `f0* = (F_N / F_m) * f0_min`.
pub fn compute_normalization(sample_rate: u32, max_voiced: f64, f0_min: f64) -> Result<NormalizationConfig> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(f0_min > 0.0) {
        return Err(Error::config("f0_min must be positive"));
    }
    if !(max_voiced > 0.0) || max_voiced > nyquist {
        return Err(Error::config(format!(
            "maximum voiced frequency {max_voiced} Hz exceeds Nyquist {nyquist} Hz"
        )));
    }
    let f0_star = nyquist / max_voiced * f0_min;
    Ok(NormalizationConfig {
        sample_rate,
        nyquist,
        max_voiced,
        f0_min,
        f0_max: f64::INFINITY,
        f0_star,
        normalized_length: normalized_length(sample_rate, f0_star),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFrame {
    pub samples: Vec<f64>,
    /// Sample index of the GCI in the source residual.
    pub center_gci: usize,
    /// Local pitch at the GCI, Hz.
    pub source_f0: f64,
    pub normalized: bool,
}

/// Frames plus the number of GCIs skipped at the signal boundaries.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub frames: Vec<ResidualFrame>,
    pub skipped_boundary: usize,
}

/// Even two-period frame length for pitch `f0`: `2 * round(sr / f0)`.
pub fn frame_length(sample_rate: u32, f0: f64) -> usize {
    2 * ((sample_rate as f64 / f0).round() as usize).max(1)
}

/// GCI-centred, two-period, Blackman-windowed excerpts of the residual.
pub fn extract_frames(residual: &SpeechSignal, gci: &GciSequence, pitch: &PitchTrack) -> Extraction {
    let sr = residual.sample_rate();
    let x = residual.samples();
    let mut out = Extraction::default();
    for &g in &gci.instants {
        let t = g as f64 / sr as f64;
        let f0 = pitch
            .f0_at(t)
            .or_else(|| pitch.f0_at(t - pitch.hop() / 2.0))
            .or_else(|| pitch.f0_at(t + pitch.hop() / 2.0))
            .unwrap_or(pitch.f0_min());
        let len = frame_length(sr, f0);
        let half = len / 2;
        if g < half || g + half > x.len() {
            out.skipped_boundary += 1;
            continue;
        }
        let w = centered_blackman(len);
        let samples = x[g - half..g + half].iter().zip(&w).map(|(a, b)| a * b).collect();
        out.frames.push(ResidualFrame {
            samples,
            center_gci: g,
            source_f0: f0,
            normalized: false,
        });
    }
    out
}

/// Resamples a raw frame to the normalised length and scales it to unit L2 norm.
pub fn normalize_frame(frame: &ResidualFrame, cfg: &NormalizationConfig) -> Result<ResidualFrame> {
    normalize_with(frame, &Resampler::new(frame.samples.len(), cfg.normalized_length))
}

pub(crate) fn normalize_with(frame: &ResidualFrame, resampler: &Resampler) -> Result<ResidualFrame> {
    let mut samples = resampler.process(&frame.samples);
    let norm = l2_norm(&samples);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroEnergyFrame);
    }
    samples.iter_mut().for_each(|v| *v /= norm);
    Ok(ResidualFrame {
        samples,
        center_gci: frame.center_gci,
        source_f0: frame.source_f0,
        normalized: true,
    })
}

/// Normalised frames plus the count of zero-energy rejections.
#[derive(Debug, Clone, Default)]
pub struct Normalized {
    pub frames: Vec<ResidualFrame>,
    pub rejected: usize,
}

pub fn normalize_all(frames: &[ResidualFrame], cfg: &NormalizationConfig) -> Normalized {
    let mut cache: std::collections::HashMap<usize, Resampler> = Default::default();
    let mut out = Normalized::default();
    for f in frames {
        let r = cache
            .entry(f.samples.len())
            .or_insert_with(|| Resampler::new(f.samples.len(), cfg.normalized_length));
        match normalize_with(f, r) {
            Ok(n) => out.frames.push(n),
            Err(_) => out.rejected += 1,
        }
    }
    out
}

/// Writes normalised frames as a row-major little-endian f64 matrix with a
/// `(rows: u64, cols: u64)` header.
pub fn write_dataset(frames: &[ResidualFrame], cols: usize, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(&(frames.len() as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for f in frames {
        if f.samples.len() != cols {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("frame of length {} in a {cols}-column dataset", f.samples.len()),
            ));
        }
        for v in &f.samples {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset(mut r: impl Read) -> std::io::Result<Vec<Vec<f64>>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            r.read_exact(&mut word)?;
            row.push(f64::from_le_bytes(word));
        }
        out.push(row);
    }
    Ok(out)
}
