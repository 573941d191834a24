//! Autocorrelation pitch tracking and glottal closure instant detection.

use rayon::prelude::*;

use crate::signal::{rms, SpeechSignal};
use crate::{Error, Result};

/// Analysis window of the pitch tracker, seconds.
pub const PITCH_WINDOW: f64 = 0.040;
/// Hop of the pitch tracker, seconds.
pub const PITCH_HOP: f64 = 0.010;
/// Minimum normalised autocorrelation peak for a voiced decision.
pub const VOICING_THRESHOLD: f64 = 0.30;
/// Frames quieter than this fraction of the utterance RMS are unvoiced.
pub const ENERGY_GATE: f64 = 0.02;
const MEDIAN_LEN: usize = 5;
/// Among autocorrelation peaks, the shortest lag within this fraction of the best wins.
const OCTAVE_TOLERANCE: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    /// Seconds.
    pub time: f64,
    /// Hz, 0 when unvoiced.
    pub f0: f64,
    pub voiced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    frames: Vec<PitchFrame>,
    hop: f64,
    f0_min: f64,
    f0_max: f64,
}

impl PitchTrack {
    /// Validates the track; unvoiced frames are stored with `f0 = 0`.
    pub fn new(frames: Vec<PitchFrame>, hop: f64, f0_min: f64, f0_max: f64) -> Result<Self> {
        if !(f0_min > 0.0 && f0_min < f0_max) {
            return Err(Error::config(format!("bad f0 range [{f0_min}, {f0_max}]")));
        }
        let mut frames = frames;
        for (i, f) in frames.iter_mut().enumerate() {
            if f.voiced && !(f0_min..=f0_max).contains(&f.f0) {
                return Err(Error::config(format!(
                    "pitch frame {i}: f0 {} Hz outside [{f0_min}, {f0_max}]",
                    f.f0
                )));
            }
            if !f.voiced {
                f.f0 = 0.0;
            }
        }
        if frames.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::config("pitch frame times must be strictly increasing"));
        }
        Ok(Self {
            frames,
            hop,
            f0_min,
            f0_max,
        })
    }

    pub fn frames(&self) -> &[PitchFrame] {
        &self.frames
    }

    pub fn hop(&self) -> f64 {
        self.hop
    }

    pub fn f0_min(&self) -> f64 {
        self.f0_min
    }

    pub fn f0_max(&self) -> f64 {
        self.f0_max
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        self.frames.iter().filter(|f| f.voiced).count() as f64 / self.frames.len() as f64
    }

    fn nearest(&self, time: f64) -> Option<usize> {
        if self.frames.is_empty() {
            return None;
        }
        let i = self.frames.partition_point(|f| f.time < time);
        match i {
            0 => Some(0),
            n if n == self.frames.len() => Some(n - 1),
            n => {
                if time - self.frames[n - 1].time <= self.frames[n].time - time {
                    Some(n - 1)
                } else {
                    Some(n)
                }
            }
        }
    }

    pub fn is_voiced_at(&self, time: f64) -> bool {
        self.nearest(time).is_some_and(|i| self.frames[i].voiced)
    }

    /// F0 at `time`, linearly interpolated between neighbouring voiced frames.
    /// `None` when the nearest frame is unvoiced.
    pub fn f0_at(&self, time: f64) -> Option<f64> {
        let i = self.nearest(time)?;
        if !self.frames[i].voiced {
            return None;
        }
        let (a, b) = if self.frames[i].time <= time {
            (i, i + 1)
        } else {
            (i.saturating_sub(1), i)
        };
        if a == b || b >= self.frames.len() || !self.frames[a].voiced || !self.frames[b].voiced {
            return Some(self.frames[i].f0);
        }
        let (fa, fb) = (&self.frames[a], &self.frames[b]);
        let t = ((time - fa.time) / (fb.time - fa.time)).clamp(0.0, 1.0);
        Some(fa.f0 + t * (fb.f0 - fa.f0))
    }
}

pub fn estimate_pitch(signal: &SpeechSignal, f0_min: f64, f0_max: f64) -> Result<PitchTrack> {
    let sr = signal.sample_rate() as f64;
    if !(f0_min > 0.0 && f0_min < f0_max && f0_max < sr / 4.0) {
        return Err(Error::config(format!(
            "f0 range [{f0_min}, {f0_max}] must satisfy 0 < min < max < {}",
            sr / 4.0
        )));
    }
    let x = signal.samples();
    let win = (PITCH_WINDOW * sr).round() as usize;
    let hop = (PITCH_HOP * sr).round() as usize;
    let count = x.len().div_ceil(hop);
    let min_lag = ((sr / f0_max).floor() as usize).max(2);
    let max_lag = ((sr / f0_min).ceil() as usize).min(win - 2);
    let gate = ENERGY_GATE * rms(x);

    let raw: Vec<Option<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let start = (i * hop) as isize - (win / 2) as isize;
            let mut frame: Vec<f64> = (0..win)
                .map(|n| {
                    let t = start + n as isize;
                    if t >= 0 && (t as usize) < x.len() {
                        x[t as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            if gate == 0.0 || rms(&frame) <= gate {
                return None;
            }
            let mean = frame.iter().sum::<f64>() / win as f64;
            frame.iter_mut().for_each(|v| *v -= mean);
            frame_period(&frame, min_lag, max_lag).map(|lag| sr / lag)
        })
        .collect();

    let frames = smooth(&raw)
        .into_iter()
        .enumerate()
        .map(|(i, f0)| PitchFrame {
            time: (i * hop) as f64 / sr,
            f0: f0.map_or(0.0, |f| f.clamp(f0_min, f0_max)),
            voiced: f0.is_some(),
        })
        .collect();
    PitchTrack::new(frames, PITCH_HOP, f0_min, f0_max)
}

fn normalized_autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (x[i], x[i + lag]);
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return 0.0;
    }
    xy / (xx * yy).sqrt()
}

/// Period in (fractional) samples, or `None` when the frame is unvoiced.
fn frame_period(frame: &[f64], min_lag: usize, max_lag: usize) -> Option<f64> {
    let lo = min_lag - 1;
    let r: Vec<f64> = (lo..=max_lag + 1)
        .map(|lag| normalized_autocorrelation(frame, lag))
        .collect();
    let at = |lag: usize| r[lag - lo];
    let peaks: Vec<usize> = (min_lag..=max_lag)
        .filter(|&l| at(l) >= at(l - 1) && at(l) >= at(l + 1))
        .collect();
    let best = peaks.iter().map(|&l| at(l)).fold(f64::NEG_INFINITY, f64::max);
    if !(best > VOICING_THRESHOLD) {
        return None;
    }
    let lag = *peaks.iter().find(|&&l| at(l) >= OCTAVE_TOLERANCE * best)?;
    if at(lag) <= VOICING_THRESHOLD {
        return None;
    }
    // parabolic refinement
    let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(lag as f64 + delta)
}

/// Majority vote on voicing and median on F0 over a centred window of 5 frames.
fn smooth(raw: &[Option<f64>]) -> Vec<Option<f64>> {
    let half = MEDIAN_LEN / 2;
    (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(raw.len());
            let voiced: Vec<f64> = raw[lo..hi].iter().flatten().copied().collect();
            if 2 * voiced.len() <= hi - lo {
                return None;
            }
            Some(crate::metrics::median(&voiced))
        })
        .collect()
}

/// Glottal closure instants, as strictly increasing sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GciSequence {
    pub instants: Vec<usize>,
}

impl GciSequence {
    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }
}

/// Voiced sample ranges `[start, end)` implied by a pitch track.
pub fn voiced_segments(pitch: &PitchTrack, len: usize, sample_rate: u32) -> Vec<(usize, usize)> {
    let sr = sample_rate as f64;
    let half_hop = pitch.hop() * sr / 2.0;
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let last = pitch.frames().len().saturating_sub(1);
    for (i, f) in pitch.frames().iter().enumerate().filter(|(_, f)| f.voiced) {
        let c = f.time * sr;
        let start = (c - half_hop).round().max(0.0) as usize;
        // the final frame stands for the rest of the signal
        let end = if i == last { len } else { ((c + half_hop).round() as usize).min(len) };
        if start >= end {
            continue;
        }
        match segments.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => segments.push((start, end)),
        }
    }
    segments
}

/// +1 when the residual's positive peaks dominate, -1 otherwise.
pub fn residual_polarity(x: &[f64], segments: &[(usize, usize)], period: impl Fn(usize) -> usize) -> f64 {
    let (mut pos, mut neg, mut n) = (0.0, 0.0, 0usize);
    for &(a, b) in segments {
        let mut t = a;
        while t < b {
            let end = (t + period(t).max(1)).min(b);
            let chunk = &x[t..end];
            pos += chunk.iter().copied().fold(0.0, f64::max);
            neg += -chunk.iter().copied().fold(0.0, f64::min);
            n += 1;
            t = end;
        }
    }
    if n == 0 || pos >= neg {
        1.0
    } else {
        -1.0
    }
}

fn argmax(x: &[f64], range: std::ops::Range<usize>, polarity: f64) -> usize {
    let mut best = range.start;
    for i in range {
        if polarity * x[i] > polarity * x[best] {
            best = i;
        }
    }
    best
}

pub fn detect_gci(residual: &SpeechSignal, pitch: &PitchTrack) -> GciSequence {
    let sr = residual.sample_rate() as f64;
    let x = residual.samples();
    let segments = voiced_segments(pitch, x.len(), residual.sample_rate());
    let period = |n: usize| -> usize {
        let f0 = pitch
            .f0_at(n as f64 / sr)
            .or_else(|| {
                // segment edges may round onto an unvoiced neighbour
                let t = n as f64 / sr;
                pitch.f0_at(t - pitch.hop() / 2.0).or_else(|| pitch.f0_at(t + pitch.hop() / 2.0))
            })
            .unwrap_or(pitch.f0_min());
        (sr / f0).round().max(2.0) as usize
    };
    let polarity = residual_polarity(x, &segments, period);

    let mut instants = Vec::new();
    for &(a, b) in &segments {
        let p0 = period(a);
        let mut g = argmax(x, a..(a + p0).min(b), polarity);
        instants.push(g);
        loop {
            let p = period(g);
            if g + p >= b {
                break;
            }
            let lo = g + p.div_ceil(2);
            let hi = (g + p + p / 2).min(b);
            g = argmax(x, lo.max(g + 1)..hi, polarity);
            instants.push(g);
        }
    }
    GciSequence { instants }
}

#[cfg(test)]
mod tests;
