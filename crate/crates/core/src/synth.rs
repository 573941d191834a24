//! Excitation synthesis from per-frame parameters and the full vocoder.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;

use crate::dataset::NormalizationConfig;
use crate::eigen::EigenBasis;
use crate::envelope::{synthesis_filter, EnvelopeConfig, EnvelopeTrack};
use crate::model::DsmModel;
use crate::noise::{build_envelope, generate_noise_frame, NoiseModel};
use crate::resample::Resampler;
use crate::rng::{frame_seed, GaussianSource};
use crate::signal::{l2_norm, SpeechSignal};
use crate::spectrum::{next_pow2, Fourier};
use crate::window::centered_blackman;
use crate::{Error, Result};

/// Standard deviation of the unvoiced excitation.
pub const UNVOICED_SIGMA: f64 = 1.0;
/// Raised-cosine fade applied to unvoiced noise next to voiced runs, seconds.
pub const BOUNDARY_FADE: f64 = 0.002;
/// Minimum width of a spectral dip that counts as an energy hole, Hz.
pub const HOLE_WIDTH_HZ: f64 = 500.0;
/// Depth below the low-band mean that counts as an energy hole, dB.
pub const HOLE_DEPTH_DB: f64 = 30.0;
const UNVOICED_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub struct DsmFrame {
    pub time: f64,
    pub voiced: bool,
    /// Hz; 0 when unvoiced.
    pub f0: f64,
    pub weights: Vec<f64>,
    pub envelope: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsmParams {
    /// Weights per frame; 0 selects the first-eigenvector mode.
    pub k: usize,
    pub order: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub frames: Vec<DsmFrame>,
}

impl DsmParams {
    pub fn validate(&self, f0_min: f64, f0_max: f64) -> Result<()> {
        for (i, f) in self.frames.iter().enumerate() {
            if f.weights.len() != self.k {
                return Err(Error::config(format!(
                    "frame {i} has {} weights, expected {}",
                    f.weights.len(),
                    self.k
                )));
            }
            if f.envelope.len() != self.order + 1 {
                return Err(Error::config(format!(
                    "frame {i} has {} envelope coefficients, expected {}",
                    f.envelope.len(),
                    self.order + 1
                )));
            }
            if f.voiced && !(f0_min..=f0_max).contains(&f.f0) {
                return Err(Error::config(format!(
                    "frame {i}: f0 {} Hz outside [{f0_min}, {f0_max}]",
                    f.f0
                )));
            }
        }
        if self.frames.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::config("frame times must be strictly increasing"));
        }
        Ok(())
    }

    /// Envelope configuration of these parameters on top of `base`'s timing.
    pub fn envelope_config(&self, base: &EnvelopeConfig) -> EnvelopeConfig {
        EnvelopeConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            order: self.order,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GciTarget {
    pub position: usize,
    pub f0: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisPlan {
    pub targets: Vec<GciTarget>,
    /// Output length in samples.
    pub length: usize,
    /// Voiced sample ranges `[start, end)`.
    pub voiced_runs: Vec<(usize, usize)>,
}

/// Parameter frame that owns sample `n`.
fn frame_of(n: usize, shift: usize, count: usize) -> usize {
    ((n + shift / 2) / shift).min(count - 1)
}

/// GCI targets by cumulative period integration of the linearly interpolated
/// F0, restarting at the first sample of every voiced run.
pub fn plan_gci_grid(params: &DsmParams, sample_rate: u32, shift: usize) -> SynthesisPlan {
    let count = params.frames.len();
    let length = count * shift;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, _) in params.frames.iter().enumerate().filter(|(_, f)| f.voiced) {
        let start = if i == 0 { 0 } else { i * shift - shift / 2 };
        let end = if i + 1 == count { length } else { i * shift + shift - shift / 2 };
        match runs.last_mut() {
            Some(last) if last.1 == start => last.1 = end,
            _ => runs.push((start, end)),
        }
    }
    let sr = sample_rate as f64;
    let f0_at = |pos: f64| -> f64 {
        let x = (pos / shift as f64).clamp(0.0, (count - 1) as f64);
        let i = x.floor() as usize;
        let (a, b) = (&params.frames[i], &params.frames[(i + 1).min(count - 1)]);
        let owner = &params.frames[frame_of(pos as usize, shift, count)];
        match (a.voiced, b.voiced) {
            (true, true) => a.f0 + (x - i as f64) * (b.f0 - a.f0),
            (true, false) => a.f0,
            (false, true) => b.f0,
            (false, false) => owner.f0,
        }
    };
    let mut targets = Vec::new();
    for &(start, end) in &runs {
        let mut pos = start as f64;
        while (pos.round() as usize) < end {
            let g = pos.round() as usize;
            let f0 = f0_at(pos);
            let owner = &params.frames[frame_of(g, shift, count)];
            targets.push(GciTarget {
                position: g,
                f0,
                weights: owner.weights.clone(),
            });
            pos += sr / f0;
        }
    }
    SynthesisPlan {
        targets,
        length,
        voiced_runs: runs,
    }
}

/// Resamplers shared across frames, keyed by output length.
#[derive(Debug, Default)]
pub struct ResamplerCache {
    map: RwLock<HashMap<(usize, usize), Arc<Resampler>>>,
}

impl ResamplerCache {
    /// Process-wide cache. Entries are bounded by the distinct frame lengths a
    /// pitch range can produce.
    pub fn shared() -> &'static ResamplerCache {
        static SHARED: OnceLock<ResamplerCache> = OnceLock::new();
        SHARED.get_or_init(ResamplerCache::default)
    }

    pub fn get(&self, in_len: usize, out_len: usize) -> Arc<Resampler> {
        if let Some(r) = self.map.read().expect("resampler cache poisoned").get(&(in_len, out_len)) {
            return r.clone();
        }
        let r = Arc::new(Resampler::new(in_len, out_len));
        self.map
            .write()
            .expect("resampler cache poisoned")
            .entry((in_len, out_len))
            .or_insert(r)
            .clone()
    }
}

/// Synthesis-time overrides of the trained stochastic model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SynthesisOptions {
    /// Replaces the trained band gain ratio; 0 removes the noise.
    pub noise_gain: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoicedFrame {
    /// Length twice the target period, centred on the GCI.
    pub samples: Vec<f64>,
    /// Upper edge of the deterministic band, Hz.
    pub band_edge: f64,
    /// Set when the target pitch lies below F0_min, so the band edge falls under F_m.
    pub energy_hole_risk: bool,
}

/// Target period in samples for pitch `f0`.
pub fn target_period(sample_rate: u32, f0: f64) -> usize {
    ((sample_rate as f64 / f0).round() as usize).max(8)
}

/// Deterministic waveform for `weights`; with no weights the first eigenvector
/// carries the basis' implicit training weight.
pub fn deterministic_frame(basis: &EigenBasis, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() && basis.component_count() > 0 {
        return basis.reconstruct(&[basis.implicit_first_weight]);
    }
    basis.reconstruct(weights)
}

fn blackman(len: usize) -> Rc<[f64]> {
    thread_local! {
        static WINDOWS: RefCell<HashMap<usize, Rc<[f64]>>> = RefCell::new(HashMap::new());
    }
    WINDOWS.with(|w| w.borrow_mut().entry(len).or_insert_with(|| centered_blackman(len).into()).clone())
}

/// Deterministic plus stochastic excitation of one GCI, before energy scaling.
pub fn synth_voiced_frame(
    target: &GciTarget,
    basis: &EigenBasis,
    noise: &NoiseModel,
    cfg: &NormalizationConfig,
    options: &SynthesisOptions,
    seed: u64,
    cache: &ResamplerCache,
) -> Result<VoicedFrame> {
    let period = target_period(cfg.sample_rate, target.f0);
    let len = 2 * period;
    let normalized = deterministic_frame(basis, &target.weights)?;
    let det = if normalized.len() == len {
        normalized
    } else {
        cache.get(normalized.len(), len).process(&normalized)
    };

    let ratio = options.noise_gain.unwrap_or(noise.band_gain_ratio());
    let mut samples = det;
    if ratio > 0.0 {
        let beta = options.beta.unwrap_or(noise.beta());
        let shape = build_envelope(period, beta)?.values();
        let window = blackman(len);
        let taper: Vec<f64> = shape.iter().zip(window.iter()).map(|(e, w)| e * w).collect();
        let taper_rms = l2_norm(&taper) / (len as f64).sqrt();
        let det_norm = l2_norm(&samples);
        let reference = if det_norm > 0.0 { det_norm } else { 1.0 };
        // generate_noise_frame gives per-sample RMS `ratio` before the taper
        let gain = options.noise_gain.map_or(1.0, |g| g / noise.band_gain_ratio());
        let scale = gain * reference / ((len as f64).sqrt() * taper_rms);
        let stochastic = generate_noise_frame(noise, &shape, seed);
        for ((s, n), w) in samples.iter_mut().zip(&stochastic).zip(window.iter()) {
            *s += scale * n * w;
        }
    }
    Ok(VoicedFrame {
        samples,
        band_edge: cfg.band_edge(target.f0),
        energy_hole_risk: target.f0 < cfg.f0_min,
    })
}

/// White Gaussian excitation with standard deviation `sigma`.
pub fn synth_unvoiced(length: usize, seed: u64, sigma: f64) -> Vec<f64> {
    GaussianSource::new(seed).take(length).into_iter().map(|v| sigma * v).collect()
}

/// Adds every frame centred on its GCI target over `[g - P, g + P)`.
pub fn overlap_add(plan: &SynthesisPlan, frames: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; plan.length];
    for (t, f) in plan.targets.iter().zip(frames) {
        let half = f.len() / 2;
        for (i, v) in f.iter().enumerate() {
            let n = t.position as isize - half as isize + i as isize;
            if n >= 0 && (n as usize) < out.len() {
                out[n as usize] += v;
            }
        }
    }
    out
}

/// First contiguous band under `f_m` wider than `HOLE_WIDTH_HZ` lying more than
/// `HOLE_DEPTH_DB` below the frame's mean level in `[0, f_m)`.
pub fn find_energy_hole(frame: &[f64], sample_rate: u32, f_m: f64) -> Option<(f64, f64)> {
    let size = next_pow2(frame.len().max(1024));
    let power = Fourier::cached(size).power(frame);
    let bin_hz = sample_rate as f64 / size as f64;
    let low_bins = ((f_m / bin_hz).floor() as usize).min(power.len());
    if low_bins == 0 {
        return None;
    }
    let mean = power[..low_bins].iter().sum::<f64>() / low_bins as f64;
    if mean == 0.0 {
        return None;
    }
    let threshold = mean * 10f64.powf(-HOLE_DEPTH_DB / 10.0);
    let mut start: Option<usize> = None;
    for k in 0..=low_bins {
        let deep = k < low_bins && power[k] < threshold;
        match (deep, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if (k - s) as f64 * bin_hz > HOLE_WIDTH_HZ {
                    return Some((s as f64 * bin_hz, k as f64 * bin_hz));
                }
                start = None;
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VocodeReport {
    pub voiced_frames: usize,
    /// Voiced frames whose target pitch is below F0_min.
    pub below_f0_min: usize,
    /// Voiced frames that fail the energy-hole check.
    pub energy_holes: usize,
}

#[derive(Debug, Clone)]
pub struct Vocoded {
    pub speech: SpeechSignal,
    pub excitation: SpeechSignal,
    pub plan: SynthesisPlan,
    pub report: VocodeReport,
}

/// Excitation only: OLA of voiced frames plus faded unvoiced noise.
pub fn excitation(params: &DsmParams, model: &DsmModel, options: &SynthesisOptions) -> Result<(Vec<f64>, SynthesisPlan, VocodeReport)> {
    let sr = model.sample_rate;
    let norm = &model.normalization;
    params.validate(norm.f0_min, norm.f0_max)?;
    if params.k > model.basis.component_count() {
        return Err(Error::DimensionMismatch {
            expected: model.basis.component_count(),
            found: params.k,
        });
    }
    let shift = model.envelope.shift_samples(sr);
    if params.frames.is_empty() {
        return Ok((
            Vec::new(),
            SynthesisPlan {
                targets: Vec::new(),
                length: 0,
                voiced_runs: Vec::new(),
            },
            VocodeReport::default(),
        ));
    }
    let plan = plan_gci_grid(params, sr, shift);
    let cache = ResamplerCache::shared();
    let frames: Vec<VoicedFrame> = plan
        .targets
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            synth_voiced_frame(
                t,
                &model.basis,
                &model.noise,
                norm,
                options,
                frame_seed(params.seed, j as u64),
                cache,
            )
        })
        .collect::<Result<_>>()?;

    let mut report = VocodeReport {
        voiced_frames: frames.len(),
        ..Default::default()
    };
    let scaled: Vec<Vec<f64>> = frames
        .iter()
        .zip(&plan.targets)
        .map(|(f, t)| {
            if f.energy_hole_risk {
                report.below_f0_min += 1;
            }
            if find_energy_hole(&f.samples, sr, norm.max_voiced).is_some() {
                report.energy_holes += 1;
            }
            energy_scaled(&f.samples, target_period(sr, t.f0))
        })
        .collect();
    let mut out = overlap_add(&plan, &scaled);

    let fade = (BOUNDARY_FADE * sr as f64).round() as usize;
    let distance = voiced_distance(plan.length, &plan.voiced_runs, fade + 1);
    for (i, _) in params.frames.iter().enumerate().filter(|(_, f)| !f.voiced) {
        let a = if i == 0 { 0 } else { i * shift - shift / 2 };
        let b = if i + 1 == params.frames.len() { plan.length } else { i * shift + shift - shift / 2 };
        let noise = synth_unvoiced(b - a, frame_seed(params.seed, UNVOICED_STREAM | i as u64), UNVOICED_SIGMA);
        for (n, v) in (a..b).zip(noise) {
            out[n] += v * boundary_gain(distance[n], fade);
        }
    }
    Ok((out, plan, report))
}

/// Unit per-sample power for a frame spanning two periods at 50% overlap.
fn energy_scaled(frame: &[f64], period: usize) -> Vec<f64> {
    let norm = l2_norm(frame);
    if norm == 0.0 {
        return frame.to_vec();
    }
    let s = (period as f64).sqrt() / norm;
    frame.iter().map(|v| v * s).collect()
}

/// Distance from each sample to the nearest voiced sample, saturating at `cap`.
fn voiced_distance(len: usize, runs: &[(usize, usize)], cap: usize) -> Vec<usize> {
    let mut d = vec![cap; len];
    for &(a, b) in runs {
        d[a..b].fill(0);
    }
    for n in 1..len {
        d[n] = d[n].min(d[n - 1].saturating_add(1));
    }
    for n in (0..len.saturating_sub(1)).rev() {
        d[n] = d[n].min(d[n + 1].saturating_add(1));
    }
    d
}

/// Raised-cosine ramp on unvoiced samples within `fade` of a voiced run;
/// `distance` is at least 1 for unvoiced samples.
fn boundary_gain(distance: usize, fade: usize) -> f64 {
    if fade == 0 {
        return 1.0;
    }
    let x = (distance - 1).min(fade) as f64 / fade as f64;
    0.5 - 0.5 * (std::f64::consts::PI * x).cos()
}

pub fn vocode(params: &DsmParams, model: &DsmModel, options: &SynthesisOptions) -> Result<Vocoded> {
    let (exc, plan, report) = excitation(params, model, options)?;
    let sr = model.sample_rate;
    let excitation = SpeechSignal::new(exc, sr)?;
    let cfg = params.envelope_config(&model.envelope);
    let env = EnvelopeTrack::new(params.frames.iter().map(|f| f.envelope.clone()).collect(), cfg, sr)?;
    let speech = synthesis_filter(&excitation, &env)?;
    Ok(Vocoded {
        speech,
        excitation,
        plan,
        report,
    })
}

#[cfg(test)]
mod tests;
