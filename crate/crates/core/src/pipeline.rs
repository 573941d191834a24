//! End-to-end training and copy synthesis.

use rayon::prelude::*;

use crate::dataset::{compute_normalization, extract_frames, normalize_all, ResidualFrame, DEFAULT_MAX_VOICED_HZ};
use crate::eigen::{dispersion, fit_pca, select_components, PcaOptions, MAX_STORED_COMPONENTS};
use crate::envelope::{analyze_envelope, inverse_filter, EnvelopeConfig, EnvelopeTrack};
use crate::metrics::{f0_deviations, median, mel_log_spectral_distortion};
use crate::model::DsmModel;
use crate::noise::{estimate_ar_filter, measure_band_ratio, NoiseModel, DEFAULT_AR_ORDER, DEFAULT_BETA};
use crate::pitch::{detect_gci, estimate_pitch, GciSequence, PitchTrack};
use crate::signal::SpeechSignal;
use crate::synth::{vocode, DsmFrame, DsmParams, SynthesisOptions, Vocoded};
use crate::{Error, Result};

/// Envelope, residual, pitch and GCIs of one utterance.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub envelope: EnvelopeTrack,
    pub residual: SpeechSignal,
    pub pitch: PitchTrack,
    pub gci: GciSequence,
}

/// Runs envelope analysis, inverse filtering, pitch tracking (unless `pitch`
/// is supplied) and GCI detection.
pub fn analyze(
    signal: &SpeechSignal,
    envelope: &EnvelopeConfig,
    f0_min: f64,
    f0_max: f64,
    pitch: Option<PitchTrack>,
) -> Result<Analysis> {
    signal.require_pipeline_rate()?;
    let env = analyze_envelope(signal, envelope)?;
    let residual = inverse_filter(signal, &env)?;
    let pitch = match pitch {
        Some(p) => p,
        None => estimate_pitch(signal, f0_min, f0_max)?,
    };
    let gci = detect_gci(&residual, &pitch);
    Ok(Analysis {
        envelope: env,
        residual,
        pitch,
        gci,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub max_voiced: f64,
    /// Dispersion coverage used to report `k`.
    pub coverage: f64,
    /// Normalisation pitch below the energy-hole bound; `None` uses the bound.
    pub f0_star: Option<f64>,
    pub envelope: EnvelopeConfig,
    pub ar_order: usize,
    pub beta: f64,
    pub center: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            f0_min: 60.0,
            f0_max: 240.0,
            max_voiced: DEFAULT_MAX_VOICED_HZ,
            coverage: 0.8,
            f0_star: None,
            envelope: EnvelopeConfig::default(),
            ar_order: DEFAULT_AR_ORDER,
            beta: DEFAULT_BETA,
            center: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub utterances: usize,
    pub corpus_seconds: f64,
    pub frames: usize,
    pub rejected_frames: usize,
    pub boundary_skipped: usize,
    pub unconverged_envelope_frames: usize,
    pub dispersion: Vec<f64>,
    pub k_at_coverage: usize,
    pub first_eigenvector_share: f64,
    pub ar_order: usize,
    pub stopband_attenuation_db: f64,
    pub band_gain_ratio: f64,
}

/// One training utterance with an optional external pitch track.
pub struct Utterance {
    pub signal: SpeechSignal,
    pub pitch: Option<PitchTrack>,
}

pub fn train(corpus: &[Utterance], cfg: &TrainConfig) -> Result<(DsmModel, TrainReport)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("no utterances".into()));
    }
    let norm = compute_normalization(crate::signal::SAMPLE_RATE, cfg.max_voiced, cfg.f0_min)?.with_f0_max(cfg.f0_max)?;
    let norm = match cfg.f0_star {
        Some(f) => norm.with_f0_star(f)?,
        None => norm,
    };

    let per_utterance: Vec<(Vec<ResidualFrame>, usize, usize)> = corpus
        .par_iter()
        .map(|u| {
            let a = analyze(&u.signal, &cfg.envelope, cfg.f0_min, cfg.f0_max, u.pitch.clone())?;
            let ex = extract_frames(&a.residual, &a.gci, &a.pitch);
            Ok((ex.frames, ex.skipped_boundary, a.envelope.flagged().len()))
        })
        .collect::<Result<_>>()?;

    let mut raw = Vec::new();
    let (mut skipped, mut flagged) = (0, 0);
    for (frames, s, f) in per_utterance {
        raw.extend(frames);
        skipped += s;
        flagged += f;
    }
    if raw.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    let normalized = normalize_all(&raw, &norm);
    if normalized.frames.len() < 2 {
        return Err(Error::NoVoicedFrames);
    }
    let data: Vec<Vec<f64>> = normalized.frames.into_iter().map(|f| f.samples).collect();
    let basis = fit_pca(
        &data,
        &PcaOptions {
            center: cfg.center,
            max_components: MAX_STORED_COMPONENTS,
        },
    )?;
    let curve = dispersion(&basis);
    let k_at_coverage = select_components(&curve, cfg.coverage)?;

    let sr = crate::signal::SAMPLE_RATE;
    let slices: Vec<&[f64]> = raw.iter().map(|f| f.samples.as_slice()).collect();
    let (ar, gain) = estimate_ar_filter(&slices, sr, cfg.ar_order, Some(cfg.max_voiced))?;
    let ratio = measure_band_ratio(&slices, sr, cfg.max_voiced).ok_or(Error::NoVoicedFrames)?;
    let noise = NoiseModel::new(ar, gain, cfg.beta, ratio)?;

    let report = TrainReport {
        utterances: corpus.len(),
        corpus_seconds: corpus.iter().map(|u| u.signal.duration()).sum(),
        frames: data.len(),
        rejected_frames: normalized.rejected,
        boundary_skipped: skipped,
        unconverged_envelope_frames: flagged,
        dispersion: curve.cumulative_fraction,
        k_at_coverage,
        first_eigenvector_share: basis.first_share(),
        ar_order: noise.order(),
        stopband_attenuation_db: noise.stopband_attenuation(sr, cfg.max_voiced),
        band_gain_ratio: ratio,
    };
    let model = DsmModel {
        sample_rate: sr,
        normalization: norm,
        basis,
        noise,
        envelope: cfg.envelope.clone(),
    };
    Ok((model, report))
}

#[derive(Debug, Clone, Default)]
pub struct CopyOptions {
    /// Weights per frame; 0 selects the first-eigenvector mode.
    pub k: usize,
    pub seed: u64,
    pub synthesis: SynthesisOptions,
    pub pitch: Option<PitchTrack>,
}

#[derive(Debug, Clone)]
pub struct CopySynthesis {
    pub vocoded: Vocoded,
    pub params: DsmParams,
    pub analysis: Analysis,
}

/// Parameters of `signal` under `model`, one frame per envelope frame.
pub fn extract_params(signal: &SpeechSignal, model: &DsmModel, options: &CopyOptions) -> Result<(DsmParams, Analysis)> {
    let norm = &model.normalization;
    let f0_max = if norm.f0_max.is_finite() { norm.f0_max } else { signal.sample_rate() as f64 / 4.0 - 1.0 };
    let analysis = analyze(signal, &model.envelope, norm.f0_min, f0_max, options.pitch.clone())?;
    if options.k > model.basis.component_count() {
        return Err(Error::DimensionMismatch {
            expected: model.basis.component_count(),
            found: options.k,
        });
    }
    let ex = extract_frames(&analysis.residual, &analysis.gci, &analysis.pitch);
    let normalized = normalize_all(&ex.frames, norm);
    let weighted: Vec<(usize, Vec<f64>)> = normalized
        .frames
        .iter()
        .map(|f| Ok((f.center_gci, model.basis.project(&f.samples, options.k)?)))
        .collect::<Result<_>>()?;

    let sr = signal.sample_rate() as f64;
    let shift = model.envelope.shift_samples(signal.sample_rate());
    let frames = analysis
        .envelope
        .frames()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let t = (i * shift) as f64 / sr;
            let f0 = analysis.pitch.f0_at(t).map(|f| f.clamp(norm.f0_min, f0_max));
            let weights = match f0 {
                Some(_) => nearest_weights(&weighted, i * shift).unwrap_or_else(|| vec![0.0; options.k]),
                None => vec![0.0; options.k],
            };
            DsmFrame {
                time: t,
                voiced: f0.is_some(),
                f0: f0.unwrap_or(0.0),
                weights,
                envelope: c.clone(),
            }
        })
        .collect();
    let params = DsmParams {
        k: options.k,
        order: model.envelope.order,
        alpha: model.envelope.alpha,
        gamma: model.envelope.gamma,
        seed: options.seed,
        frames,
    };
    Ok((params, analysis))
}

fn nearest_weights(weighted: &[(usize, Vec<f64>)], n: usize) -> Option<Vec<f64>> {
    let i = weighted.partition_point(|(g, _)| *g < n);
    let candidates = [i.checked_sub(1), (i < weighted.len()).then_some(i)];
    candidates
        .into_iter()
        .flatten()
        .min_by_key(|&j| weighted[j].0.abs_diff(n))
        .map(|j| weighted[j].1.clone())
}

/// Analysis followed by resynthesis through the DSM vocoder, trimmed to the
/// input length.
pub fn copy_synthesis(signal: &SpeechSignal, model: &DsmModel, options: &CopyOptions) -> Result<CopySynthesis> {
    let (params, analysis) = extract_params(signal, model, options)?;
    let mut vocoded = vocode(&params, model, &options.synthesis)?;
    let n = signal.len();
    vocoded.speech = truncated(&vocoded.speech, n)?;
    vocoded.excitation = truncated(&vocoded.excitation, n)?;
    Ok(CopySynthesis {
        vocoded,
        params,
        analysis,
    })
}

fn truncated(s: &SpeechSignal, n: usize) -> Result<SpeechSignal> {
    SpeechSignal::new(s.samples()[..n.min(s.len())].to_vec(), s.sample_rate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyMetrics {
    /// Median relative F0 deviation on frames voiced in both signals.
    pub f0_deviation: f64,
    /// Median mel-band log-spectral distortion below F_m on voiced frames, dB.
    pub mel_distortion_db: f64,
    pub voiced_frames_compared: usize,
}

pub fn evaluate_copy(input: &SpeechSignal, output: &SpeechSignal, model: &DsmModel, input_pitch: &PitchTrack) -> Result<CopyMetrics> {
    let out_pitch = estimate_pitch(output, input_pitch.f0_min(), input_pitch.f0_max())?;
    let dev = f0_deviations(input_pitch, &out_pitch);
    let sr = input.sample_rate();
    let centers: Vec<usize> = input_pitch
        .frames()
        .iter()
        .filter(|f| f.voiced)
        .map(|f| (f.time * sr as f64).round() as usize)
        .filter(|&c| c < input.len())
        .collect();
    let lsd = mel_log_spectral_distortion(input.samples(), output.samples(), sr, &centers, model.normalization.max_voiced);
    Ok(CopyMetrics {
        f0_deviation: median(&dev),
        mel_distortion_db: median(&lsd),
        voiced_frames_compared: dev.len(),
    })
}
