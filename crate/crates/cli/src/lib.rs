//! Subcommands of the `dsm` tool. Each returns a key=value report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dsm_core::dataset::DEFAULT_MAX_VOICED_HZ;
use dsm_core::eigen::dispersion;
use dsm_core::envelope::EnvelopeConfig;
use dsm_core::metrics::median;
use dsm_core::model::{load_model, save_model, DsmModel};
use dsm_core::params::{format_params, num, parse_params, parse_pitch};
use dsm_core::pipeline::{copy_synthesis, evaluate_copy, train, CopyOptions, TrainConfig, Utterance};
use dsm_core::pitch::PitchTrack;
use dsm_core::spectrum::{bin_hz, next_pow2, to_db, Fourier};
use dsm_core::synth::{synth_voiced_frame, vocode, ResamplerCache, SynthesisOptions};
use dsm_core::wav::{read_wav, write_wav};
use dsm_core::{Error, Result};

/// Spacing of the exported AR magnitude response.
pub const AR_RESPONSE_STEP_HZ: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub corpus_dir: PathBuf,
    pub model_out: PathBuf,
    pub f0_min: f64,
    pub f0_max: f64,
    pub max_voiced: f64,
    pub coverage: f64,
    /// Directory of `<stem>.f0` pitch files overriding the internal tracker.
    pub f0_dir: Option<PathBuf>,
    pub gamma: f64,
    pub beta: f64,
    pub center: bool,
    pub jobs: Option<usize>,
}

impl Default for TrainArgs {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            corpus_dir: PathBuf::new(),
            model_out: PathBuf::new(),
            f0_min: d.f0_min,
            f0_max: d.f0_max,
            max_voiced: DEFAULT_MAX_VOICED_HZ,
            coverage: d.coverage,
            f0_dir: None,
            gamma: 0.0,
            beta: d.beta,
            center: true,
            jobs: None,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// WAV files of a directory, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_pitch(path: &Path, f0_min: f64, f0_max: f64) -> Result<PitchTrack> {
    parse_pitch(&read_text(path)?, f0_min, f0_max).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        e => e,
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn cmd_train(args: &TrainArgs) -> Result<String> {
    let files = corpus_files(&args.corpus_dir)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus(format!("no .wav files in {}", args.corpus_dir.display())));
    }
    let mut corpus = Vec::with_capacity(files.len());
    for f in &files {
        let signal = read_wav(f)?;
        let pitch = match &args.f0_dir {
            Some(dir) => {
                let stem = f.file_stem().unwrap_or_default();
                let p = dir.join(stem).with_extension("f0");
                Some(load_pitch(&p, args.f0_min, args.f0_max)?)
            }
            None => None,
        };
        corpus.push(Utterance { signal, pitch });
    }
    let envelope = EnvelopeConfig {
        gamma: args.gamma,
        ..EnvelopeConfig::default()
    };
    let cfg = TrainConfig {
        f0_min: args.f0_min,
        f0_max: args.f0_max,
        max_voiced: args.max_voiced,
        coverage: args.coverage,
        envelope,
        beta: args.beta,
        center: args.center,
        ..TrainConfig::default()
    };
    let (model, report) = with_pool(args.jobs, || train(&corpus, &cfg))??;
    save_model(&model, &args.model_out)?;

    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("string write");
    kv("model", args.model_out.display().to_string());
    kv("utterances", report.utterances.to_string());
    kv("corpus_minutes", num(report.corpus_seconds / 60.0));
    kv("frames", report.frames.to_string());
    kv("rejected_frames", report.rejected_frames.to_string());
    kv("boundary_skipped_frames", report.boundary_skipped.to_string());
    kv("unconverged_envelope_frames", report.unconverged_envelope_frames.to_string());
    kv("f0_star", num(model.normalization.f0_star));
    kv("normalized_length", model.normalization.normalized_length.to_string());
    kv("stored_components", model.basis.component_count().to_string());
    kv("coverage", num(args.coverage));
    kv("k_at_coverage", report.k_at_coverage.to_string());
    kv("first_eigenvector_share", num(report.first_eigenvector_share));
    kv("ar_order", report.ar_order.to_string());
    kv("stopband_attenuation_db", num(report.stopband_attenuation_db));
    kv("band_gain_ratio", num(report.band_gain_ratio));
    let curve: Vec<String> = report.dispersion.iter().map(|c| num(*c)).collect();
    kv("dispersion", curve.join(","));
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct CopyArgs {
    pub model: PathBuf,
    pub wav_in: PathBuf,
    pub wav_out: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub beta: Option<f64>,
    pub noise_gain: Option<f64>,
    pub f0_file: Option<PathBuf>,
    /// Also write the extracted parameters here.
    pub params_out: Option<PathBuf>,
}

pub fn cmd_copysynth(args: &CopyArgs) -> Result<String> {
    let model = load_model(&args.model)?;
    let signal = read_wav(&args.wav_in)?;
    let norm = &model.normalization;
    let pitch = match &args.f0_file {
        Some(p) => Some(load_pitch(p, norm.f0_min, norm.f0_max)?),
        None => None,
    };
    let opts = CopyOptions {
        k: args.k,
        seed: args.seed,
        synthesis: SynthesisOptions {
            noise_gain: args.noise_gain,
            beta: args.beta,
        },
        pitch,
    };
    let cs = with_pool(Some(1), || copy_synthesis(&signal, &model, &opts))??;
    let written = write_wav(&cs.vocoded.speech, &args.wav_out)?;
    if let Some(p) = &args.params_out {
        write_text(p, &format_params(&cs.params))?;
    }
    let metrics = evaluate_copy(&signal, &cs.vocoded.speech, &model, &cs.analysis.pitch)?;

    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("string write");
    kv("output", args.wav_out.display().to_string());
    kv("samples", written.samples.to_string());
    kv("clipped", written.clipped.to_string());
    kv("k", args.k.to_string());
    kv("seed", args.seed.to_string());
    kv("voiced_frames", cs.vocoded.report.voiced_frames.to_string());
    kv("below_f0_min", cs.vocoded.report.below_f0_min.to_string());
    kv("energy_holes", cs.vocoded.report.energy_holes.to_string());
    kv("compared_frames", metrics.voiced_frames_compared.to_string());
    kv("f0_deviation_median", num(metrics.f0_deviation));
    kv("mel_distortion_db_median", num(metrics.mel_distortion_db));
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct VocodeArgs {
    pub model: PathBuf,
    pub params: PathBuf,
    pub wav_out: PathBuf,
    /// Overrides the seed in the parameter file.
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub noise_gain: Option<f64>,
}

pub fn cmd_vocode(args: &VocodeArgs) -> Result<String> {
    let model = load_model(&args.model)?;
    let mut params = parse_params(&read_text(&args.params)?)?;
    if let Some(s) = args.seed {
        params.seed = s;
    }
    let opts = SynthesisOptions {
        noise_gain: args.noise_gain,
        beta: args.beta,
    };
    let v = with_pool(Some(1), || vocode(&params, &model, &opts))??;
    let written = write_wav(&v.speech, &args.wav_out)?;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("string write");
    kv("output", args.wav_out.display().to_string());
    kv("frames", params.frames.len().to_string());
    kv("samples", written.samples.to_string());
    kv("clipped", written.clipped.to_string());
    kv("voiced_frames", v.report.voiced_frames.to_string());
    kv("below_f0_min", v.report.below_f0_min.to_string());
    kv("energy_holes", v.report.energy_holes.to_string());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExportKind {
    Dispersion,
    /// 1-based eigenvector index.
    Eigenvector(usize),
    ArResponse,
    Decomposition(PathBuf),
}

impl std::str::FromStr for ExportKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "dispersion" => Ok(Self::Dispersion),
            None if s == "ar-response" => Ok(Self::ArResponse),
            Some(("eigenvector", i)) => match i.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(Self::Eigenvector(i)),
                _ => Err(format!("eigenvector index must be a positive integer, got `{i}`")),
            },
            Some(("decomposition", p)) if !p.is_empty() => Ok(Self::Decomposition(PathBuf::from(p))),
            _ => Err(format!(
                "unknown export `{s}` (dispersion, eigenvector:<i>, ar-response, decomposition:<wav>)"
            )),
        }
    }
}

pub fn export_csv(model: &DsmModel, what: &ExportKind) -> Result<String> {
    let mut out = String::new();
    match what {
        ExportKind::Dispersion => {
            out.push_str("component,eigenvalue,cumulative_fraction\n");
            let curve = dispersion(&model.basis);
            for i in 0..model.basis.component_count() {
                writeln!(out, "{},{},{}", i + 1, num(model.basis.eigenvalues[i]), num(curve.cumulative_fraction[i]))
                    .expect("string write");
            }
        }
        ExportKind::Eigenvector(i) => {
            let count = model.basis.component_count();
            if *i > count {
                return Err(Error::InvalidConfig(format!("eigenvector {i} requested, model stores {count}")));
            }
            out.push_str("sample,value\n");
            for (n, v) in model.basis.eigenvectors[i - 1].iter().enumerate() {
                writeln!(out, "{n},{}", num(*v)).expect("string write");
            }
        }
        ExportKind::ArResponse => {
            out.push_str("freq_hz,db\n");
            let sr = model.sample_rate;
            let steps = (sr as f64 / 2.0 / AR_RESPONSE_STEP_HZ).round() as usize;
            for s in 0..=steps {
                let hz = s as f64 * AR_RESPONSE_STEP_HZ;
                writeln!(out, "{},{}", num(hz), num(model.noise.response_db(hz, sr))).expect("string write");
            }
        }
        ExportKind::Decomposition(wav) => decomposition(model, wav, &mut out)?,
    }
    Ok(out)
}

/// Spectra of the deterministic and stochastic parts of one copy-synthesised
/// voiced frame, taken at the median-pitch closure of the utterance.
fn decomposition(model: &DsmModel, wav: &Path, out: &mut String) -> Result<()> {
    let signal = read_wav(wav)?;
    let opts = CopyOptions {
        k: model.basis.component_count().min(15),
        ..CopyOptions::default()
    };
    let cs = copy_synthesis(&signal, model, &opts)?;
    let targets = &cs.vocoded.plan.targets;
    if targets.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    let pitches: Vec<f64> = targets.iter().map(|t| t.f0).collect();
    let mid = median(&pitches);
    let target = targets
        .iter()
        .min_by(|a, b| (a.f0 - mid).abs().total_cmp(&(b.f0 - mid).abs()))
        .expect("non-empty");
    let cache = ResamplerCache::default();
    let frame = |noise_gain: Option<f64>| {
        let o = SynthesisOptions { noise_gain, beta: None };
        synth_voiced_frame(target, &model.basis, &model.noise, &model.normalization, &o, 0, &cache)
    };
    let total = frame(None)?.samples;
    let det = frame(Some(0.0))?.samples;
    let stoch: Vec<f64> = total.iter().zip(&det).map(|(t, d)| t - d).collect();

    let size = next_pow2(total.len()).max(512);
    let fourier = Fourier::new(size);
    let (pd, ps, pt) = (fourier.power(&det), fourier.power(&stoch), fourier.power(&total));
    out.push_str("freq_hz,deterministic_db,stochastic_db,total_db\n");
    for k in 0..fourier.bins() {
        writeln!(
            out,
            "{},{},{},{}",
            num(bin_hz(k, size, model.sample_rate)),
            num(to_db(pd[k])),
            num(to_db(ps[k])),
            num(to_db(pt[k]))
        )
        .expect("string write");
    }
    Ok(())
}

pub fn cmd_export(model: &Path, what: &ExportKind, out: &Path) -> Result<String> {
    let model = load_model(model)?;
    let csv = export_csv(&model, what)?;
    write_text(out, &csv)?;
    Ok(format!("output={}\nrows={}\n", out.display(), csv.lines().count() - 1))
}
