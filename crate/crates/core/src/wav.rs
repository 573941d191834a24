//! 16-bit mono PCM WAV ingest and output.

use std::path::Path;

use crate::signal::SpeechSignal;
use crate::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

/// Outcome of [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub samples: usize,
    pub clipped: usize,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<SpeechSignal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Wav {
            path: path.into(),
            message: format!(
                "expected 16-bit integer PCM, found {}-bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    if spec.channels != 1 {
        return Err(Error::Wav {
            path: path.into(),
            message: format!("expected mono, found {} channels", spec.channels),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    SpeechSignal::new(samples, spec.sample_rate)
}

/// Quantizes `x` to a 16-bit code, clipping to `[-1, 1 - 2^-15]`.
/// The flag reports whether clipping happened.
pub fn quantize(x: f64) -> (i16, bool) {
    let hi = 1.0 - 1.0 / FULL_SCALE;
    let clipped = !(-1.0..=hi).contains(&x);
    let y = x.clamp(-1.0, hi);
    ((y * FULL_SCALE).round() as i16, clipped)
}

pub fn write_wav(signal: &SpeechSignal, path: impl AsRef<Path>) -> Result<WriteReport> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    let mut report = WriteReport::default();
    for &x in signal.samples() {
        let (q, clipped) = quantize(x);
        report.clipped += clipped as usize;
        report.samples += 1;
        writer.write_sample(q).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))?;
    Ok(report)
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        other => Error::Wav {
            path: path.into(),
            message: other.to_string(),
        },
    }
}
