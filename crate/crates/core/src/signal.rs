use crate::{Error, Result};

/// The only rate the analysis and synthesis pipeline accepts.
pub const SAMPLE_RATE: u32 = 16_000;

/// A mono signal with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl SpeechSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Rejects anything but the 16 kHz pipeline rate.
    pub fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedSampleRate(self.sample_rate));
        }
        Ok(())
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
