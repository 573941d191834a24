//! The trained vocoder model and its `DSMB` binary container.
//!
//! Layout: magic `DSMB`, `u16` version, `u32` sample rate, then four blocks
//! (normalization, eigenbasis, noise-model, envelope-config), each a `u64`
//! byte length followed by its payload. Vectors are a `u64` count followed by
//! little-endian `f64` values.

use std::path::Path;

use crate::dataset::NormalizationConfig;
use crate::eigen::EigenBasis;
use crate::envelope::EnvelopeConfig;
use crate::noise::NoiseModel;
use crate::window::WindowKind;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DSMB";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DsmModel {
    pub sample_rate: u32,
    pub normalization: NormalizationConfig,
    pub basis: EigenBasis,
    pub noise: NoiseModel,
    pub envelope: EnvelopeConfig,
}

impl DsmModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());

        let n = &self.normalization;
        let mut b = Writer::default();
        for v in [n.nyquist, n.max_voiced, n.f0_min, n.f0_max, n.f0_star] {
            b.f64(v);
        }
        b.u64(n.normalized_length as u64);
        b.finish(&mut out);

        let e = &self.basis;
        let mut b = Writer::default();
        b.u64(e.training_frame_count as u64);
        b.u64(e.centered as u64);
        b.f64(e.implicit_first_weight);
        b.vec(&e.mean);
        b.vec(&e.eigenvalues);
        b.u64(e.eigenvectors.len() as u64);
        for v in &e.eigenvectors {
            b.vec(v);
        }
        b.finish(&mut out);

        let m = &self.noise;
        let mut b = Writer::default();
        b.vec(m.ar_coefficients());
        b.f64(m.ar_gain());
        b.f64(m.beta());
        b.f64(m.band_gain_ratio());
        b.finish(&mut out);

        let c = &self.envelope;
        let mut b = Writer::default();
        b.f64(c.alpha);
        b.f64(c.gamma);
        b.u64(c.order as u64);
        b.f64(c.frame_shift);
        b.f64(c.frame_length);
        b.u64(window_code(c.window));
        b.finish(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "header");
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: VERSION,
            });
        }
        let sample_rate = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));

        let mut b = r.block("normalization")?;
        let (nyquist, max_voiced, f0_min, f0_max, f0_star) = (b.f64()?, b.f64()?, b.f64()?, b.f64()?, b.f64()?);
        let normalized_length = b.usize()?;
        b.done()?;
        let normalization = NormalizationConfig {
            sample_rate,
            nyquist,
            max_voiced,
            f0_min,
            f0_max,
            f0_star,
            normalized_length,
        };
        if nyquist != sample_rate as f64 / 2.0 {
            return Err(corrupt("normalization", "Nyquist does not match the sample rate"));
        }
        normalization.validate().map_err(|e| corrupt("normalization", e))?;

        let mut b = r.block("eigenbasis")?;
        let training_frame_count = b.usize()?;
        let centered = match b.u64()? {
            0 => false,
            1 => true,
            other => return Err(corrupt("eigenbasis", format!("centering flag {other}"))),
        };
        let implicit_first_weight = b.f64()?;
        let mean = b.vec()?;
        let eigenvalues = b.vec()?;
        let count = b.usize()?;
        let mut eigenvectors = Vec::new();
        for _ in 0..count {
            let v = b.vec()?;
            if v.len() != mean.len() {
                return Err(corrupt("eigenbasis", "eigenvector length differs from the mean"));
            }
            eigenvectors.push(v);
        }
        b.done()?;
        if mean.len() != normalized_length || eigenvalues.len() != mean.len() || count > mean.len() {
            return Err(corrupt("eigenbasis", "dimensions inconsistent with the normalized length"));
        }
        let basis = EigenBasis {
            mean,
            eigenvectors,
            eigenvalues,
            training_frame_count,
            centered,
            implicit_first_weight,
        };

        let mut b = r.block("noise-model")?;
        let ar = b.vec()?;
        let (gain, beta, ratio) = (b.f64()?, b.f64()?, b.f64()?);
        b.done()?;
        let noise = NoiseModel::new(ar, gain, beta, ratio).map_err(|e| corrupt("noise-model", e))?;

        let mut b = r.block("envelope-config")?;
        let alpha = b.f64()?;
        let gamma = b.f64()?;
        let order = b.usize()?;
        let frame_shift = b.f64()?;
        let frame_length = b.f64()?;
        let window = window_from_code(b.u64()?).ok_or_else(|| corrupt("envelope-config", "unknown window"))?;
        b.done()?;
        let envelope = EnvelopeConfig {
            alpha,
            gamma,
            order,
            frame_shift,
            frame_length,
            window,
        };
        envelope.validate().map_err(|e| corrupt("envelope-config", e))?;

        if !r.rest().is_empty() {
            return Err(corrupt("trailer", "unexpected bytes after the last block"));
        }
        Ok(Self {
            sample_rate,
            normalization,
            basis,
            noise,
            envelope,
        })
    }
}

pub fn save_model(model: &DsmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DsmModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DsmModel::from_bytes(&bytes)
}

fn corrupt(block: &'static str, message: impl ToString) -> Error {
    Error::Corrupt {
        block,
        message: message.to_string(),
    }
}

fn window_code(w: WindowKind) -> u64 {
    match w {
        WindowKind::Hamming => 0,
        WindowKind::Hanning => 1,
        WindowKind::Blackman => 2,
    }
}

fn window_from_code(c: u64) -> Option<WindowKind> {
    match c {
        0 => Some(WindowKind::Hamming),
        1 => Some(WindowKind::Hanning),
        2 => Some(WindowKind::Blackman),
        _ => None,
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn vec(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }

    fn finish(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.buf);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    block: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], block: &'static str) -> Self {
        Self { bytes, block }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Truncated { block: self.block });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| corrupt(self.block, format!("count {v} out of range")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > self.bytes.len() / 8 {
            return Err(Error::Truncated { block: self.block });
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn block(&mut self, name: &'static str) -> Result<Reader<'a>> {
        self.block = name;
        let len = self.usize()?;
        Ok(Reader::new(self.take(len)?, name))
    }

    fn done(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(corrupt(self.block, "unread bytes at the end of the block"))
        }
    }

    fn rest(&self) -> &'a [u8] {
        self.bytes
    }
}

#[cfg(test)]
mod tests;
