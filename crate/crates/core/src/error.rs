use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("unsupported sample rate {0} Hz (only 16000 Hz is accepted)")]
    UnsupportedSampleRate(u32),
    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("bad magic {0:?}, not a DSMB model file")]
    BadMagic([u8; 4]),
    #[error("unsupported model version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },
    #[error("model file truncated in block `{block}`")]
    Truncated { block: &'static str },
    #[error("corrupt model file in block `{block}`: {message}")]
    Corrupt { block: &'static str, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("envelope covers {envelope} samples but the signal has {signal}")]
    DurationMismatch { signal: usize, envelope: usize },
    #[error("synthesis filter unstable at envelope frame {frame}")]
    UnstableFrame { frame: usize },

    #[error("zero-energy frame cannot be normalized")]
    ZeroEnergyFrame,
    #[error("PCA needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no voiced frames")]
    NoVoicedFrames,
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
