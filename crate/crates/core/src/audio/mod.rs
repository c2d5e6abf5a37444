//! Audio I/O, forward spectrograms, and Griffin-Lim inversion.
//!
//! The spectrogram here is the explanation surface: a linear-frequency STFT
//! (bins x frames) that can be edited in the magnitude domain and turned back
//! into audio.

mod griffin_lim;
mod stft;
mod wav;

pub use griffin_lim::{griffin_lim, griffin_lim_with_trace, istft, spectral_distance, spectral_norm, PhaseInit};
pub use stft::{
    db_to_magnitude, magnitude_db, stft, ComplexSpectrogram, Scale, Spectrogram, StftConfig, WindowKind, DB_EPSILON,
};
pub use wav::{decode_wav, decode_wav_bytes, encode_wav, encode_wav_bytes};

use thiserror::Error;

/// Errors raised by the audio layer.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: chunk '{chunk}': {reason}")]
    Decode { chunk: String, reason: String },
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },
    #[error("invalid STFT config: {0}")]
    Config(String),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("expected {expected} spectrogram, got {actual}")]
    ScaleMismatch { expected: Scale, actual: Scale },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Mono audio with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}
