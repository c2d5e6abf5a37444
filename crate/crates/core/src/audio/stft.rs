use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

/// Added to magnitudes before taking the log so silence maps to a finite
/// value; the floor clamp dominates it.
pub const DB_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// Periodic Hann.
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop_size: usize,
    pub window: WindowKind,
    pub floor_db: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { frame_size: 2048, hop_size: 512, window: WindowKind::Hann, floor_db: -80.0 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let n = self.frame_size;
        if n < 2 || !n.is_power_of_two() {
            return Err(AudioError::Config(format!("frame_size {n} must be a power of two >= 2")));
        }
        if self.hop_size == 0 || self.hop_size > n {
            return Err(AudioError::Config(format!("hop_size {} must be in 1..={n}", self.hop_size)));
        }
        // Constant overlap-add needs the hop to tile the frame; Hann also
        // needs at least two frames overlapping every sample.
        let cola = n.is_multiple_of(self.hop_size)
            && match self.window {
                WindowKind::Hann => n / self.hop_size >= 2,
                WindowKind::Rectangular => true,
            };
        if !cola {
            return Err(AudioError::Config(format!(
                "{:?} window with frame {n} and hop {} is not constant-overlap-add",
                self.window, self.hop_size
            )));
        }
        if !self.floor_db.is_finite() {
            return Err(AudioError::Config("floor_db must be finite".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn window(&self) -> Vec<f64> {
        let n = self.frame_size;
        match self.window {
            WindowKind::Hann => {
                (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
            }
            WindowKind::Rectangular => vec![1.0; n],
        }
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_size {
            0
        } else {
            (len - self.frame_size) / self.hop_size + 1
        }
    }

    /// Number of samples spanned by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop_size + self.frame_size
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    LinearMagnitude,
    Db,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::LinearMagnitude => f.write_str("linear-magnitude"),
            Scale::Db => f.write_str("dB"),
        }
    }
}

/// One-sided STFT: `values[[bin, frame]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub values: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn new(values: Array2<Complex64>, config: StftConfig, sample_rate: u32) -> Result<Self, AudioError> {
        config.validate()?;
        if values.nrows() != config.bins() {
            return Err(AudioError::Shape(format!(
                "{} rows, frame size {} implies {}",
                values.nrows(),
                config.frame_size,
                config.bins()
            )));
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(AudioError::Shape("non-finite STFT coefficient".into()));
        }
        Ok(Self { values, config, sample_rate })
    }

    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn magnitude(&self) -> Spectrogram {
        Spectrogram {
            values: self.values.mapv(|c| c.norm()),
            scale: Scale::LinearMagnitude,
            config: self.config,
            sample_rate: self.sample_rate,
        }
    }
}

/// Real-valued spectrogram image, `values[[bin, frame]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    pub scale: Scale,
    pub config: StftConfig,
    pub sample_rate: u32,
}

impl Spectrogram {
    /// Checks the scale invariants. The matrix is not required to match
    /// `config.bins()` so that arbitrary images can be explained, but
    /// inversion will reject such spectrograms.
    pub fn new(values: Array2<f64>, scale: Scale, config: StftConfig, sample_rate: u32) -> Result<Self, AudioError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AudioError::Shape("non-finite spectrogram value".into()));
        }
        let ok = match scale {
            Scale::Db => values.iter().all(|&v| v >= config.floor_db),
            Scale::LinearMagnitude => values.iter().all(|&v| v >= 0.0),
        };
        if !ok {
            return Err(AudioError::Shape(format!("values violate the {scale} range invariant")));
        }
        Ok(Self { values, scale, config, sample_rate })
    }

    /// A dB image with default STFT metadata, for callers that only need the
    /// image (tests, synthetic fixtures).
    pub fn db_image(values: Array2<f64>, floor_db: f64) -> Result<Self, AudioError> {
        let config = StftConfig { floor_db, ..StftConfig::default() };
        Self::new(values, Scale::Db, config, 22050)
    }

    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn floor_db(&self) -> f64 {
        self.config.floor_db
    }
}

fn forward_frames(samples: &[f64], config: &StftConfig, fft: &Arc<dyn Fft<f64>>, frames: usize) -> Vec<Vec<Complex64>> {
    let window = config.window();
    let bins = config.bins();
    (0..frames)
        .into_par_iter()
        .map(|t| {
            let start = t * config.hop_size;
            let mut buf: Vec<Complex64> = samples[start..start + config.frame_size]
                .iter()
                .zip(&window)
                .map(|(&s, &w)| Complex64::new(s * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(bins);
            buf
        })
        .collect()
}

pub(crate) fn stft_samples(samples: &[f64], config: &StftConfig, fft: &Arc<dyn Fft<f64>>) -> Array2<Complex64> {
    let frames = config.frame_count(samples.len());
    let cols = forward_frames(samples, config, fft, frames);
    let mut values = Array2::zeros((config.bins(), frames));
    for (t, col) in cols.into_iter().enumerate() {
        for (k, c) in col.into_iter().enumerate() {
            values[[k, t]] = c;
        }
    }
    values
}

pub fn stft(clip: &AudioClip, config: &StftConfig) -> Result<ComplexSpectrogram, AudioError> {
    config.validate()?;
    if clip.len() < config.frame_size {
        return Err(AudioError::InputTooShort { len: clip.len(), needed: config.frame_size });
    }
    let fft = FftPlanner::new().plan_fft_forward(config.frame_size);
    Ok(ComplexSpectrogram {
        values: stft_samples(&clip.samples, config, &fft),
        config: *config,
        sample_rate: clip.sample_rate,
    })
}

pub fn magnitude_db(spec: &ComplexSpectrogram, floor_db: f64) -> Spectrogram {
    Spectrogram {
        values: spec.values.mapv(|c| (20.0 * (c.norm() + DB_EPSILON).log10()).max(floor_db)),
        scale: Scale::Db,
        config: StftConfig { floor_db, ..spec.config },
        sample_rate: spec.sample_rate,
    }
}

pub fn db_to_magnitude(spec: &Spectrogram) -> Result<Spectrogram, AudioError> {
    if spec.scale != Scale::Db {
        return Err(AudioError::ScaleMismatch { expected: Scale::Db, actual: spec.scale });
    }
    Ok(Spectrogram {
        values: spec.values.mapv(|db| 10f64.powf(db / 20.0)),
        scale: Scale::LinearMagnitude,
        config: spec.config,
        sample_rate: spec.sample_rate,
    })
}
