//! Inverse STFT and Griffin-Lim phase retrieval.
//!
//! The inverse is the least-squares overlap-add (window-weighted sum divided
//! by the summed squared window), which is the orthogonal projection onto
//! consistent spectrograms. Alternating it with magnitude replacement makes
//! the spectral error non-increasing.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::stft::stft_samples;
use super::{AudioClip, AudioError, ComplexSpectrogram, Scale, Spectrogram, StftConfig};
use crate::rng::{self, Stream};

/// Samples whose summed squared window falls below this fraction of the peak
/// are not constrained by any frame strongly enough to be recovered; they
/// are held at zero (only the outermost edge samples of a Hann STFT).
const MIN_WINDOW_ENERGY: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub enum PhaseInit<'a> {
    /// Start from the phase of an existing STFT.
    Given(&'a ComplexSpectrogram),
    /// Uniform random phases derived from `seed`.
    Random { seed: u64 },
}

fn inverse_frames(values: &Array2<Complex64>, config: &StftConfig, ifft: &Arc<dyn Fft<f64>>) -> Vec<f64> {
    let n = config.frame_size;
    let half = n / 2;
    let frames = values.ncols();
    let window = config.window();
    let len = config.signal_len(frames);
    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in 0..frames {
        let col = values.column(t);
        // Hermitian extension; DC and Nyquist must be real for a real frame.
        buf[0] = Complex64::new(col[0].re, 0.0);
        buf[half] = Complex64::new(col[half].re, 0.0);
        for k in 1..half {
            buf[k] = col[k];
            buf[n - k] = col[k].conj();
        }
        ifft.process(&mut buf);
        let start = t * config.hop_size;
        for i in 0..n {
            let w = window[i];
            out[start + i] += w * buf[i].re / n as f64;
            norm[start + i] += w * w;
        }
    }
    let peak = norm.iter().cloned().fold(0.0, f64::max);
    for (x, &e) in out.iter_mut().zip(&norm) {
        if e > MIN_WINDOW_ENERGY * peak {
            *x /= e;
        } else {
            *x = 0.0;
        }
    }
    out
}

/// Least-squares inverse STFT. Output length is `(frames - 1) * hop + frame_size`.
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioClip, AudioError> {
    spec.config.validate()?;
    if spec.bins() != spec.config.bins() {
        return Err(AudioError::Shape(format!("{} bins for frame size {}", spec.bins(), spec.config.frame_size)));
    }
    let ifft = FftPlanner::new().plan_fft_inverse(spec.config.frame_size);
    Ok(AudioClip { samples: inverse_frames(&spec.values, &spec.config, &ifft), sample_rate: spec.sample_rate })
}

fn bin_weight(k: usize, bins: usize) -> f64 {
    if k == 0 || k + 1 == bins {
        1.0
    } else {
        2.0
    }
}

/// Frobenius distance between two one-sided magnitude matrices, measured
/// over the full two-sided spectrum (interior bins count twice).
pub fn spectral_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let bins = a.nrows();
    let mut acc = 0.0f64;
    for (((k, _), &x), &y) in a.indexed_iter().zip(b.iter()) {
        acc += bin_weight(k, bins) * (x - y) * (x - y);
    }
    acc.sqrt()
}

/// Two-sided Frobenius norm of a one-sided magnitude matrix.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    let bins = a.nrows();
    a.indexed_iter().map(|((k, _), &x)| bin_weight(k, bins) * x * x).sum::<f64>().sqrt()
}

fn unit_phasor(c: Complex64) -> Complex64 {
    let r = c.norm();
    if r > 0.0 {
        c / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

pub fn griffin_lim(target: &Spectrogram, iterations: usize, init: PhaseInit<'_>) -> Result<AudioClip, AudioError> {
    griffin_lim_with_trace(target, iterations, init).map(|(clip, _)| clip)
}

/// Runs Griffin-Lim and also returns the spectral error of every iterate,
/// `iterations + 1` values starting with the initial estimate.
pub fn griffin_lim_with_trace(
    target: &Spectrogram,
    iterations: usize,
    init: PhaseInit<'_>,
) -> Result<(AudioClip, Vec<f64>), AudioError> {
    if target.scale != Scale::LinearMagnitude {
        return Err(AudioError::ScaleMismatch { expected: Scale::LinearMagnitude, actual: target.scale });
    }
    let config = target.config;
    config.validate()?;
    let (bins, frames) = target.shape();
    if bins != config.bins() {
        return Err(AudioError::Shape(format!(
            "target has {bins} bins, frame size {} implies {}",
            config.frame_size,
            config.bins()
        )));
    }
    if frames == 0 {
        return Err(AudioError::Shape("target has no frames".into()));
    }

    let magnitude = &target.values;
    let mut current: Array2<Complex64> = match init {
        PhaseInit::Given(spec) => {
            if spec.values.dim() != magnitude.dim() {
                return Err(AudioError::Shape(format!(
                    "initial phase is {:?}, target is {:?}",
                    spec.values.dim(),
                    magnitude.dim()
                )));
            }
            Zip::from(magnitude).and(&spec.values).map_collect(|&m, &c| unit_phasor(c) * m)
        }
        PhaseInit::Random { seed } => Array2::from_shape_fn((bins, frames), |(k, t)| {
            let theta = rng::uniform(seed, Stream::Phase, k as u64, t as u64, 0.0, std::f64::consts::TAU);
            Complex64::from_polar(magnitude[[k, t]], theta)
        }),
    };

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(config.frame_size);
    let ifft = planner.plan_fft_inverse(config.frame_size);

    let mut signal = inverse_frames(&current, &config, &ifft);
    let mut trace = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let rebuilt = stft_samples(&signal, &config, &fft);
        trace.push(spectral_distance(&rebuilt.mapv(|c| c.norm()), magnitude));
        current = Zip::from(magnitude).and(&rebuilt).map_collect(|&m, &c| unit_phasor(c) * m);
        signal = inverse_frames(&current, &config, &ifft);
    }
    let last = stft_samples(&signal, &config, &fft);
    trace.push(spectral_distance(&last.mapv(|c| c.norm()), magnitude));

    Ok((AudioClip { samples: signal, sample_rate: target.sample_rate }, trace))
}
