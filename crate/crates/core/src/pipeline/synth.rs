use ndarray::Array2;
use serde::Serialize;

use crate::audio::{griffin_lim, AudioClip, AudioError, ComplexSpectrogram, PhaseInit, Scale, Spectrogram};
use crate::lime::LimeExplanation;
use crate::segmentation::SegmentMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisMode {
    /// Only positively weighted segments remain audible.
    MaskPositive,
    /// Only negatively weighted segments remain audible.
    MaskNegative,
    /// `M + gain * M` on positive segments.
    Add,
    /// `max(M - gain * M, 0)` on negative segments.
    Subtract,
}

fn membership(map: &SegmentMap, ids: &[usize]) -> Result<Array2<bool>, AudioError> {
    let mut chosen = vec![false; map.segment_count()];
    for &id in ids {
        *chosen
            .get_mut(id)
            .ok_or_else(|| AudioError::Shape(format!("segment {id} not in a map of {}", map.segment_count())))? = true;
    }
    Ok(map.labels().mapv(|l| chosen[l as usize]))
}

/// Pixels of `ids` unchanged, everything else at the floor.
pub fn masked_db(db: &Spectrogram, map: &SegmentMap, ids: &[usize]) -> Result<Spectrogram, AudioError> {
    if map.shape() != db.shape() {
        return Err(AudioError::Shape(format!("segment map {:?} vs spectrogram {:?}", map.shape(), db.shape())));
    }
    let keep = membership(map, ids)?;
    let floor = db.floor_db();
    let mut values = db.values.clone();
    ndarray::Zip::from(&mut values).and(&keep).for_each(|v, &k| {
        if !k {
            *v = floor;
        }
    });
    Ok(Spectrogram { values, ..db.clone() })
}

/// Edits the linear magnitude of `original` over the explanation's segments
/// and inverts it with Griffin-Lim started from the original phase.
pub fn synthesize_modified(
    original: &ComplexSpectrogram,
    explanation: &LimeExplanation,
    map: &SegmentMap,
    mode: SynthesisMode,
    gain: f64,
    iterations: usize,
) -> Result<AudioClip, AudioError> {
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(AudioError::Config(format!("gain must be >= 0, got {gain}")));
    }
    let magnitude = original.magnitude();
    if map.shape() != magnitude.shape() {
        return Err(AudioError::Shape(format!("segment map {:?} vs spectrogram {:?}", map.shape(), magnitude.shape())));
    }
    let ids = match mode {
        SynthesisMode::MaskPositive | SynthesisMode::Add => &explanation.positive_ids,
        SynthesisMode::MaskNegative | SynthesisMode::Subtract => &explanation.negative_ids,
    };
    let inside = membership(map, ids)?;
    let mut values = magnitude.values.clone();
    ndarray::Zip::from(&mut values).and(&inside).for_each(|m, &k| {
        *m = match (mode, k) {
            (SynthesisMode::MaskPositive | SynthesisMode::MaskNegative, true) => *m,
            (SynthesisMode::MaskPositive | SynthesisMode::MaskNegative, false) => 0.0,
            (SynthesisMode::Add, true) => *m + gain * *m,
            (SynthesisMode::Subtract, true) => (*m - gain * *m).max(0.0),
            (_, false) => *m,
        }
    });
    let target = Spectrogram::new(values, Scale::LinearMagnitude, original.config, original.sample_rate)?;
    griffin_lim(&target, iterations, PhaseInit::Given(original))
}
