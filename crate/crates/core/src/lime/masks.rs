use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use super::{FillStrategy, LimeConfig, LimeError};
use crate::audio::Spectrogram;
use crate::rng::{self, Stream};
use crate::segmentation::SegmentMap;

/// Binary perturbation masks, one row per sample and one column per segment.
/// Row 0 is the unperturbed instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub masks: Array2<u8>,
}

impl MaskSet {
    pub fn n_samples(&self) -> usize {
        self.masks.nrows()
    }

    pub fn n_segments(&self) -> usize {
        self.masks.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, u8> {
        self.masks.row(i)
    }
}

/// Bit `col` of row `row`: one hash per 64-column block keyed by
/// `(seed, row, block)`.
#[inline]
fn mask_bit(seed: u64, row: usize, col: usize) -> u8 {
    ((rng::hash(seed, Stream::Masks, row as u64, (col / 64) as u64) >> (col % 64)) & 1) as u8
}

pub fn sample_masks(n_segments: usize, config: &LimeConfig) -> Result<MaskSet, LimeError> {
    config.validate(n_segments)?;
    let mut masks = Array2::<u8>::zeros((config.n_samples, n_segments));
    masks.as_slice_mut().expect("fresh arrays are contiguous").par_chunks_mut(n_segments).enumerate().for_each(
        |(row, out)| {
            if row == 0 {
                out.fill(1);
            } else {
                for (col, v) in out.iter_mut().enumerate() {
                    *v = mask_bit(config.seed, row, col);
                }
            }
        },
    );
    Ok(MaskSet { masks })
}

/// Precomputed fill values so masks can be applied repeatedly.
#[derive(Debug, Clone)]
pub struct MaskApplier<'a> {
    spec: &'a Spectrogram,
    labels: Vec<u32>,
    fill: Vec<f64>,
}

impl<'a> MaskApplier<'a> {
    pub fn new(spec: &'a Spectrogram, map: &SegmentMap, strategy: FillStrategy) -> Result<Self, LimeError> {
        if map.shape() != spec.shape() {
            return Err(LimeError::Shape(format!(
                "segment map is {:?}, spectrogram is {:?}",
                map.shape(),
                spec.shape()
            )));
        }
        let labels: Vec<u32> = map.labels().iter().copied().collect();
        let n = map.segment_count();
        let fill = match strategy {
            FillStrategy::SilenceFloor => vec![spec.floor_db(); n],
            FillStrategy::GlobalMean => {
                let mean = spec.values.iter().sum::<f64>() / spec.values.len() as f64;
                vec![mean; n]
            }
            FillStrategy::SegmentMean => {
                let mut sums = vec![0.0; n];
                let mut counts = vec![0usize; n];
                for (&l, &v) in labels.iter().zip(spec.values.iter()) {
                    sums[l as usize] += v;
                    counts[l as usize] += 1;
                }
                sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
            }
        };
        Ok(Self { spec, labels, fill })
    }

    pub fn n_segments(&self) -> usize {
        self.fill.len()
    }

    pub fn apply(&self, mask: &[u8]) -> Result<Spectrogram, LimeError> {
        if mask.len() != self.fill.len() {
            return Err(LimeError::Shape(format!("mask has {} entries for {} segments", mask.len(), self.fill.len())));
        }
        let src = &self.spec.values;
        let values: Vec<f64> = self
            .labels
            .iter()
            .zip(src.iter())
            .map(|(&l, &v)| if mask[l as usize] != 0 { v } else { self.fill[l as usize] })
            .collect();
        Ok(Spectrogram {
            values: Array2::from_shape_vec(src.dim(), values).expect("same element count"),
            scale: self.spec.scale,
            config: self.spec.config,
            sample_rate: self.spec.sample_rate,
        })
    }
}

pub fn apply_mask(
    spec: &Spectrogram,
    map: &SegmentMap,
    mask: &[u8],
    fill: FillStrategy,
) -> Result<Spectrogram, LimeError> {
    MaskApplier::new(spec, map, fill)?.apply(mask)
}

/// Exponential kernel on the cosine distance between `mask` and the
/// all-ones vector; an all-zero mask is at distance 1.
pub fn proximity_weight(mask: &[u8], kernel_width: f64) -> f64 {
    let n = mask.len() as f64;
    let on = mask.iter().filter(|&&m| m != 0).count() as f64;
    let d = if on == 0.0 { 1.0 } else { 1.0 - on / (n * on).sqrt() };
    (-(d * d) / (kernel_width * kernel_width)).exp()
}
