//! Superpixel segmentation of dB spectrograms.
//!
//! Felzenszwalb-Huttenlocher graph segmentation on an 8-connected pixel grid,
//! plus the label map type shared with the LIME stage and its exports.

mod export;
mod felzenszwalb;
mod smooth;

pub use export::{read_rle, segments_csv, write_rle};
pub use felzenszwalb::{felzenszwalb_segment, segment_image};
pub use smooth::{gaussian_kernel, gaussian_smooth};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("invalid segmentation config: {0}")]
    Config(String),
    #[error("image has {pixels} pixels, fewer than min_size {min_size}")]
    InputTooSmall { pixels: usize, min_size: usize },
    #[error("invalid label map: {0}")]
    InvalidLabels(String),
    #[error("shape mismatch: map is {map:?}, image is {image:?}")]
    Shape { map: (usize, usize), image: (usize, usize) },
    #[error("RLE parse error on line {line}: {reason}")]
    Rle { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Merge-threshold constant `k`; larger values favour larger segments.
    pub scale: f64,
    /// Minimum segment area in pixels.
    pub min_size: usize,
    /// Gaussian pre-smoothing standard deviation in pixels.
    pub sigma: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { scale: 25.0, min_size: 40, sigma: 0.8 }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SegmentationError::Config(format!("scale must be positive, got {}", self.scale)));
        }
        if self.min_size < 1 {
            return Err(SegmentationError::Config("min_size must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SegmentationError::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// A partition of an image into `segment_count` labelled regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    labels: Array2<u32>,
    segment_count: usize,
}

impl SegmentMap {
    /// Validates that labels are compact: every value in `0..N` occurs and
    /// nothing outside it does.
    pub fn from_labels(labels: Array2<u32>) -> Result<Self, SegmentationError> {
        if labels.is_empty() {
            return Err(SegmentationError::InvalidLabels("empty label map".into()));
        }
        let max = *labels.iter().max().unwrap() as usize;
        let mut seen = vec![false; max + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(SegmentationError::InvalidLabels(format!("label {missing} unused while {max} is present")));
        }
        Ok(Self { labels, segment_count: max + 1 })
    }

    pub fn labels(&self) -> &Array2<u32> {
        &self.labels
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    pub fn shape(&self) -> (usize, usize) {
        self.labels.dim()
    }

    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.segment_count];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    /// Pixel indices (row-major flat offsets) of every segment.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.segment_count];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l as usize].push(i);
        }
        members
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentStats {
    pub segment: usize,
    pub area: usize,
    /// Inclusive bounds `(row0, row1, col0, col1)`.
    pub bbox: (usize, usize, usize, usize),
    pub mean_value: f64,
}

pub fn segment_stats(map: &SegmentMap, image: &Array2<f64>) -> Result<Vec<SegmentStats>, SegmentationError> {
    if map.shape() != image.dim() {
        return Err(SegmentationError::Shape { map: map.shape(), image: image.dim() });
    }
    let mut stats: Vec<SegmentStats> = (0..map.segment_count())
        .map(|segment| SegmentStats { segment, area: 0, bbox: (usize::MAX, 0, usize::MAX, 0), mean_value: 0.0 })
        .collect();
    for ((r, c), &l) in map.labels().indexed_iter() {
        let s = &mut stats[l as usize];
        s.area += 1;
        s.bbox.0 = s.bbox.0.min(r);
        s.bbox.1 = s.bbox.1.max(r);
        s.bbox.2 = s.bbox.2.min(c);
        s.bbox.3 = s.bbox.3.max(c);
        s.mean_value += image[[r, c]];
    }
    for s in &mut stats {
        s.mean_value /= s.area as f64;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halves() -> (SegmentMap, Array2<f64>) {
        let labels = Array2::from_shape_fn((20, 20), |(_, c)| (c >= 10) as u32);
        let image = Array2::from_shape_fn((20, 20), |(_, c)| if c >= 10 { 0.0 } else { -80.0 });
        (SegmentMap::from_labels(labels).unwrap(), image)
    }

    #[test]
    fn compact_labels_required() {
        assert!(SegmentMap::from_labels(Array2::from_elem((2, 2), 1)).is_err());
        let m = SegmentMap::from_labels(Array2::from_shape_vec((1, 3), vec![0, 2, 1]).unwrap()).unwrap();
        assert_eq!(m.segment_count(), 3);
    }

    #[test]
    fn stats_single_segment() {
        let map = SegmentMap::from_labels(Array2::zeros((5, 7))).unwrap();
        let stats = segment_stats(&map, &Array2::from_elem((5, 7), -3.0)).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].area, 35);
        assert_eq!(stats[0].bbox, (0, 4, 0, 6));
        assert_eq!(stats[0].mean_value, -3.0);
    }

    #[test]
    fn stats_two_halves() {
        let (map, image) = halves();
        let stats = segment_stats(&map, &image).unwrap();
        assert_eq!(stats.iter().map(|s| s.area).collect::<Vec<_>>(), vec![200, 200]);
        assert_eq!(stats[0].mean_value, -80.0);
        assert_eq!(stats[1].mean_value, 0.0);
        assert_eq!(stats[1].bbox, (0, 19, 10, 19));
    }

    #[test]
    fn stats_areas_sum_to_pixel_count() {
        let labels = Array2::from_shape_fn((13, 17), |(r, c)| ((r * 31 + c * 7) % 5) as u32);
        let map = SegmentMap::from_labels(labels.clone()).unwrap();
        let stats = segment_stats(&map, &Array2::zeros((13, 17))).unwrap();
        // counting oracle
        let mut counts = [0usize; 5];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        assert_eq!(stats.iter().map(|s| s.area).collect::<Vec<_>>(), counts.to_vec());
        assert_eq!(stats.iter().map(|s| s.area).sum::<usize>(), 13 * 17);
    }

    #[test]
    fn stats_shape_mismatch() {
        let (map, _) = halves();
        assert!(segment_stats(&map, &Array2::zeros((3, 3))).is_err());
    }
}
