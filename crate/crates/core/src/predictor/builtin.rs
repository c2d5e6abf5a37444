//! Seeded synthetic two-level predictor.
//!
//! Mid feature `j` is `offset_j + amplitude_j * mean(S over region_j)`: a
//! sparse linear functional of the dB spectrogram over a rectangle given in
//! normalized coordinates. Emotions are `W * mid + b` with a seeded head, so
//! they are exactly linear in the mid-level vector.

use rayon::prelude::*;

use super::{
    check_batch_shape, EmotionVector, LinearHead, MidLevelVector, Prediction, Predictor, PredictorCapabilities,
    PredictorError, EMOTION_COUNT, MID_COUNT,
};
use crate::audio::Spectrogram;
use crate::rng::{self, Stream};

const MID_NAMES: [&str; MID_COUNT] =
    ["melodiousness", "articulation", "rhythmic_complexity", "mid_4", "mid_5", "mid_6", "mid_7"];

const EMOTION_NAMES: [&str; EMOTION_COUNT] =
    ["valence", "energy", "tension", "sadness", "emotion_5", "emotion_6", "emotion_7", "emotion_8"];

/// Rectangle in fractions of the (bins, frames) extent plus its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionTemplate {
    pub rows: (f64, f64),
    pub cols: (f64, f64),
    pub amplitude: f64,
}

impl RegionTemplate {
    /// Pixel ranges `(row0..row1, col0..col1)` for a concrete shape; never empty.
    pub fn pixel_ranges(&self, shape: (usize, usize)) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |(lo, hi): (f64, f64), n: usize| {
            let start = ((lo * n as f64).floor() as usize).min(n - 1);
            let end = ((hi * n as f64).ceil() as usize).clamp(start + 1, n);
            start..end
        };
        (span(self.rows, shape.0), span(self.cols, shape.1))
    }
}

#[derive(Debug, Clone)]
pub struct BuiltinPredictor {
    templates: [RegionTemplate; MID_COUNT],
    offsets: [f64; MID_COUNT],
    capabilities: PredictorCapabilities,
}

impl BuiltinPredictor {
    pub fn new(seed: u64) -> Self {
        let u = |a: u64, b: u64, lo: f64, hi: f64| rng::uniform(seed, Stream::Templates, a, b, lo, hi);
        let templates = std::array::from_fn(|j| {
            let j = j as u64;
            let row_width = u(j, 0, 0.15, 0.5);
            let row0 = u(j, 1, 0.0, 1.0 - row_width);
            let col_width = u(j, 2, 0.3, 1.0);
            let col0 = u(j, 3, 0.0, 1.0 - col_width);
            RegionTemplate {
                rows: (row0, row0 + row_width),
                cols: (col0, col0 + col_width),
                amplitude: u(j, 4, 0.02, 0.1),
            }
        });
        let offsets = std::array::from_fn(|j| u(j as u64, 5, 0.0, 1.0));
        let head = LinearHead {
            weights: std::array::from_fn(|i| std::array::from_fn(|j| u(100 + i as u64, j as u64, -1.0, 1.0))),
            bias: std::array::from_fn(|i| u(200, i as u64, -0.5, 0.5)),
        };
        Self::from_parts(templates, offsets, head)
    }

    /// Same head and offsets as [`BuiltinPredictor::new`], but every template
    /// has zero gain so the mid-level output ignores the input.
    pub fn constant(seed: u64) -> Self {
        let mut p = Self::new(seed);
        for t in &mut p.templates {
            t.amplitude = 0.0;
        }
        p
    }

    pub fn from_parts(templates: [RegionTemplate; MID_COUNT], offsets: [f64; MID_COUNT], head: LinearHead) -> Self {
        Self {
            templates,
            offsets,
            capabilities: PredictorCapabilities {
                mid_names: MID_NAMES.iter().map(|s| s.to_string()).collect(),
                emotion_names: EMOTION_NAMES.iter().map(|s| s.to_string()).collect(),
                linear_head: Some(head),
                input_spec: None,
            },
        }
    }

    pub fn templates(&self) -> &[RegionTemplate; MID_COUNT] {
        &self.templates
    }

    pub fn offsets(&self) -> &[f64; MID_COUNT] {
        &self.offsets
    }

    pub fn head(&self) -> &LinearHead {
        self.capabilities.linear_head.as_ref().expect("builtin always has a head")
    }

    pub fn predict_one(&self, spec: &Spectrogram) -> Prediction {
        let values = &spec.values;
        let mid = MidLevelVector(std::array::from_fn(|j| {
            let t = &self.templates[j];
            let (rows, cols) = t.pixel_ranges(values.dim());
            let area = (rows.len() * cols.len()) as f64;
            let sum: f64 = values.slice(ndarray::s![rows, cols]).iter().sum();
            self.offsets[j] + t.amplitude * (sum / area)
        }));
        let emotion: EmotionVector = self.head().apply(&mid);
        Prediction { mid, emotion }
    }
}

impl Predictor for BuiltinPredictor {
    fn capabilities(&self) -> &PredictorCapabilities {
        &self.capabilities
    }

    fn predict(&mut self, batch: &[Spectrogram]) -> Result<Vec<Prediction>, PredictorError> {
        check_batch_shape(batch)?;
        Ok(batch.par_iter().map(|s| self.predict_one(s)).collect())
    }
}
