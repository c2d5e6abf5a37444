//! LIME over spectrogram segments.
//!
//! Perturbed instances switch whole segments on or off, the black box is
//! queried on every perturbation, and a proximity-weighted linear surrogate
//! is fitted over the binary masks. Features are kept automatically when the
//! ratio of a coefficient's p-value to its magnitude is small enough.

mod explain;
mod linalg;
mod masks;
mod stability;
mod surrogate;

pub use explain::{explain_instance, select_features, BlackBox, LimeExplanation, SelectedFeature};
pub use linalg::Cholesky;
pub use masks::{apply_mask, proximity_weight, sample_masks, MaskApplier, MaskSet};
pub use stability::{jaccard, stability_score, PairJaccard, StabilityScore};
pub use surrogate::{fit_surrogate, student_t_two_sided_p, SurrogateFit};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::PredictorError;

#[derive(Debug, Error)]
pub enum LimeError {
    #[error("invalid LIME config: {0}")]
    Config(String),
    #[error("{n_samples} samples cannot determine {n_segments} segments plus intercept; need at least {}", n_segments + 2)]
    Underdetermined { n_samples: usize, n_segments: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("normal matrix is rank deficient at column {column}; use ridge_alpha > 0 or more samples")]
    RankDeficient { column: usize },
    #[error("black box failed on mask row {row}: {source}")]
    Predictor {
        row: usize,
        #[source]
        source: PredictorError,
    },
    #[error("black box returned non-finite value {value} for mask row {row}")]
    NonFinite { row: usize, value: f64 },
    #[error("explanations are not comparable: {0}")]
    Comparability(String),
}

/// Value substituted for pixels of switched-off segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillStrategy {
    /// The spectrogram's dB floor, i.e. acoustic removal.
    SilenceFloor,
    SegmentMean,
    GlobalMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub fill: FillStrategy,
    pub ridge_alpha: f64,
    pub ratio_threshold: f64,
    pub seed: u64,
    /// Perturbations evaluated per black-box call. Does not affect results.
    pub batch_size: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 50_000,
            kernel_width: 0.25,
            fill: FillStrategy::SilenceFloor,
            ridge_alpha: 0.0,
            ratio_threshold: 1e-6,
            seed: 0,
            batch_size: 64,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self, n_segments: usize) -> Result<(), LimeError> {
        if n_segments == 0 {
            return Err(LimeError::Config("need at least one segment".into()));
        }
        if self.n_samples < n_segments + 2 {
            return Err(LimeError::Underdetermined { n_samples: self.n_samples, n_segments });
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(LimeError::Config("kernel_width must be positive".into()));
        }
        if self.ratio_threshold.is_nan() || self.ratio_threshold <= 0.0 {
            return Err(LimeError::Config("ratio_threshold must be positive".into()));
        }
        if !(self.ridge_alpha >= 0.0 && self.ridge_alpha.is_finite()) {
            return Err(LimeError::Config("ridge_alpha must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(LimeError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}
