//! Black-box access to Audio -> Mid -> Emotion predictors.
//!
//! A predictor maps dB spectrograms to a 7-dimensional mid-level vector and
//! an 8-dimensional emotion vector. Two backends exist: a seeded synthetic
//! model living in-process, and an external process speaking NDJSON over
//! stdio.

mod builtin;
mod external;
mod protocol;

pub use builtin::{BuiltinPredictor, RegionTemplate};
pub use external::{ExternalOptions, ExternalPredictor};
pub use protocol::{
    CapabilitiesMessage, FramesSpec, InputSpec, LinearHeadWire, PredictRequest, PredictionMessage, PROTOCOL_VERSION,
};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::Spectrogram;

pub const MID_COUNT: usize = 7;
pub const EMOTION_COUNT: usize = 8;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("failed to spawn predictor `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("protocol version mismatch: host speaks {expected}, predictor speaks {actual}")]
    ProtocolVersion { expected: u32, actual: u32 },
    #[error("protocol error: {reason}: {line}")]
    Protocol { reason: String, line: String },
    #[error("field `{field}` has {actual} entries, expected {expected}")]
    Arity { field: String, expected: usize, actual: usize },
    #[error("predictor did not answer within {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("predictor returned a non-finite value for item {index}: {detail}")]
    PredictionValue { index: usize, detail: String },
    #[error("batch item {index} has shape {actual:?}, expected {expected:?}")]
    BatchShape { index: usize, expected: (usize, usize), actual: (usize, usize) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidLevelVector(pub [f64; MID_COUNT]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionVector(pub [f64; EMOTION_COUNT]);

/// The final Mid -> Emotion layer: `emotion = weights * mid + bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: [[f64; MID_COUNT]; EMOTION_COUNT],
    pub bias: [f64; EMOTION_COUNT],
}

impl LinearHead {
    pub fn apply(&self, mid: &MidLevelVector) -> EmotionVector {
        let mut out = self.bias;
        for (o, row) in out.iter_mut().zip(&self.weights) {
            *o += row.iter().zip(&mid.0).map(|(w, m)| w * m).sum::<f64>();
        }
        EmotionVector(out)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mid: MidLevelVector,
    pub emotion: EmotionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorCapabilities {
    pub mid_names: Vec<String>,
    pub emotion_names: Vec<String>,
    /// Present when the model exposes its final linear layer; effects
    /// decompositions are unavailable without it.
    pub linear_head: Option<LinearHead>,
    /// `None` accepts any spectrogram shape.
    pub input_spec: Option<InputSpec>,
}

impl PredictorCapabilities {
    pub fn mid_index(&self, name: &str) -> Option<usize> {
        self.mid_names.iter().position(|n| n == name)
    }

    pub fn emotion_index(&self, name: &str) -> Option<usize> {
        self.emotion_names.iter().position(|n| n == name)
    }
}

pub trait Predictor: Send {
    fn capabilities(&self) -> &PredictorCapabilities;

    /// Predicts every spectrogram of `batch`, preserving order.
    fn predict(&mut self, batch: &[Spectrogram]) -> Result<Vec<Prediction>, PredictorError>;
}

/// All items of a batch must share one shape.
pub(crate) fn check_batch_shape(batch: &[Spectrogram]) -> Result<(), PredictorError> {
    if let Some(first) = batch.first() {
        let expected = first.shape();
        for (index, spec) in batch.iter().enumerate() {
            if spec.shape() != expected {
                return Err(PredictorError::BatchShape { index, expected, actual: spec.shape() });
            }
        }
    }
    Ok(())
}
