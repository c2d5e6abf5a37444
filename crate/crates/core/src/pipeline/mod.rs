//! End-to-end two-level explanation runs.
//!
//! Audio is analysed, the predictor's emotion profile is decomposed into
//! mid-level effects, one mid-level dimension is explained over spectrogram
//! segments, and the selected segments are rendered as masked spectrograms
//! and resynthesized audio.

mod config;
mod run;
mod synth;

pub use config::{PredictorSpec, RunConfig, TargetRef, TargetSpec};
pub use run::{
    run_stability, run_two_level, ExplanationBundle, ResolvedTarget, StabilityReport, StabilityRow, StabilitySummary,
    TargetKind,
};
pub use synth::{masked_db, synthesize_modified, SynthesisMode};

use serde::Serialize;
use std::fmt;
use thiserror::Error;

use crate::audio::AudioError;
use crate::effects::EffectsError;
use crate::lime::LimeError;
use crate::predictor::PredictorError;
use crate::segmentation::SegmentationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    ReadAudio,
    Spectrogram,
    Predict,
    Effects,
    Segment,
    Explain,
    Synthesize,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::ReadAudio => "read-audio",
            Stage::Spectrogram => "spectrogram",
            Stage::Predict => "predict",
            Stage::Effects => "effects",
            Stage::Segment => "segment",
            Stage::Explain => "explain",
            Stage::Synthesize => "synthesize",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Lime(#[from] LimeError),
    #[error(transparent)]
    Effects(#[from] EffectsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        Self { stage, source: source.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, StageError::Config(message.into()))
    }

    /// 2 config, 3 predictor or transport, 4 audio I/O, 5 internal numeric.
    pub fn exit_code(&self) -> i32 {
        match &self.source {
            StageError::Config(_) => 2,
            StageError::Audio(e) => match e {
                AudioError::Config(_) => 2,
                AudioError::ScaleMismatch { .. } | AudioError::Shape(_) => 5,
                _ => 4,
            },
            StageError::Predictor(_) => 3,
            StageError::Segmentation(e) => match e {
                SegmentationError::Config(_) => 2,
                SegmentationError::InputTooSmall { .. } => 4,
                _ => 5,
            },
            StageError::Lime(e) => match e {
                LimeError::Config(_) | LimeError::Underdetermined { .. } => 2,
                LimeError::Predictor { .. } | LimeError::NonFinite { .. } => 3,
                _ => 5,
            },
            StageError::Effects(_) => 5,
            StageError::Io { .. } => 4,
            StageError::Json(_) => 5,
        }
    }
}

/// Tags errors of one stage.
pub(crate) fn at<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}
