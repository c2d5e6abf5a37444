use serde::{Serialize, Serializer};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use super::PipelineError;
use crate::audio::StftConfig;
use crate::lime::LimeConfig;
use crate::predictor::ExternalOptions;
use crate::segmentation::SegmentationConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorSpec {
    Builtin,
    /// Builtin head and offsets with input-independent mid-level output.
    BuiltinConstant,
    Exec(String),
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin" => Ok(Self::Builtin),
            "builtin:constant" => Ok(Self::BuiltinConstant),
            _ => match s.strip_prefix("exec:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::Exec(cmd.to_string())),
                Some(_) => Err("exec: needs a command".into()),
                None => Err(format!("unknown predictor `{s}`; expected builtin, builtin:constant or exec:CMD")),
            },
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Builtin => f.write_str("builtin"),
            Self::BuiltinConstant => f.write_str("builtin:constant"),
            Self::Exec(cmd) => write!(f, "exec:{cmd}"),
        }
    }
}

impl Serialize for PredictorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetRef {
    Name(String),
    Index(usize),
}

impl fmt::Display for TargetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Name(n) => f.write_str(n),
            Self::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSpec {
    /// Highest predicted emotion, then its largest mid-level effect.
    Auto,
    Mid(TargetRef),
    Emotion(TargetRef),
}

impl FromStr for TargetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        let (kind, rest) =
            s.split_once(':').ok_or_else(|| format!("unknown target `{s}`; expected auto, mid:X or emotion:X"))?;
        if rest.is_empty() {
            return Err(format!("target `{s}` names no dimension"));
        }
        let r = match rest.parse::<usize>() {
            Ok(i) => TargetRef::Index(i),
            Err(_) => TargetRef::Name(rest.to_string()),
        };
        match kind {
            "mid" => Ok(Self::Mid(r)),
            "emotion" => Ok(Self::Emotion(r)),
            _ => Err(format!("unknown target kind `{kind}`")),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Mid(r) => write!(f, "mid:{r}"),
            Self::Emotion(r) => write!(f, "emotion:{r}"),
        }
    }
}

impl Serialize for TargetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub audio_path: PathBuf,
    pub predictor: PredictorSpec,
    /// Seed of the builtin synthetic model; ignored for external predictors.
    pub model_seed: u64,
    pub target: TargetSpec,
    pub lime: LimeConfig,
    pub segmentation: SegmentationConfig,
    pub stft: StftConfig,
    pub synth_gain: f64,
    pub gl_iterations: usize,
    pub out_dir: PathBuf,
    /// Rayon worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub predictor_timeout_secs: u64,
    pub predictor_batch_size: usize,
}

impl RunConfig {
    pub fn new(audio_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        let external = ExternalOptions::default();
        Self {
            audio_path: audio_path.into(),
            predictor: PredictorSpec::Builtin,
            model_seed: 0,
            target: TargetSpec::Auto,
            lime: LimeConfig { seed: 42, ..LimeConfig::default() },
            segmentation: SegmentationConfig::default(),
            stft: StftConfig::default(),
            synth_gain: 1.0,
            gl_iterations: 32,
            out_dir: out_dir.into(),
            workers: None,
            predictor_timeout_secs: external.timeout.as_secs(),
            predictor_batch_size: external.batch_size,
        }
    }

    pub fn external_options(&self) -> ExternalOptions {
        ExternalOptions {
            timeout: Duration::from_secs(self.predictor_timeout_secs),
            batch_size: self.predictor_batch_size,
            ..ExternalOptions::default()
        }
    }

    /// Checks everything that can be checked before touching inputs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.stft.validate().map_err(|e| PipelineError::config(e.to_string()))?;
        self.segmentation.validate().map_err(|e| PipelineError::config(e.to_string()))?;
        self.lime.validate(1).map_err(|e| PipelineError::config(e.to_string()))?;
        if !(self.synth_gain >= 0.0 && self.synth_gain.is_finite()) {
            return Err(PipelineError::config(format!("synth gain must be >= 0, got {}", self.synth_gain)));
        }
        if self.workers == Some(0) {
            return Err(PipelineError::config("workers must be positive"));
        }
        if self.predictor_batch_size == 0 || self.predictor_timeout_secs == 0 {
            return Err(PipelineError::config("predictor batch size and timeout must be positive"));
        }
        if let Ok(mut entries) = std::fs::read_dir(&self.out_dir) {
            if entries.next().is_some() {
                return Err(PipelineError::config(format!(
                    "output directory {} exists and is not empty",
                    self.out_dir.display()
                )));
            }
        } else if self.out_dir.exists() {
            return Err(PipelineError::config(format!("output path {} is not a directory", self.out_dir.display())));
        }
        Ok(())
    }
}
