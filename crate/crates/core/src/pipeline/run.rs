use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;
use serde_json::json;

use super::synth::{masked_db, synthesize_modified, SynthesisMode};
use super::{at, PipelineError, PredictorSpec, RunConfig, Stage, StageError, TargetRef, TargetSpec};
use crate::audio::{decode_wav, encode_wav_bytes, magnitude_db, stft, AudioClip, ComplexSpectrogram, Spectrogram};
use crate::effects::{effects_csv, head_discrepancies, instance_effects, top_effect, EffectsMatrix, HeadDiscrepancy};
use crate::lime::{explain_instance, jaccard, LimeConfig, LimeExplanation};
use crate::predictor::{BuiltinPredictor, ExternalPredictor, Prediction, Predictor, PredictorError};
use crate::segmentation::{felzenszwalb_segment, segments_csv, write_rle, SegmentMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Mid,
    Emotion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedTarget {
    pub kind: TargetKind,
    pub index: usize,
    pub name: String,
    /// For `auto`: the emotion whose top effect chose this dimension.
    pub via_emotion: Option<String>,
    pub via_emotion_value: Option<f64>,
    pub effect: Option<f64>,
}

impl ResolvedTarget {
    /// Label stored in explanations, e.g. `mid:articulation`.
    pub fn label(&self) -> String {
        match self.kind {
            TargetKind::Mid => format!("mid:{}", self.name),
            TargetKind::Emotion => format!("emotion:{}", self.name),
        }
    }

    fn pick(&self, p: &Prediction) -> f64 {
        match self.kind {
            TargetKind::Mid => p.mid.0[self.index],
            TargetKind::Emotion => p.emotion.0[self.index],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExplanationBundle {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub target: ResolvedTarget,
    pub segment_count: usize,
    pub explanation: LimeExplanation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub n_samples: usize,
    pub seed_a: u64,
    pub seed_b: u64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub n_samples: usize,
    pub runs: usize,
    pub mean_pairwise_jaccard: f64,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub target: ResolvedTarget,
    pub segment_count: usize,
    pub pairs: Vec<StabilityRow>,
    pub summary: Vec<StabilitySummary>,
}

/// Stages shared by explanation and stability runs.
struct Prepared {
    complex: ComplexSpectrogram,
    db: Spectrogram,
    predictor: Box<dyn Predictor>,
    prediction: Prediction,
    effects: Option<EffectsMatrix>,
    discrepancies: Vec<HeadDiscrepancy>,
    target: ResolvedTarget,
    map: SegmentMap,
    clip: AudioClip,
}

#[derive(Default)]
struct Timings(BTreeMap<String, f64>);

impl Timings {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.0.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Writes into a hidden sibling directory renamed into place on success, so
/// failed runs leave nothing at the output path.
struct BundleWriter {
    tmp: PathBuf,
    files: Vec<String>,
    done: bool,
}

impl BundleWriter {
    fn create(out_dir: &Path) -> Result<Self, PipelineError> {
        let name = out_dir
            .file_name()
            .ok_or_else(|| PipelineError::config(format!("invalid output path {}", out_dir.display())))?
            .to_string_lossy();
        let parent = match out_dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let tmp = parent.join(format!(".{name}.partial-{}", std::process::id()));
        let io = |source| PipelineError::new(Stage::Write, StageError::Io { path: tmp.display().to_string(), source });
        std::fs::create_dir_all(&parent).map_err(io)?;
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(io)?;
        }
        std::fs::create_dir(&tmp).map_err(io)?;
        Ok(Self { tmp, files: Vec::new(), done: false })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
        let path = self.tmp.join(name);
        std::fs::write(&path, bytes).map_err(|source| {
            PipelineError::new(Stage::Write, StageError::Io { path: path.display().to_string(), source })
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, out_dir: &Path) -> Result<Vec<String>, PipelineError> {
        std::fs::rename(&self.tmp, out_dir).map_err(|source| {
            PipelineError::new(Stage::Write, StageError::Io { path: out_dir.display().to_string(), source })
        })?;
        self.done = true;
        Ok(std::mem::take(&mut self.files))
    }
}

impl Drop for BundleWriter {
    fn drop(&mut self) {
        if !self.done {
            let _ = std::fs::remove_dir_all(&self.tmp);
        }
    }
}

fn open_predictor(config: &RunConfig) -> Result<Box<dyn Predictor>, PipelineError> {
    Ok(match &config.predictor {
        PredictorSpec::Builtin => Box::new(BuiltinPredictor::new(config.model_seed)),
        PredictorSpec::BuiltinConstant => Box::new(BuiltinPredictor::constant(config.model_seed)),
        PredictorSpec::Exec(cmd) => {
            Box::new(ExternalPredictor::spawn(cmd, config.external_options()).map_err(at(Stage::Predict))?)
        }
    })
}

fn lookup(names: &[String], r: &TargetRef, what: &str) -> Result<usize, PipelineError> {
    match r {
        TargetRef::Index(i) if *i < names.len() => Ok(*i),
        TargetRef::Index(i) => {
            Err(PipelineError::config(format!("{what} index {i} out of range (predictor has {})", names.len())))
        }
        TargetRef::Name(n) => names.iter().position(|x| x == n).ok_or_else(|| {
            PipelineError::config(format!("unknown {what} `{n}`; predictor offers {}", names.join(", ")))
        }),
    }
}

fn resolve_target(
    spec: &TargetSpec,
    predictor: &dyn Predictor,
    prediction: &Prediction,
    effects: Option<&EffectsMatrix>,
) -> Result<ResolvedTarget, PipelineError> {
    let caps = predictor.capabilities();
    let plain = |kind, index: usize, names: &[String]| ResolvedTarget {
        kind,
        index,
        name: names[index].clone(),
        via_emotion: None,
        via_emotion_value: None,
        effect: None,
    };
    match spec {
        TargetSpec::Mid(r) => {
            Ok(plain(TargetKind::Mid, lookup(&caps.mid_names, r, "mid-level feature")?, &caps.mid_names))
        }
        TargetSpec::Emotion(r) => {
            Ok(plain(TargetKind::Emotion, lookup(&caps.emotion_names, r, "emotion")?, &caps.emotion_names))
        }
        TargetSpec::Auto => {
            let effects = effects
                .ok_or_else(|| PipelineError::config("target auto requires a predictor exposing its linear head"))?;
            let emotions = &prediction.emotion.0;
            let mut emotion = 0;
            for (i, &v) in emotions.iter().enumerate() {
                if v > emotions[emotion] {
                    emotion = i;
                }
            }
            let (mid, effect) = top_effect(effects, emotion).map_err(at(Stage::Effects))?;
            Ok(ResolvedTarget {
                via_emotion: Some(caps.emotion_names[emotion].clone()),
                via_emotion_value: Some(emotions[emotion]),
                effect: Some(effect),
                ..plain(TargetKind::Mid, mid, &caps.mid_names)
            })
        }
    }
}

fn prepare(config: &RunConfig, timings: &mut Timings) -> Result<Prepared, PipelineError> {
    let clip = timings.time(Stage::ReadAudio, || decode_wav(&config.audio_path)).map_err(at(Stage::ReadAudio))?;
    let (complex, db) = timings
        .time(Stage::Spectrogram, || {
            let complex = stft(&clip, &config.stft)?;
            let db = magnitude_db(&complex, config.stft.floor_db);
            Ok::<_, crate::audio::AudioError>((complex, db))
        })
        .map_err(at(Stage::Spectrogram))?;

    let mut predictor = timings.time(Stage::Predict, || open_predictor(config))?;
    let prediction = timings
        .time(Stage::Predict, || predictor.predict(std::slice::from_ref(&db)))
        .map_err(at(Stage::Predict))?
        .pop()
        .ok_or_else(|| PipelineError::new(Stage::Predict, PredictorError::Transport("empty prediction".into())))?;

    let head = predictor.capabilities().linear_head;
    let effects = head.map(|h| instance_effects(&prediction.mid, &h));
    let discrepancies = head.map(|h| head_discrepancies(&prediction.mid, &prediction.emotion, &h)).unwrap_or_default();
    for d in &discrepancies {
        log::warn!("predictor emotion {} is {} but its head gives {}", d.emotion, d.reported, d.recomputed);
    }
    let target = resolve_target(&config.target, predictor.as_ref(), &prediction, effects.as_ref())?;
    log::info!("explaining {} (value {})", target.label(), target.pick(&prediction));

    let map =
        timings.time(Stage::Segment, || felzenszwalb_segment(&db, &config.segmentation)).map_err(at(Stage::Segment))?;
    log::info!("{} segments", map.segment_count());
    Ok(Prepared { complex, db, predictor, prediction, effects, discrepancies, target, map, clip })
}

fn explain(prepared: &mut Prepared, lime: &LimeConfig) -> Result<LimeExplanation, PipelineError> {
    let target = prepared.target.clone();
    let predictor = &mut prepared.predictor;
    let mut black_box = |batch: &[Spectrogram]| -> Result<Vec<f64>, PredictorError> {
        Ok(predictor.predict(batch)?.iter().map(|p| target.pick(p)).collect())
    };
    explain_instance(&mut black_box, &target.label(), &prepared.db, &prepared.map, lime).map_err(at(Stage::Explain))
}

fn in_pool<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::config(format!("cannot build worker pool: {e}")))?
            .install(f),
    }
}

fn matrix_csv(values: &Array2<f64>) -> String {
    let mut out = String::with_capacity(values.len() * 8);
    for row in values.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

fn prediction_json(prepared: &Prepared) -> serde_json::Value {
    let caps = prepared.predictor.capabilities();
    json!({
        "mid_names": caps.mid_names,
        "emotion_names": caps.emotion_names,
        "mid": prepared.prediction.mid.0,
        "emotion": prepared.prediction.emotion.0,
        "linear_head": caps.linear_head.is_some(),
        "head_discrepancies": prepared.discrepancies,
    })
}

/// Runs the whole explanation workflow and writes the bundle to
/// `config.out_dir`.
pub fn run_two_level(config: &RunConfig) -> Result<ExplanationBundle, PipelineError> {
    config.validate()?;
    in_pool(config.workers, || run_two_level_inner(config))
}

fn run_two_level_inner(config: &RunConfig) -> Result<ExplanationBundle, PipelineError> {
    let mut timings = Timings::default();
    let mut prepared = prepare(config, &mut timings)?;
    let explanation = timings.time(Stage::Explain, || explain(&mut prepared, &config.lime))?;
    log::info!(
        "selected {} segments ({} positive, {} negative), r^2 = {}",
        explanation.selected.len(),
        explanation.positive_ids.len(),
        explanation.negative_ids.len(),
        explanation.r_squared
    );

    let synth = |mode| {
        synthesize_modified(
            &prepared.complex,
            &explanation,
            &prepared.map,
            mode,
            config.synth_gain,
            config.gl_iterations,
        )
        .map_err(at(Stage::Synthesize))
    };
    let audio = timings.time(Stage::Synthesize, || -> Result<_, PipelineError> {
        Ok([
            ("masked_pos.wav", synth(SynthesisMode::MaskPositive)?),
            ("masked_neg.wav", synth(SynthesisMode::MaskNegative)?),
            ("modified_add.wav", synth(SynthesisMode::Add)?),
            ("modified_sub.wav", synth(SynthesisMode::Subtract)?),
        ])
    })?;
    let pos = masked_db(&prepared.db, &prepared.map, &explanation.positive_ids).map_err(at(Stage::Synthesize))?;
    let neg = masked_db(&prepared.db, &prepared.map, &explanation.negative_ids).map_err(at(Stage::Synthesize))?;

    let write_start = Instant::now();
    let mut bundle = BundleWriter::create(&config.out_dir)?;
    let caps = prepared.predictor.capabilities().clone();
    bundle
        .write("prediction.json", serde_json::to_vec_pretty(&prediction_json(&prepared)).map_err(at(Stage::Write))?)?;
    if let Some(effects) = &prepared.effects {
        bundle.write(
            "effects.csv",
            effects_csv(effects, &caps.mid_names, &caps.emotion_names).map_err(at(Stage::Effects))?,
        )?;
    }
    bundle.write("explanation.json", serde_json::to_vec_pretty(&explanation).map_err(at(Stage::Write))?)?;
    bundle.write("surrogate.csv", explanation.fit.to_csv())?;
    bundle.write("segments.csv", segments_csv(&prepared.map))?;
    bundle.write("segments.rle", write_rle(&prepared.map))?;
    bundle.write("pos_mask.csv", matrix_csv(&pos.values))?;
    bundle.write("neg_mask.csv", matrix_csv(&neg.values))?;
    for (name, clip) in &audio {
        bundle.write(name, encode_wav_bytes(clip))?;
    }

    let mut notes = Vec::new();
    if explanation.selected.is_empty() {
        notes.push("zero features selected; masked spectrograms are all floor".to_string());
    }
    if !prepared.discrepancies.is_empty() {
        notes.push(format!(
            "{} emotions disagree with the reported linear head beyond 1e-4",
            prepared.discrepancies.len()
        ));
    }
    timings.0.insert(Stage::Write.to_string(), write_start.elapsed().as_secs_f64() * 1e3);
    let report = json!({
        "tool": "midlime",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "input": {
            "sample_rate": prepared.clip.sample_rate,
            "samples": prepared.clip.len(),
            "spectrogram_shape": prepared.db.shape(),
        },
        "target": prepared.target,
        "target_value": explanation.target_value,
        "segment_count": prepared.map.segment_count(),
        "selected_count": explanation.selected.len(),
        "positive_count": explanation.positive_ids.len(),
        "negative_count": explanation.negative_ids.len(),
        "r_squared": explanation.r_squared,
        "notes": notes,
        "timings_ms": timings.0,
        "files": bundle.files,
    });
    bundle.write("report.json", serde_json::to_vec_pretty(&report).map_err(at(Stage::Write))?)?;
    let files = bundle.finish(&config.out_dir)?;

    Ok(ExplanationBundle {
        out_dir: config.out_dir.clone(),
        files,
        target: prepared.target.clone(),
        segment_count: prepared.map.segment_count(),
        explanation,
    })
}

/// Repeats the explanation for every `(sample count, seed)` and reports
/// pairwise Jaccard agreement of the selected sets per sample count.
pub fn run_stability(
    config: &RunConfig,
    seeds: &[u64],
    sample_counts: &[usize],
) -> Result<StabilityReport, PipelineError> {
    if seeds.len() < 2 {
        return Err(PipelineError::config("stability needs at least 2 seeds"));
    }
    if sample_counts.is_empty() {
        return Err(PipelineError::config("stability needs at least one sample count"));
    }
    for &n in sample_counts {
        LimeConfig { n_samples: n, ..config.lime }.validate(1).map_err(|e| PipelineError::config(e.to_string()))?;
    }
    config.validate()?;
    in_pool(config.workers, || {
        let mut timings = Timings::default();
        let mut prepared = prepare(config, &mut timings)?;
        let mut pairs = Vec::new();
        let mut summary = Vec::new();
        for &n_samples in sample_counts {
            let mut selected = Vec::new();
            for &seed in seeds {
                let lime = LimeConfig { n_samples, seed, ..config.lime };
                let e = timings.time(Stage::Explain, || explain(&mut prepared, &lime))?;
                log::info!("n={n_samples} seed={seed}: {} selected", e.selected.len());
                selected.push(e.selected_ids());
            }
            let mut total = 0.0;
            let mut count = 0;
            for i in 0..seeds.len() {
                for j in i + 1..seeds.len() {
                    let jac = jaccard(&selected[i], &selected[j]);
                    total += jac;
                    count += 1;
                    pairs.push(StabilityRow { n_samples, seed_a: seeds[i], seed_b: seeds[j], jaccard: jac });
                }
            }
            summary.push(StabilitySummary {
                n_samples,
                runs: seeds.len(),
                mean_pairwise_jaccard: total / count as f64,
                mean_selected: selected.iter().map(|s| s.len()).sum::<usize>() as f64 / seeds.len() as f64,
            });
        }
        let report = StabilityReport {
            target: prepared.target.clone(),
            segment_count: prepared.map.segment_count(),
            pairs,
            summary,
        };

        let mut bundle = BundleWriter::create(&config.out_dir)?;
        let mut csv = String::from("n_samples,seed_a,seed_b,jaccard\n");
        for r in &report.pairs {
            writeln!(csv, "{},{},{},{}", r.n_samples, r.seed_a, r.seed_b, r.jaccard).expect("string write");
        }
        bundle.write("stability.csv", csv)?;
        let mut csv = String::from("n_samples,runs,mean_pairwise_jaccard,mean_selected\n");
        for s in &report.summary {
            writeln!(csv, "{},{},{},{}", s.n_samples, s.runs, s.mean_pairwise_jaccard, s.mean_selected)
                .expect("string write");
        }
        bundle.write("stability_summary.csv", csv)?;
        let meta = json!({
            "tool": "midlime",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "seeds": seeds,
            "sample_counts": sample_counts,
            "report": report,
            "timings_ms": timings.0,
            "files": bundle.files,
        });
        bundle.write("report.json", serde_json::to_vec_pretty(&meta).map_err(at(Stage::Write))?)?;
        bundle.finish(&config.out_dir)?;
        Ok(report)
    })
}
