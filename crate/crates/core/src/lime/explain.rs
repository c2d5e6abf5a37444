use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_surrogate, proximity_weight, sample_masks, LimeConfig, LimeError, MaskApplier, SurrogateFit};
use crate::audio::Spectrogram;
use crate::predictor::PredictorError;
use crate::segmentation::SegmentMap;

/// Single-output model queried in batches.
pub trait BlackBox {
    fn predict_batch(&mut self, batch: &[Spectrogram]) -> Result<Vec<f64>, PredictorError>;
}

impl<F> BlackBox for F
where
    F: FnMut(&[Spectrogram]) -> Result<Vec<f64>, PredictorError>,
{
    fn predict_batch(&mut self, batch: &[Spectrogram]) -> Result<Vec<f64>, PredictorError> {
        self(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub segment: usize,
    pub weight: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub target: String,
    pub target_value: f64,
    pub prediction_at_ones: f64,
    pub selected: Vec<SelectedFeature>,
    pub positive_ids: Vec<usize>,
    pub negative_ids: Vec<usize>,
    pub r_squared: f64,
    pub config_echo: LimeConfig,
    #[serde(skip)]
    pub fit: SurrogateFit,
}

impl LimeExplanation {
    pub fn selected_ids(&self) -> Vec<usize> {
        self.selected.iter().map(|f| f.segment).collect()
    }
}

/// Segments with `p / |w| <= ratio_threshold`, strongest first.
pub fn select_features(fit: &SurrogateFit, ratio_threshold: f64) -> Vec<SelectedFeature> {
    let mut out: Vec<SelectedFeature> = fit
        .weights
        .iter()
        .zip(&fit.p_values)
        .enumerate()
        .filter(|(_, (&w, &p))| w != 0.0 && p / w.abs() <= ratio_threshold)
        .map(|(segment, (&weight, &p_value))| SelectedFeature { segment, weight, p_value })
        .collect();
    out.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.segment.cmp(&b.segment)));
    out
}

fn query<B: BlackBox + ?Sized>(
    black_box: &mut B,
    batch: &[Spectrogram],
    first_row: usize,
) -> Result<Vec<f64>, LimeError> {
    let values = black_box.predict_batch(batch).map_err(|source| {
        // item-level errors carry their batch index
        let row = match &source {
            PredictorError::PredictionValue { index, .. } => first_row + index,
            _ => first_row,
        };
        LimeError::Predictor { row, source }
    })?;
    if values.len() != batch.len() {
        return Err(LimeError::Predictor {
            row: first_row,
            source: PredictorError::Transport(format!("{} predictions for a batch of {}", values.len(), batch.len())),
        });
    }
    if let Some((i, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(LimeError::NonFinite { row: first_row + i, value });
    }
    Ok(values)
}

pub fn explain_instance<B: BlackBox + ?Sized>(
    black_box: &mut B,
    target: &str,
    spec: &Spectrogram,
    map: &SegmentMap,
    config: &LimeConfig,
) -> Result<LimeExplanation, LimeError> {
    let n_segments = map.segment_count();
    config.validate(n_segments)?;
    let applier = MaskApplier::new(spec, map, config.fill)?;
    let masks = sample_masks(n_segments, config)?;
    let target_value = query(black_box, std::slice::from_ref(spec), 0)?[0];

    let n = config.n_samples;
    let mut targets = Vec::with_capacity(n);
    for start in (0..n).step_by(config.batch_size) {
        let end = (start + config.batch_size).min(n);
        let batch = (start..end)
            .into_par_iter()
            .map(|r| applier.apply(masks.row(r).as_slice().expect("rows are contiguous")))
            .collect::<Result<Vec<_>, _>>()?;
        targets.extend(query(black_box, &batch, start)?);
        log::debug!("queried {end}/{n} perturbations");
    }

    let weights: Vec<f64> = (0..n)
        .map(|r| proximity_weight(masks.row(r).as_slice().expect("rows are contiguous"), config.kernel_width))
        .collect();
    let fit = fit_surrogate(&masks, &targets, &weights, config.ridge_alpha)?;
    let selected = select_features(&fit, config.ratio_threshold);
    let positive_ids = selected.iter().filter(|f| f.weight > 0.0).map(|f| f.segment).collect();
    let negative_ids = selected.iter().filter(|f| f.weight < 0.0).map(|f| f.segment).collect();
    Ok(LimeExplanation {
        target: target.to_string(),
        target_value,
        prediction_at_ones: targets[0],
        selected,
        positive_ids,
        negative_ids,
        r_squared: fit.r_squared,
        config_echo: *config,
        fit,
    })
}
