//! Mid -> Emotion effects through the linear final layer.
//!
//! With `emotion_i = Σ_j W_ij m_j + b_i`, the effect of mid feature `j` on
//! emotion `i` is `e_ij = W_ij m_j`, and the row sums plus bias reproduce the
//! prediction.

use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

use crate::predictor::{EmotionVector, LinearHead, MidLevelVector, EMOTION_COUNT, MID_COUNT};

/// Reported and recomputed emotions may differ by this much before a
/// discrepancy is recorded.
pub const HEAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum EffectsError {
    #[error("global effects need at least one mid-level vector")]
    EmptyInput,
    #[error("emotion index {index} out of range (have {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected {expected} names, got {actual}")]
    Names { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectsMatrix {
    pub effects: [[f64; MID_COUNT]; EMOTION_COUNT],
    pub weights: [[f64; MID_COUNT]; EMOTION_COUNT],
    pub bias: [f64; EMOTION_COUNT],
    pub mid: MidLevelVector,
}

impl EffectsMatrix {
    /// `Σ_j e_ij + b_i` for every emotion.
    pub fn emotion(&self) -> EmotionVector {
        let mut out = self.bias;
        for (o, row) in out.iter_mut().zip(&self.effects) {
            *o += row.iter().sum::<f64>();
        }
        EmotionVector(out)
    }
}

pub fn instance_effects(mid: &MidLevelVector, head: &LinearHead) -> EffectsMatrix {
    let mut effects = [[0.0; MID_COUNT]; EMOTION_COUNT];
    for (e_row, w_row) in effects.iter_mut().zip(&head.weights) {
        for ((e, w), m) in e_row.iter_mut().zip(w_row).zip(&mid.0) {
            *e = w * m;
        }
    }
    EffectsMatrix { effects, weights: head.weights, bias: head.bias, mid: *mid }
}

/// Largest effect in the row of `emotion`; the lowest mid index wins ties.
pub fn top_effect(effects: &EffectsMatrix, emotion: usize) -> Result<(usize, f64), EffectsError> {
    let row =
        effects.effects.get(emotion).ok_or(EffectsError::IndexOutOfRange { index: emotion, len: EMOTION_COUNT })?;
    let mut best = (0, row[0]);
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (j, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalEffects {
    pub count: usize,
    pub summary: [[EffectSummary; MID_COUNT]; EMOTION_COUNT],
}

/// Per-cell statistics of instance effects; `std` is the population value.
pub fn global_effects(mids: &[MidLevelVector], head: &LinearHead) -> Result<GlobalEffects, EffectsError> {
    if mids.is_empty() {
        return Err(EffectsError::EmptyInput);
    }
    let all: Vec<EffectsMatrix> = mids.iter().map(|m| instance_effects(m, head)).collect();
    let n = all.len() as f64;
    let empty = EffectSummary { mean: 0.0, std: 0.0, min: 0.0, max: 0.0 };
    let mut summary = [[empty; MID_COUNT]; EMOTION_COUNT];
    for (i, row) in summary.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let values = all.iter().map(|e| e.effects[i][j]);
            let mean = values.clone().sum::<f64>() / n;
            let var = values.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            *cell = EffectSummary {
                mean,
                std: var.sqrt(),
                min: values.clone().fold(f64::INFINITY, f64::min),
                max: values.fold(f64::NEG_INFINITY, f64::max),
            };
        }
    }
    Ok(GlobalEffects { count: mids.len(), summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadDiscrepancy {
    pub emotion: usize,
    pub reported: f64,
    pub recomputed: f64,
    pub difference: f64,
}

/// Emotions where the predictor's output disagrees with its own head.
pub fn head_discrepancies(mid: &MidLevelVector, reported: &EmotionVector, head: &LinearHead) -> Vec<HeadDiscrepancy> {
    let recomputed = head.apply(mid);
    (0..EMOTION_COUNT)
        .filter_map(|i| {
            let difference = reported.0[i] - recomputed.0[i];
            (difference.abs() > HEAD_TOLERANCE).then_some(HeadDiscrepancy {
                emotion: i,
                reported: reported.0[i],
                recomputed: recomputed.0[i],
                difference,
            })
        })
        .collect()
}

fn check_names(mid_names: &[String], emotion_names: &[String]) -> Result<(), EffectsError> {
    if mid_names.len() != MID_COUNT {
        return Err(EffectsError::Names { expected: MID_COUNT, actual: mid_names.len() });
    }
    if emotion_names.len() != EMOTION_COUNT {
        return Err(EffectsError::Names { expected: EMOTION_COUNT, actual: emotion_names.len() });
    }
    Ok(())
}

/// `emotion,mid,weight,mid_value,effect`, emotions outermost.
pub fn effects_csv(
    effects: &EffectsMatrix,
    mid_names: &[String],
    emotion_names: &[String],
) -> Result<String, EffectsError> {
    check_names(mid_names, emotion_names)?;
    let mut out = String::from("emotion,mid,weight,mid_value,effect\n");
    for (i, emotion) in emotion_names.iter().enumerate() {
        for (j, mid) in mid_names.iter().enumerate() {
            writeln!(out, "{emotion},{mid},{},{},{}", effects.weights[i][j], effects.mid.0[j], effects.effects[i][j])
                .expect("writing to a String cannot fail");
        }
    }
    Ok(out)
}

/// `emotion,mid,mean,std,min,max`, emotions outermost.
pub fn global_effects_csv(
    global: &GlobalEffects,
    mid_names: &[String],
    emotion_names: &[String],
) -> Result<String, EffectsError> {
    check_names(mid_names, emotion_names)?;
    let mut out = String::from("emotion,mid,mean,std,min,max\n");
    for (i, emotion) in emotion_names.iter().enumerate() {
        for (j, mid) in mid_names.iter().enumerate() {
            let s = &global.summary[i][j];
            writeln!(out, "{emotion},{mid},{},{},{},{}", s.mean, s.std, s.min, s.max)
                .expect("writing to a String cannot fail");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn head_from(seed: u64) -> LinearHead {
        let u = |a: u64, b: u64| crate::rng::uniform(seed, crate::rng::Stream::Fixture, a, b, -1.0, 1.0);
        let mut weights = [[0.0; MID_COUNT]; EMOTION_COUNT];
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                *w = u(i as u64, j as u64);
            }
        }
        let bias = std::array::from_fn(|i| u(100, i as u64));
        LinearHead { weights, bias }
    }

    fn mid_from(seed: u64) -> MidLevelVector {
        MidLevelVector(std::array::from_fn(|j| {
            crate::rng::uniform(seed, crate::rng::Stream::Fixture, 200, j as u64, -2.0, 2.0)
        }))
    }

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn zero_head_gives_bias() {
        let head = LinearHead { weights: [[0.0; MID_COUNT]; EMOTION_COUNT], bias: [0.3; EMOTION_COUNT] };
        let e = instance_effects(&mid_from(1), &head);
        assert!(e.effects.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(e.emotion().0, [0.3; EMOTION_COUNT]);
    }

    #[test]
    fn one_hot_head() {
        let mut weights = [[0.0; MID_COUNT]; EMOTION_COUNT];
        weights[0][0] = 1.0;
        let head = LinearHead { weights, bias: [0.0; EMOTION_COUNT] };
        let mut mid = [0.1; MID_COUNT];
        mid[0] = 0.7;
        let e = instance_effects(&MidLevelVector(mid), &head);
        assert_eq!(e.effects[0][0], 0.7);
        assert_eq!(e.emotion().0[0], 0.7);
        assert_eq!(top_effect(&e, 0).unwrap(), (0, 0.7));
    }

    #[test]
    fn additivity_against_matrix_product() {
        for seed in 0..50 {
            let head = head_from(seed);
            let mid = mid_from(seed + 1000);
            let e = instance_effects(&mid, &head);
            let direct = head.apply(&mid);
            for i in 0..EMOTION_COUNT {
                assert!((e.emotion().0[i] - direct.0[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn top_effect_rules() {
        let mut e = instance_effects(&mid_from(3), &head_from(3));
        e.effects[2] = [0.5; MID_COUNT];
        assert_eq!(top_effect(&e, 2).unwrap().0, 0);
        e.effects[2] = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(top_effect(&e, 2).unwrap(), (4, 1.0));
        assert_eq!(top_effect(&e, 8), Err(EffectsError::IndexOutOfRange { index: 8, len: 8 }));
    }

    #[test]
    fn articulation_drives_energy() {
        // emotion 1 ("energy") dominated by mid 1 ("articulation")
        let mut weights = [[0.1; MID_COUNT]; EMOTION_COUNT];
        weights[1][1] = 0.9;
        let head = LinearHead { weights, bias: [0.0; EMOTION_COUNT] };
        let e = instance_effects(&MidLevelVector([0.5; MID_COUNT]), &head);
        assert_eq!(top_effect(&e, 1).unwrap().0, 1);
    }

    #[test]
    fn global_single_and_symmetric() {
        let head = head_from(4);
        let m = mid_from(5);
        let g = global_effects(&[m], &head).unwrap();
        let e = instance_effects(&m, &head);
        for i in 0..EMOTION_COUNT {
            for j in 0..MID_COUNT {
                assert_eq!(g.summary[i][j].mean, e.effects[i][j]);
                assert_eq!(g.summary[i][j].std, 0.0);
            }
        }
        let neg = MidLevelVector(m.0.map(|v| -v));
        let g = global_effects(&[m, neg], &head).unwrap();
        assert!(g.summary.iter().flatten().all(|s| s.mean.abs() < 1e-15));
        assert_eq!(global_effects(&[], &head), Err(EffectsError::EmptyInput));
    }

    #[test]
    fn global_matches_brute_force() {
        let head = head_from(6);
        let mids: Vec<MidLevelVector> = (0..100).map(|k| mid_from(k + 10)).collect();
        let g = global_effects(&mids, &head).unwrap();
        for i in 0..EMOTION_COUNT {
            for j in 0..MID_COUNT {
                let mut sum = 0.0;
                for m in &mids {
                    sum += head.weights[i][j] * m.0[j];
                }
                assert!((g.summary[i][j].mean - sum / 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn discrepancies_reported() {
        let head = head_from(7);
        let mid = mid_from(8);
        let mut reported = head.apply(&mid);
        assert!(head_discrepancies(&mid, &reported, &head).is_empty());
        reported.0[3] += 1e-3;
        let d = head_discrepancies(&mid, &reported, &head);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].emotion, 3);
    }

    #[test]
    fn csv_layout() {
        let e = instance_effects(&mid_from(1), &head_from(1));
        let csv = effects_csv(&e, &names("m", 7), &names("e", 8)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "emotion,mid,weight,mid_value,effect");
        assert_eq!(lines.len(), 1 + 56);
        assert!(lines[1].starts_with("e0,m0,"));
        assert!(effects_csv(&e, &names("m", 6), &names("e", 8)).is_err());
        let g = global_effects(&[e.mid], &head_from(1)).unwrap();
        let csv = global_effects_csv(&g, &names("m", 7), &names("e", 8)).unwrap();
        assert!(csv.starts_with("emotion,mid,mean,std,min,max\ne0,m0,"));
    }

    proptest! {
        #[test]
        fn scale_covariance(seed in 0u64..500, j in 0usize..MID_COUNT, c in -3.0f64..3.0) {
            let head = head_from(seed);
            let mid = mid_from(seed + 1);
            let mut scaled = mid;
            scaled.0[j] *= c;
            let a = instance_effects(&mid, &head);
            let b = instance_effects(&scaled, &head);
            for i in 0..EMOTION_COUNT {
                for k in 0..MID_COUNT {
                    let expect = if k == j { a.effects[i][k] * c } else { a.effects[i][k] };
                    prop_assert!((b.effects[i][k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
                }
            }
        }

        #[test]
        fn top_effect_ignores_bias_shift(seed in 0u64..500, shift in -5.0f64..5.0, i in 0usize..EMOTION_COUNT) {
            let mut head = head_from(seed);
            let mid = mid_from(seed + 2);
            let before = top_effect(&instance_effects(&mid, &head), i).unwrap();
            for b in head.bias.iter_mut() {
                *b += shift;
            }
            prop_assert_eq!(before, top_effect(&instance_effects(&mid, &head), i).unwrap());
        }

        #[test]
        fn additivity(seed in 0u64..10_000) {
            let head = head_from(seed);
            let mid = mid_from(seed ^ 0x5555);
            let e = instance_effects(&mid, &head);
            let direct = head.apply(&mid);
            for i in 0..EMOTION_COUNT {
                prop_assert!((e.emotion().0[i] - direct.0[i]).abs() <= 1e-9);
            }
        }
    }
}
