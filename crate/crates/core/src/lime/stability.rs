use serde::Serialize;
use std::collections::BTreeSet;

use super::{LimeError, LimeExplanation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairJaccard {
    pub first: usize,
    pub second: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityScore {
    pub mean_pairwise_jaccard: f64,
    pub per_pair: Vec<PairJaccard>,
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets agree perfectly.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn stability_score(explanations: &[LimeExplanation]) -> Result<StabilityScore, LimeError> {
    if explanations.len() < 2 {
        return Err(LimeError::Comparability(format!("need at least 2 explanations, got {}", explanations.len())));
    }
    let target = &explanations[0].target;
    if let Some(other) = explanations.iter().find(|e| &e.target != target) {
        return Err(LimeError::Comparability(format!("targets differ: {target} vs {}", other.target)));
    }
    let ids: Vec<Vec<usize>> = explanations.iter().map(|e| e.selected_ids()).collect();
    let mut per_pair = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            per_pair.push(PairJaccard { first: i, second: j, jaccard: jaccard(&ids[i], &ids[j]) });
        }
    }
    let mean_pairwise_jaccard = per_pair.iter().map(|p| p.jaccard).sum::<f64>() / per_pair.len() as f64;
    Ok(StabilityScore { mean_pairwise_jaccard, per_pair })
}
