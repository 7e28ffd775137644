use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{validation, Result};

/// Accuracy (micro-averaged recall) and balanced accuracy (macro recall).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub acc: f64,
    pub bacc: f64,
}

/// BACC averages per-class recall over the classes present in `actual`.
pub fn compute_metrics<L: Ord>(predicted: &[L], actual: &[L]) -> Result<Metrics> {
    if actual.is_empty() {
        return Err(validation("metrics need at least one label"));
    }
    if predicted.len() != actual.len() {
        return Err(validation(format!("{} predictions for {} labels", predicted.len(), actual.len())));
    }
    let mut per_class: BTreeMap<&L, (usize, usize)> = BTreeMap::new();
    let mut correct = 0usize;
    for (p, a) in predicted.iter().zip(actual) {
        let e = per_class.entry(a).or_default();
        e.1 += 1;
        if p == a {
            e.0 += 1;
            correct += 1;
        }
    }
    let acc = correct as f64 / actual.len() as f64;
    let recall_sum: f64 = per_class.values().map(|&(hit, tot)| hit as f64 / tot as f64).sum();
    Ok(Metrics { acc, bacc: recall_sum / per_class.len() as f64 })
}
