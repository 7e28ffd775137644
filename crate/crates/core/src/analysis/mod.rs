//! Performance metrics, the k-NN proxy classifier, and regression of
//! performance on log-transformed quality features.

mod metrics;
mod proxy;
mod regression;
mod tables;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

pub use metrics::{compute_metrics, Metrics};
pub use proxy::{proxy_evaluate, ProxyOutcome, DEFAULT_K};
pub use regression::{adjusted_r2, fit_linear, LinearFit};
pub use tables::{FeatureTable, PerformanceRow, PerformanceTable};

use crate::error::{validation, Error, Result};
use crate::metacommunity::{FEATURE_NAMES, NUM_DIVERSITY_FEATURES};

/// Largest feature-set size the enumeration accepts.
pub const MAX_ARITY: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub metric: String,
    pub features: Vec<String>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub intercept: f64,
    /// Slopes by predictor name, including the systematic columns.
    pub coefficients: Vec<(String, f64)>,
    pub n: usize,
    /// Effective predictor count: the rank of the design without intercept.
    pub k: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Grouped by metric (`acc`, `bacc`, then `auc` if present), each group
    /// sorted by descending adjusted R².
    pub reports: Vec<RegressionReport>,
    pub metrics: Vec<String>,
    pub joined_rows: usize,
    pub join_warning: Option<String>,
}

struct Joined {
    ids: Vec<String>,
    /// `ln` of each of the 30 features, column-major.
    log_features: Vec<Vec<f64>>,
    targets: Vec<(String, Vec<f64>)>,
    warning: Option<String>,
}

fn join(features: &FeatureTable, perf: &PerformanceTable) -> Result<Joined> {
    let by_id: HashMap<&str, usize> = perf.rows.iter().enumerate().map(|(k, r)| (r.subset_id.as_str(), k)).collect();
    let mut ids = Vec::new();
    let mut log_features = vec![Vec::new(); FEATURE_NAMES.len()];
    let mut acc = Vec::new();
    let mut bacc = Vec::new();
    let mut auc = Vec::new();
    for (id, f) in &features.rows {
        let Some(&k) = by_id.get(id.as_str()) else { continue };
        let row = &perf.rows[k];
        ids.push(id.clone());
        for (col, v) in log_features.iter_mut().zip(f.values()) {
            col.push(v.ln());
        }
        acc.push(row.acc);
        bacc.push(row.bacc);
        auc.push(row.auc);
    }
    if ids.is_empty() {
        return Err(validation("feature and performance tables share no subset ids"));
    }
    let warning = (ids.len() != features.len() || ids.len() != perf.rows.len()).then(|| {
        format!(
            "inner join kept {} rows ({} feature rows, {} performance rows)",
            ids.len(),
            features.len(),
            perf.rows.len()
        )
    });
    let mut targets = vec![("acc".to_string(), acc), ("bacc".to_string(), bacc)];
    if auc.iter().all(Option::is_some) {
        targets.push(("auc".to_string(), auc.into_iter().flatten().collect()));
    }
    Ok(Joined { ids, log_features, targets, warning })
}

/// All feature sets of size `1..=max_arity` over the 27 diversity-related
/// features, as ascending index tuples in lexicographic order.
pub fn feature_sets(max_arity: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = NUM_DIVERSITY_FEATURES;
    for arity in 1..=max_arity.min(n) {
        let mut idx: Vec<usize> = (0..arity).collect();
        loop {
            out.push(idx.clone());
            let Some(pos) = (0..arity).rev().find(|&i| idx[i] < n - arity + i) else { break };
            idx[pos] += 1;
            for i in pos + 1..arity {
                idx[i] = idx[i - 1] + 1;
            }
        }
    }
    out
}

fn regress_set(joined: &Joined, metric: &str, y: &[f64], set: &[usize]) -> Result<RegressionReport> {
    let systematic = NUM_DIVERSITY_FEATURES..FEATURE_NAMES.len();
    let cols: Vec<usize> = set.iter().copied().chain(systematic).collect();
    let design: Vec<Vec<f64>> = cols.iter().map(|&c| joined.log_features[c].clone()).collect();
    let fit = fit_linear(&design, y).map_err(|e| match e {
        Error::UndefinedR2 { .. } => Error::UndefinedR2 { metric: metric.to_string() },
        other => other,
    })?;
    let n = joined.ids.len();
    let adjusted = adjusted_r2(fit.r2, n, fit.rank)?;
    let warnings = fit
        .warnings
        .iter()
        .map(|w| {
            // Name the column instead of its position.
            let mut w = w.clone();
            for (k, &c) in cols.iter().enumerate().rev() {
                w = w.replace(&format!("column {k} "), &format!("`{}` ", FEATURE_NAMES[c]));
            }
            w
        })
        .collect();
    Ok(RegressionReport {
        metric: metric.to_string(),
        features: set.iter().map(|&c| FEATURE_NAMES[c].to_string()).collect(),
        r2: fit.r2,
        adjusted_r2: adjusted,
        intercept: fit.intercept,
        coefficients: cols.iter().map(|&c| FEATURE_NAMES[c].to_string()).zip(fit.coefficients).collect(),
        n,
        k: fit.rank,
        warnings,
    })
}

fn sort_reports(reports: &mut [RegressionReport]) {
    // Adjusted R² values equal within 1e-12 fall back to name order.
    reports.sort_by(|a, b| {
        let ka = (a.adjusted_r2 * 1e12).round() as i64;
        let kb = (b.adjusted_r2 * 1e12).round() as i64;
        kb.cmp(&ka).then_with(|| a.features.cmp(&b.features))
    });
}

/// Regresses every metric on every feature set of size `1..=max_arity`
/// (plus the three systematic features) and ranks the results.
pub fn enumerate_feature_sets(
    features: &FeatureTable,
    perf: &PerformanceTable,
    max_arity: usize,
) -> Result<Enumeration> {
    if !(1..=MAX_ARITY).contains(&max_arity) {
        return Err(validation(format!("max arity must be in 1..={MAX_ARITY}, got {max_arity}")));
    }
    let joined = join(features, perf)?;
    if let Some(w) = &joined.warning {
        log::warn!("{w}");
    }
    let sets = feature_sets(max_arity);
    let mut reports = Vec::with_capacity(sets.len() * joined.targets.len());
    for (metric, y) in &joined.targets {
        let mut group: Vec<RegressionReport> =
            sets.par_iter().map(|set| regress_set(&joined, metric, y, set)).collect::<Result<_>>()?;
        sort_reports(&mut group);
        reports.extend(group);
    }
    Ok(Enumeration {
        reports,
        metrics: joined.targets.iter().map(|t| t.0.clone()).collect(),
        joined_rows: joined.ids.len(),
        join_warning: joined.warning,
    })
}

/// Regresses each metric on one named feature set plus the systematic features.
pub fn regress_feature_set(
    features: &FeatureTable,
    perf: &PerformanceTable,
    names: &[&str],
) -> Result<Vec<RegressionReport>> {
    let set: Vec<usize> = names
        .iter()
        .map(|name| {
            FEATURE_NAMES[..NUM_DIVERSITY_FEATURES]
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| validation(format!("`{name}` is not a diversity-related feature")))
        })
        .collect::<Result<_>>()?;
    let joined = join(features, perf)?;
    joined.targets.iter().map(|(metric, y)| regress_set(&joined, metric, y, &set)).collect()
}
