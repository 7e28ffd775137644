//! Distance-weighted k-nearest-neighbour classifier used as a stand-in for
//! model training. It shares the RMSD geometry of the similarity matrix.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::metrics::{compute_metrics, Metrics};
use crate::error::{validation, Result};
use crate::similarity::{rmsd, DatasetStore};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyOutcome {
    pub metrics: Metrics,
    /// Set when `k` exceeded the subset size and was clamped.
    pub warning: Option<String>,
}

/// Classifies every test image by a vote of its `k` nearest subset members,
/// each weighted by `exp(−RMSD)`. Neighbour ties break toward the lower
/// parent index; vote ties go to the label whose nearest voter ranks first.
pub fn proxy_evaluate(members: &[usize], store: &DatasetStore, test: &DatasetStore, k: usize) -> Result<ProxyOutcome> {
    if members.is_empty() {
        return Err(validation("proxy evaluation needs a non-empty subset"));
    }
    if k == 0 {
        return Err(validation("k must be at least 1"));
    }
    if store.shape() != test.shape() {
        return Err(validation(format!(
            "test images {:?} are not compatible with training images {:?}",
            test.shape(),
            store.shape()
        )));
    }
    if let Some(&bad) = members.iter().find(|&&i| i >= store.len()) {
        return Err(validation(format!("subset member {bad} out of range")));
    }
    let warning = (k > members.len()).then(|| {
        let msg = format!("k={k} exceeds subset size {}; clamped", members.len());
        log::warn!("{msg}");
        msg
    });
    let k = k.min(members.len());

    let predicted: Vec<&str> = (0..test.len())
        .into_par_iter()
        .map(|t| -> Result<&str> {
            let query = test.image(t);
            let mut dists: Vec<(f64, usize)> =
                members.iter().map(|&i| Ok((rmsd(query, store.image(i))?, i))).collect::<Result<_>>()?;
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
            let mut votes: Vec<(&str, f64)> = Vec::new();
            for &(d, i) in &dists[..k] {
                let label = store.label(i);
                let w = (-d).exp();
                match votes.iter_mut().find(|(l, _)| *l == label) {
                    Some(v) => v.1 += w,
                    None => votes.push((label, w)),
                }
            }
            // `votes` is in order of first appearance, so a strict `>` keeps
            // the earliest-ranked label on ties.
            let mut best = votes[0];
            for &v in &votes[1..] {
                if v.1 > best.1 {
                    best = v;
                }
            }
            Ok(best.0)
        })
        .collect::<Result<_>>()?;

    let actual: Vec<&str> = test.labels();
    Ok(ProxyOutcome { metrics: compute_metrics(&predicted, &actual)?, warning })
}
