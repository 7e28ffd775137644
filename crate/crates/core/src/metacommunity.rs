//! Class-partitioned diversity.
//!
//! Images are the elements and labeled classes are the subcommunities. For
//! class `j` with weight `w_j = Σ_{i∈j} p_i`, let `p^(j)` be `p` restricted to
//! the class (zeros elsewhere) and `p̄^(j) = p^(j) / w_j`. With `M` the power
//! mean of order `1 − q` weighted by `p̄^(j)` over the class members:
//!
//! * `α_j = M(1 / (Z p^(j))_i)` (raw alpha: effective image-class pairs)
//! * `γ_j = M(1 / (Z p)_i)`
//! * `ρ̄_j = M((Z p)_i / (Z p̄^(j))_i)` and `β̄_j = 1 / ρ̄_j`
//!
//! Dataset-level `A`, `R`, `G` are `w`-weighted power means of the same order
//! over classes; `B = 1 / R`. Class balance `CB` is the Hill number of `w`.
//! At `q = 1` these satisfy `A = CB · G · R` exactly.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::diversity::{hill_diversity, ordinariness, weighted_power_mean, Order, RelativeAbundance, SimilarityMatrix};
use crate::error::{validation, Result};
use crate::numeric::pairwise_sum_by;

/// A labeled dataset: abundances, similarities and a flat class assignment.
#[derive(Debug, Clone)]
pub struct Metacommunity {
    p: RelativeAbundance,
    z: SimilarityMatrix,
    class_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl Metacommunity {
    /// Builds a metacommunity from per-element class indices `0..num_classes`.
    pub fn new(p: RelativeAbundance, z: SimilarityMatrix, class_of: Vec<usize>, num_classes: usize) -> Result<Self> {
        let labels = (0..num_classes).map(|c| c.to_string()).collect();
        Self::with_labels(p, z, class_of, labels)
    }

    /// Builds a metacommunity from string labels; classes are ordered by label.
    pub fn from_labels<S: AsRef<str>>(p: RelativeAbundance, z: SimilarityMatrix, labels: &[S]) -> Result<Self> {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        for l in labels {
            index.insert(l.as_ref(), 0);
        }
        for (k, v) in index.values_mut().enumerate() {
            *v = k;
        }
        let class_of = labels.iter().map(|l| index[l.as_ref()]).collect();
        let names = index.keys().map(|s| s.to_string()).collect();
        Self::with_labels(p, z, class_of, names)
    }

    fn with_labels(
        p: RelativeAbundance,
        z: SimilarityMatrix,
        class_of: Vec<usize>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = p.len();
        if z.n() != n || class_of.len() != n {
            return Err(validation(format!(
                "metacommunity dimensions disagree: {} abundances, {}x{} similarities, {} labels",
                n,
                z.n(),
                z.n(),
                class_of.len()
            )));
        }
        let m = labels.len();
        if m == 0 {
            return Err(validation("metacommunity needs at least one class"));
        }
        let mut members = vec![Vec::new(); m];
        for (i, &c) in class_of.iter().enumerate() {
            if c >= m {
                return Err(validation(format!("element {i} has unknown class index {c}")));
            }
            members[c].push(i);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(validation(format!("class `{}` has no elements", labels[j])));
        }
        let pv = p.as_slice();
        if let Some(j) = members.iter().position(|ms| ms.iter().all(|&i| pv[i] == 0.0)) {
            return Err(validation(format!("class `{}` has zero total abundance", labels[j])));
        }
        Ok(Self { p, z, class_of, members, labels })
    }

    pub fn abundance(&self) -> &RelativeAbundance {
        &self.p
    }

    pub fn similarity(&self) -> &SimilarityMatrix {
        &self.z
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    /// Element indices of each class, ascending.
    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }
}

/// `w_j = Σ_{i∈j} p_i` for every class.
pub fn class_weights(meta: &Metacommunity) -> Vec<f64> {
    let p = meta.p.as_slice();
    meta.members.iter().map(|ms| pairwise_sum_by(ms.len(), |k| p[ms[k]])).collect()
}

/// Effective number of classes: the Hill number of the class weights.
pub fn class_balance(weights: &[f64], q: Order) -> Result<f64> {
    let w = RelativeAbundance::new(weights.to_vec())?;
    Ok(hill_diversity(&w, q))
}

/// Per-class measures at one order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMeasures {
    pub q: Order,
    pub weight: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Dataset-level measures at one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetMeasures {
    pub q: Order,
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub r: f64,
    pub cb: f64,
}

/// Per-class α, ρ̄, β̄ and γ at order `q`.
pub fn per_class_measures(meta: &Metacommunity, q: Order) -> Result<ClassMeasures> {
    let zp = ordinariness(&meta.z, &meta.p)?;
    per_class_with_ordinariness(meta, &zp, q)
}

fn per_class_with_ordinariness(meta: &Metacommunity, zp: &[f64], q: Order) -> Result<ClassMeasures> {
    let weight = class_weights(meta);
    let t = q.power_mean_order();
    let p = meta.p.as_slice();

    let per_class: Vec<(f64, f64, f64)> = meta
        .members
        .par_iter()
        .zip(weight.par_iter())
        .map(|(ms, &w)| {
            let pbar: Vec<f64> = ms.iter().map(|&i| p[i] / w).collect();
            // (Z p^(j))_i for i in the class.
            let zpj: Vec<f64> = ms
                .iter()
                .map(|&i| {
                    let row = meta.z.row(i);
                    pairwise_sum_by(ms.len(), |k| row[ms[k]] * p[ms[k]])
                })
                .collect();
            let inv_zpj: Vec<f64> = zpj.iter().map(|v| 1.0 / v).collect();
            let inv_zp: Vec<f64> = ms.iter().map(|&i| 1.0 / zp[i]).collect();
            let repr: Vec<f64> = ms.iter().zip(&zpj).map(|(&i, &v)| zp[i] / (v / w)).collect();
            let alpha = weighted_power_mean(&inv_zpj, &pbar, t)?;
            let gamma = weighted_power_mean(&inv_zp, &pbar, t)?;
            let rho = weighted_power_mean(&repr, &pbar, t)?;
            Ok((alpha, rho, gamma))
        })
        .collect::<Result<_>>()?;

    let alpha: Vec<f64> = per_class.iter().map(|v| v.0).collect();
    let rho_bar: Vec<f64> = per_class.iter().map(|v| v.1).collect();
    let gamma: Vec<f64> = per_class.iter().map(|v| v.2).collect();
    let beta_bar = rho_bar.iter().map(|r| 1.0 / r).collect();
    Ok(ClassMeasures { q, weight, alpha, rho_bar, beta_bar, gamma })
}

/// Dataset-level A, B, G, R and class balance at order `q`.
pub fn aggregate_measures(meta: &Metacommunity, q: Order) -> Result<DatasetMeasures> {
    let classes = per_class_measures(meta, q)?;
    aggregate_from_classes(&classes)
}

fn aggregate_from_classes(c: &ClassMeasures) -> Result<DatasetMeasures> {
    let t = c.q.power_mean_order();
    let a = weighted_power_mean(&c.alpha, &c.weight, t)?;
    let r = weighted_power_mean(&c.rho_bar, &c.weight, t)?;
    let g = weighted_power_mean(&c.gamma, &c.weight, t)?;
    let cb = class_balance(&c.weight, c.q)?;
    Ok(DatasetMeasures { q: c.q, a, b: 1.0 / r, g, r, cb })
}

/// Per-class and dataset-level measures at each order, sharing one `Zp`.
pub fn measures_at(meta: &Metacommunity, qs: &[Order]) -> Result<Vec<(ClassMeasures, DatasetMeasures)>> {
    let zp = ordinariness(&meta.z, &meta.p)?;
    qs.iter()
        .map(|&q| {
            let c = per_class_with_ordinariness(meta, &zp, q)?;
            let d = aggregate_from_classes(&c)?;
            Ok((c, d))
        })
        .collect()
}

/// Image size, color depth and class count of the parent dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystematicParams {
    pub image_size: f64,
    pub color_depth: f64,
    pub num_classes: f64,
}

/// Canonical names of the 30 quality features, in column order.
pub const FEATURE_NAMES: [&str; 30] = [
    "A_q0",
    "A_q1",
    "A_qinf",
    "R_q0",
    "R_q1",
    "R_qinf",
    "G_q0",
    "G_q1",
    "G_qinf",
    "min_alpha_q0",
    "min_alpha_q1",
    "min_rho_q0",
    "min_rho_q1",
    "min_gamma_q0",
    "min_gamma_q1",
    "max_alpha_q0",
    "max_alpha_q1",
    "max_alpha_qinf",
    "max_rho_q0",
    "max_rho_q1",
    "max_rho_qinf",
    "max_gamma_q0",
    "max_gamma_q1",
    "max_gamma_qinf",
    "CB_q1",
    "CB_qinf",
    "size",
    "image_size",
    "color_depth",
    "num_classes",
];

/// The first 27 features are diversity-related; the last three are systematic.
pub const NUM_DIVERSITY_FEATURES: usize = 27;

/// The 30 named quality indicators of one dataset or subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    values: [f64; 30],
}

impl FeatureVector {
    pub fn from_values(values: [f64; 30]) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(validation(format!(
                "feature `{}` must be finite and positive, got {}",
                FEATURE_NAMES[k], values[k]
            )));
        }
        Ok(Self { values })
    }

    pub fn names() -> &'static [&'static str; 30] {
        &FEATURE_NAMES
    }

    pub fn values(&self) -> &[f64; 30] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        FEATURE_NAMES.iter().copied().zip(self.values.iter().copied())
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Assembles the 30-feature quality vector.
pub fn feature_vector(meta: &Metacommunity, systematic: SystematicParams) -> Result<FeatureVector> {
    if !(systematic.image_size > 0.0 && systematic.color_depth > 0.0 && systematic.num_classes > 0.0) {
        return Err(validation("systematic parameters must be positive"));
    }
    let all = measures_at(meta, &[Order::ZERO, Order::ONE, Order::INFINITY])?;
    let (c0, d0) = &all[0];
    let (c1, d1) = &all[1];
    let (ci, di) = &all[2];

    let (min_a0, max_a0) = extrema(&c0.alpha);
    let (min_a1, max_a1) = extrema(&c1.alpha);
    let (_, max_ai) = extrema(&ci.alpha);
    let (min_r0, max_r0) = extrema(&c0.rho_bar);
    let (min_r1, max_r1) = extrema(&c1.rho_bar);
    let (_, max_ri) = extrema(&ci.rho_bar);
    let (min_g0, max_g0) = extrema(&c0.gamma);
    let (min_g1, max_g1) = extrema(&c1.gamma);
    let (_, max_gi) = extrema(&ci.gamma);

    FeatureVector::from_values([
        d0.a,
        d1.a,
        di.a,
        d0.r,
        d1.r,
        di.r,
        d0.g,
        d1.g,
        di.g,
        min_a0,
        min_a1,
        min_r0,
        min_r1,
        min_g0,
        min_g1,
        max_a0,
        max_a1,
        max_ai,
        max_r0,
        max_r1,
        max_ri,
        max_g0,
        max_g1,
        max_gi,
        d1.cb,
        di.cb,
        meta.len() as f64,
        systematic.image_size,
        systematic.color_depth,
        systematic.num_classes,
    ])
}
