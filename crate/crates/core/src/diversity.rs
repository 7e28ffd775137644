//! Hill numbers, similarity-sensitive diversities and weighted power means.
//!
//! All diversities are returned in effective-number form; the matching
//! Rényi entropy (natural log) is `ln D`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_by};

/// Tolerance on `Σ p_i = 1` accepted by [`RelativeAbundance::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Orders above this are indistinguishable from `q = ∞` in double precision.
pub const MAX_FINITE_ORDER: f64 = 1e6;

/// Half-width of the window around `q = 1` that uses the Shannon limit.
pub const SHANNON_WINDOW: f64 = 1e-9;

/// Normalized frequency vector over unique elements.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeAbundance(Vec<f64>);

impl RelativeAbundance {
    /// Validates a probability vector. Entries must be finite and
    /// non-negative, at least one positive, and sum to one within
    /// [`NORMALIZATION_TOL`]. The accepted vector is renormalized.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_entries(&values)?;
        let total = pairwise_sum(&values);
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(validation(format!("relative abundances sum to {total}, expected 1")));
        }
        Ok(Self(values.into_iter().map(|v| v / total).collect()))
    }

    /// Normalizes non-negative counts (or weights) into relative abundances.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        check_entries(counts)?;
        let total = pairwise_sum(counts);
        Ok(Self(counts.iter().map(|c| c / total).collect()))
    }

    /// Uniform abundance over `n` elements.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(validation("abundance vector must be non-empty"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of elements with positive abundance.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.0).count()
    }

    /// Reorders entries: element `i` of the result is `self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&i| self.0[i]).collect())
    }
}

fn check_entries(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(validation("abundance vector must be non-empty"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(validation(format!("abundances must be finite and non-negative, found {bad}")));
    }
    if !values.iter().any(|&v| v > 0.0) {
        return Err(validation("at least one abundance must be positive"));
    }
    Ok(())
}

/// Symmetric, unit-diagonal matrix of pairwise similarities in `[0, 1]`,
/// stored densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps a dense row-major buffer after checking every invariant.
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(validation("similarity matrix must be non-empty"));
        }
        if entries.len() != n * n {
            return Err(validation(format!("similarity buffer has {} entries, expected {}", entries.len(), n * n)));
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return Err(validation(format!("diagonal entry ({i},{i}) is {}, expected 1", entries[i * n + i])));
            }
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                if !(0.0..=1.0).contains(&a) {
                    return Err(validation(format!("similarity ({i},{j}) = {a} outside [0, 1]")));
                }
                if a != entries[j * n + i] {
                    return Err(validation(format!("similarity matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(validation("similarity rows must form a square matrix"));
        }
        Self::from_dense(n, rows.into_iter().flatten().collect())
    }

    /// Builds a matrix from a function of the upper triangle (`i < j`),
    /// mirroring each value so symmetry holds exactly.
    pub fn from_upper_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        let mut entries = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::from_dense(n, entries)
    }

    pub(crate) fn from_dense_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, entries }
    }

    /// The identity matrix: every element completely distinct.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// The all-ones matrix: every element identical.
    pub fn ones(n: usize) -> Self {
        Self { n, entries: vec![1.0; n * n] }
    }

    /// Block matrix with `Z_ij = 1` when `groups[i] == groups[j]`, else 0.
    pub fn block(groups: &[usize]) -> Self {
        let n = groups.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if groups[i] == groups[j] {
                    entries[i * n + j] = 1.0;
                }
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(validation("submatrix needs at least one index"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(validation(format!("index {bad} out of range for {}x{} matrix", self.n, self.n)));
        }
        let k = indices.len();
        let mut entries = Vec::with_capacity(k * k);
        for &i in indices {
            let row = self.row(i);
            entries.extend(indices.iter().map(|&j| row[j]));
        }
        Ok(Self { n: k, entries })
    }
}

/// Viewpoint parameter `q ∈ [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Order(f64);

impl Order {
    pub const ZERO: Order = Order(0.0);
    pub const ONE: Order = Order(1.0);
    pub const TWO: Order = Order(2.0);
    pub const INFINITY: Order = Order(f64::INFINITY);

    /// Orders above [`MAX_FINITE_ORDER`] collapse to `∞`.
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 0.0 {
            return Err(Error::Domain(format!("order q must be in [0, ∞], got {q}")));
        }
        if q > MAX_FINITE_ORDER {
            return Ok(Self::INFINITY);
        }
        Ok(Self(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// True inside the window where the `q → 1` limit formula is used.
    pub fn is_shannon(self) -> bool {
        (self.0 - 1.0).abs() < SHANNON_WINDOW
    }

    /// The power-mean order `1 − q` paired with this viewpoint.
    pub fn power_mean_order(self) -> f64 {
        if self.is_infinite() {
            f64::NEG_INFINITY
        } else if self.is_shannon() {
            0.0
        } else {
            1.0 - self.0
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Self::INFINITY),
            other => {
                let q: f64 = other.parse().map_err(|_| Error::Domain(format!("cannot parse order `{s}`")))?;
                Self::new(q)
            }
        }
    }
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => Order::new(q).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Weighted power mean `(Σ w_i x_i^t)^(1/t)` over `{i : w_i > 0}`.
///
/// `t = 0` gives the weighted geometric mean and `t = ±∞` the max/min over
/// the support. `t` within [`SHANNON_WINDOW`] of zero is treated as zero.
pub fn power_mean(values: &[f64], weights: &RelativeAbundance, t: f64) -> Result<f64> {
    weighted_power_mean(values, weights.as_slice(), t)
}

/// As [`power_mean`], with weights that are already known to be normalized.
pub(crate) fn weighted_power_mean(values: &[f64], weights: &[f64], t: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(validation(format!("power mean: {} values but {} weights", values.len(), weights.len())));
    }
    if t.is_nan() {
        return Err(Error::Domain("power mean order is NaN".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&x, &w) in values.iter().zip(weights) {
        if w > 0.0 {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!(
                    "power mean needs positive finite values on the support, found {x}"
                )));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if lo.is_infinite() {
        return Err(validation("power mean weights have empty support"));
    }
    if t == f64::INFINITY {
        return Ok(hi);
    }
    if t == f64::NEG_INFINITY {
        return Ok(lo);
    }
    let n = values.len();
    if t.abs() < SHANNON_WINDOW {
        let log_mean = pairwise_sum_by(n, |i| if weights[i] > 0.0 { weights[i] * values[i].ln() } else { 0.0 });
        return Ok(log_mean.exp());
    }
    // Scale by the extreme that keeps every ratio^t in (0, 1], so the sum
    // neither overflows nor underflows to zero for large |t|.
    let scale = if t > 0.0 { hi } else { lo };
    let sum = pairwise_sum_by(n, |i| if weights[i] > 0.0 { weights[i] * (values[i] / scale).powf(t) } else { 0.0 });
    Ok(scale * sum.powf(1.0 / t))
}

/// Hill number of order `q`: the similarity-insensitive effective number of
/// elements, `(Σ p_i^q)^(1/(1−q))` over the support.
pub fn hill_diversity(p: &RelativeAbundance, q: Order) -> f64 {
    let p = p.as_slice();
    let inv: Vec<f64> = p.iter().map(|&x| if x > 0.0 { 1.0 / x } else { 0.0 }).collect();
    weighted_power_mean(&inv, p, q.power_mean_order()).expect("reciprocal abundances are positive on the support")
}

/// Ordinariness `(Zp)_i = Σ_j Z_ij p_j` of every element.
pub fn ordinariness(z: &SimilarityMatrix, p: &RelativeAbundance) -> Result<Vec<f64>> {
    check_dims(z, p)?;
    let p = p.as_slice();
    Ok((0..z.n())
        .map(|i| {
            let row = z.row(i);
            pairwise_sum_by(row.len(), |j| row[j] * p[j])
        })
        .collect())
}

/// Similarity-sensitive diversity of order `q`,
/// `(Σ_i p_i (Zp)_i^(q−1))^(1/(1−q))` over the support.
pub fn similarity_diversity(z: &SimilarityMatrix, p: &RelativeAbundance, q: Order) -> Result<f64> {
    let zp = ordinariness(z, p)?;
    diversity_from_ordinariness(p, &zp, q)
}

/// Diversity given precomputed ordinariness values.
pub fn diversity_from_ordinariness(p: &RelativeAbundance, zp: &[f64], q: Order) -> Result<f64> {
    let inv: Vec<f64> = zp.iter().zip(p.as_slice()).map(|(&o, &w)| if w > 0.0 { 1.0 / o } else { 0.0 }).collect();
    weighted_power_mean(&inv, p.as_slice(), q.power_mean_order())
}

/// Similarity-sensitive diversity at each order in `qs` (ascending).
pub fn diversity_profile(z: &SimilarityMatrix, p: &RelativeAbundance, qs: &[Order]) -> Result<Vec<(Order, f64)>> {
    if qs.is_empty() {
        return Err(validation("diversity profile needs at least one order"));
    }
    if qs.windows(2).any(|w| w[0] > w[1]) {
        return Err(validation("diversity profile orders must be sorted ascending"));
    }
    let zp = ordinariness(z, p)?;
    qs.iter().map(|&q| Ok((q, diversity_from_ordinariness(p, &zp, q)?))).collect()
}

fn check_dims(z: &SimilarityMatrix, p: &RelativeAbundance) -> Result<()> {
    if z.n() != p.len() {
        return Err(validation(format!(
            "similarity matrix is {}x{} but abundance vector has {} entries",
            z.n(),
            z.n(),
            p.len()
        )));
    }
    Ok(())
}
