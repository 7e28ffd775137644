//! Ordinary least squares with intercept and adjusted R².

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{validation, Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_by};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    /// One slope per input column; dropped columns get 0.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    /// Numerical rank of the centered design, i.e. the effective predictor count.
    pub rank: usize,
    pub warnings: Vec<String>,
}

/// Fits `y ≈ b0 + Σ_j b_j x_j` by least squares. `columns[j]` holds predictor
/// `j` for every row.
///
/// The intercept is handled by centering; the centered design is
/// column-equilibrated and solved through an SVD, so rank-deficient designs
/// (constant or duplicated columns) get the minimum-norm solution plus a
/// warning instead of an error.
pub fn fit_linear(columns: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = y.len();
    let p = columns.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(validation("every predictor column must have one value per row"));
    }
    if n < p + 2 {
        return Err(validation(format!("{n} rows cannot support {p} predictors plus intercept")));
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(validation("regression inputs must be finite"));
    }
    let y_mean = pairwise_sum(y) / n as f64;
    let ss_tot = pairwise_sum_by(n, |i| (y[i] - y_mean).powi(2));
    if !(ss_tot > 0.0) {
        return Err(Error::UndefinedR2 { metric: "y".into() });
    }

    let mut warnings = Vec::new();
    let means: Vec<f64> = columns.iter().map(|c| pairwise_sum(c) / n as f64).collect();
    let mut kept = Vec::new();
    let mut norms = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        let norm = pairwise_sum_by(n, |i| (c[i] - means[j]).powi(2)).sqrt();
        if norm <= 1e-12 * (1.0 + means[j].abs()) * (n as f64).sqrt() {
            warnings.push(format!("column {j} has zero variance; dropped"));
        } else {
            kept.push(j);
            norms.push(norm);
        }
    }

    let mut coefficients = vec![0.0; p];
    let mut rank = 0;
    if !kept.is_empty() {
        let x = DMatrix::from_fn(n, kept.len(), |i, k| {
            let j = kept[k];
            (columns[j][i] - means[j]) / norms[k]
        });
        let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let svd = x.svd(true, true);
        let smax = svd.singular_values.max();
        let eps = smax * RANK_TOL;
        rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
        if rank < kept.len() {
            warnings.push(format!("design rank {rank} < {} predictors; minimum-norm solution used", kept.len()));
        }
        let beta = svd.solve(&yc, eps).map_err(|e| Error::Domain(e.to_string()))?;
        for (k, &j) in kept.iter().enumerate() {
            coefficients[j] = beta[k] / norms[k];
        }
    }
    let intercept = y_mean - pairwise_sum_by(p, |j| coefficients[j] * means[j]);
    let ss_res = pairwise_sum_by(n, |i| {
        let fitted = intercept + pairwise_sum_by(p, |j| coefficients[j] * columns[j][i]);
        (y[i] - fitted).powi(2)
    });
    Ok(LinearFit { intercept, coefficients, r2: 1.0 - ss_res / ss_tot, rank, warnings })
}

/// `1 − (1 − R²)(n − 1)/(n − k − 1)` for `n` rows and `k` predictors.
pub fn adjusted_r2(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::Domain(format!("adjusted R² needs more rows than predictors + 1 (n={n}, k={k})")));
    }
    if k == 0 {
        return Ok(r2);
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}
