use rayon::prelude::*;

use super::store::{DatasetStore, ImageTensor};
use crate::diversity::SimilarityMatrix;
use crate::error::{validation, Error, Result};
use crate::numeric::pairwise_sum_by;

/// Tile edge for the blocked upper-triangle kernel.
const TILE: usize = 64;

/// Pixel-wise root-mean-squared difference over all positions and channels.
pub fn rmsd(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(validation(format!("cannot compare images of shape {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(rmsd_raw(a.pixels(), b.pixels()))
}

#[inline]
pub(crate) fn rmsd_raw(a: &[f64], b: &[f64]) -> f64 {
    let ss = pairwise_sum_by(a.len(), |k| {
        let d = a[k] - b[k];
        d * d
    });
    (ss / a.len() as f64).sqrt()
}

/// `Z_ij = exp(−RMSD_ij)` over the selected items, using the global rayon pool.
pub fn similarity_matrix(store: &DatasetStore, indices: &[usize]) -> Result<SimilarityMatrix> {
    let images = gather(store, indices)?;
    Ok(compute(&images))
}

/// As [`similarity_matrix`] on a dedicated pool of `workers` threads. The
/// output is bitwise identical for every worker count.
pub fn similarity_matrix_with_workers(
    store: &DatasetStore,
    indices: &[usize],
    workers: usize,
) -> Result<SimilarityMatrix> {
    if workers == 0 {
        return Err(validation("worker count must be at least 1"));
    }
    let images = gather(store, indices)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| compute(&images)))
}

fn gather<'a>(store: &'a DatasetStore, indices: &[usize]) -> Result<Vec<&'a [f64]>> {
    if indices.is_empty() {
        return Err(validation("similarity matrix needs at least one image"));
    }
    let mut seen = vec![false; store.len()];
    indices
        .iter()
        .map(|&i| {
            if i >= store.len() {
                return Err(validation(format!("item index {i} out of range ({})", store.len())));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(validation(format!("item index {i} repeated")));
            }
            Ok(store.image(i).pixels())
        })
        .collect()
}

fn compute(images: &[&[f64]]) -> SimilarityMatrix {
    let n = images.len();
    let blocks = n.div_ceil(TILE);
    let tiles: Vec<(usize, usize)> = (0..blocks).flat_map(|bi| (bi..blocks).map(move |bj| (bi, bj))).collect();

    let values: Vec<Vec<f64>> = tiles
        .par_iter()
        .map(|&(bi, bj)| {
            let rows = bi * TILE..((bi + 1) * TILE).min(n);
            let cols = bj * TILE..((bj + 1) * TILE).min(n);
            let mut out = Vec::with_capacity(rows.len() * cols.len());
            for i in rows {
                for j in cols.clone() {
                    out.push(if j > i { (-rmsd_raw(images[i], images[j])).exp() } else { 0.0 });
                }
            }
            out
        })
        .collect();

    let mut entries = vec![1.0; n * n];
    for (&(bi, bj), tile) in tiles.iter().zip(&values) {
        let c0 = bj * TILE;
        let width = ((bj + 1) * TILE).min(n) - c0;
        for (r, row) in tile.chunks(width).enumerate() {
            let i = bi * TILE + r;
            for (c, &v) in row.iter().enumerate() {
                let j = c0 + c;
                if j > i {
                    entries[i * n + j] = v;
                    entries[j * n + i] = v;
                }
            }
        }
    }
    SimilarityMatrix::from_dense_unchecked(n, entries)
}
