#![allow(dead_code)]

use lcr_core::diversity::{Order, RelativeAbundance, SimilarityMatrix};
use rand::Rng;

pub fn random_abundance<R: Rng>(rng: &mut R, n: usize) -> RelativeAbundance {
    let counts: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    RelativeAbundance::from_counts(&counts).unwrap()
}

pub fn random_similarity<R: Rng>(rng: &mut R, n: usize) -> SimilarityMatrix {
    SimilarityMatrix::from_upper_fn(n, |_, _| rng.random_range(0.0..=1.0)).unwrap()
}

/// Random class assignment over `m` classes with every class non-empty.
pub fn random_classes<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    assert!(n >= m);
    let mut classes: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
    // Shuffle so class k is not always element k.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        classes.swap(i, j);
    }
    classes
}

pub fn order_grid() -> Vec<Order> {
    let mut qs: Vec<Order> = (0..=32).map(|k| Order::new(k as f64 * 0.25).unwrap()).collect();
    qs.push(Order::INFINITY);
    qs
}
