//! Similarity-sensitive diversity measures for labeled image datasets.
//!
//! The crate computes effective-number diversities (Hill numbers and their
//! similarity-sensitive generalization), partitions them over class labels
//! into per-class and dataset-level measures, builds pixel-RMSD similarity
//! matrices from image folders, samples class-composition subsets, and
//! regresses model performance on log-transformed quality features.
//!
//! ```
//! use lcr_core::diversity::{similarity_diversity, Order, RelativeAbundance, SimilarityMatrix};
//!
//! let p = RelativeAbundance::new(vec![0.5, 0.5]).unwrap();
//! let z = SimilarityMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
//! let d0 = similarity_diversity(&z, &p, Order::new(0.0).unwrap()).unwrap();
//! assert!((d0 - 4.0 / 3.0).abs() < 1e-12);
//! ```

// Negated comparisons such as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod diversity;
pub mod error;
pub mod metacommunity;
pub mod numeric;
pub mod sampler;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, Result};
