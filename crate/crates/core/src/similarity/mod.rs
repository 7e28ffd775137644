//! Image ingestion and the pairwise similarity engine `Z_ij = exp(−RMSD_ij)`.

mod cache;
mod engine;
mod store;

pub use cache::{read_zsim, write_zsim, ZSIM_MAGIC, ZSIM_VERSION};
pub use engine::{rmsd, similarity_matrix, similarity_matrix_with_workers};
pub use store::{load_dataset, DatasetItem, DatasetStore, ImageTensor};
