//! Structural segmentation of the 5D manifold and density-core labeling of
//! the 2D map.

mod density;
mod kmeans;

pub use density::{density_core_label, label_documents, DbscanLabeler, DensityCoreLabel, DensityCoreLabeler};
pub use kmeans::{adjusted_rand_index, kmeans_assign, kmeans_fit, kmeans_fit_best, KMeansConfig, KMeansFit, KMeansModel};
