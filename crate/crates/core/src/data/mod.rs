//! Graph construction and file formats.

pub mod io;
pub mod knn;
pub mod planted;

pub use knn::{knn_graph, FeatureMatrix};
pub use planted::{planted_partition, PlantedPartitionSpec};
