//! Community detection on weighted undirected graphs by modularity maximization.
//!
//! Modularity is rewritten as a graph total-variation energy with an ℓ2 balance
//! term, `H(f) = |f|_TV − γ‖f − mean(f)‖²`, and minimized over partition
//! functions with an MBO threshold-dynamics scheme: a convex-splitting diffusion
//! step evaluated in a truncated Laplacian eigenbasis, alternated with pointwise
//! thresholding onto the simplex vertices.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: sparse weighted graphs, volumes, cuts and the combinatorial Laplacian.
//! - [`eigen`]: Lanczos solver for the smallest Laplacian eigenpairs, plus an on-disk cache.
//! - [`functional`]: partitions, partition functions, modularity and the TV energy.
//! - [`mbo`]: the Modularity MBO iteration.
//! - [`schemes`]: recursive (RMM) and multi-n̂ drivers.
//! - [`baselines`]: spectral clustering with k-means and Newman's spectral bipartition.
//! - [`metrics`]: NMI, purity and partition summaries.
//! - [`data`]: k-NN similarity graphs, planted-partition graphs and file formats.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is enabled
//! (the default). All parallel reductions use a fixed blocking so that results are
//! bit-identical with and without the feature.

pub mod baselines;
pub mod data;
pub mod eigen;
pub mod error;
pub mod functional;
pub mod graph;
pub mod mbo;
pub mod metrics;
pub mod par;
pub mod schemes;
pub(crate) mod seeds;

pub use error::{Error, Result};
pub use functional::{Partition, PartitionFunction};
pub use graph::{Graph, Laplacian};
pub use eigen::EigenBasis;
pub use mbo::{run_mbo, MboConfig, MboRun};
pub use schemes::{run_multi_n, run_rmm, SchemeConfig};
