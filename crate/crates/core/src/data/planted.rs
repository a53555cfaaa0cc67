//! Planted-partition random graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functional::Partition;
use crate::graph::Graph;

/// Parameters of a planted-partition graph.
///
/// Nodes are split into `n_blocks` contiguous blocks whose sizes differ by at
/// most one; the first `n_nodes % n_blocks` blocks get the extra node.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPartitionSpec {
    pub n_nodes: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PlantedPartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 || self.n_blocks > self.n_nodes {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= blocks <= nodes, got {} blocks for {} nodes",
                self.n_blocks, self.n_nodes
            )));
        }
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(ok(self.p_in) && ok(self.p_out) && self.p_out <= self.p_in) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }

    /// Block of every node.
    pub fn blocks(&self) -> Vec<usize> {
        let base = self.n_nodes / self.n_blocks;
        let extra = self.n_nodes % self.n_blocks;
        (0..self.n_blocks)
            .flat_map(|b| std::iter::repeat(b).take(base + usize::from(b < extra)))
            .collect()
    }

    /// Expected number of edges before isolated nodes are rewired.
    pub fn expected_edges(&self) -> f64 {
        let pairs = |s: usize| (s * s.saturating_sub(1) / 2) as f64;
        let sizes = Partition::new(self.blocks()).sizes();
        let intra: f64 = sizes.iter().map(|&s| pairs(s)).sum();
        let inter = pairs(self.n_nodes) - intra;
        self.p_in * intra + self.p_out * inter
    }
}

/// Samples a unit-weight graph and its planted ground truth.
///
/// Each pair inside a block is joined with probability `p_in`, each pair across
/// blocks with `p_out`. A node left without edges is joined to one uniformly
/// chosen node of its own block (or of the whole graph for a singleton block).
pub fn planted_partition(spec: &PlantedPartitionSpec) -> Result<(Graph, Partition)> {
    spec.validate()?;
    let n = spec.n_nodes;
    let block = spec.blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { spec.p_in } else { spec.p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    if n > 1 {
        for i in 0..n {
            if degree[i] > 0 {
                continue;
            }
            let mates: Vec<usize> = (0..n).filter(|&j| j != i && block[j] == block[i]).collect();
            let j = if mates.is_empty() {
                let r = rng.gen_range(0..n - 1);
                if r >= i {
                    r + 1
                } else {
                    r
                }
            } else {
                mates[rng.gen_range(0..mates.len())]
            };
            edges.push((i, j, 1.0));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    let g = Graph::from_edges(n, edges)?;
    Ok((g, Partition::new(block)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_layout() {
        let spec = PlantedPartitionSpec {
            n_nodes: 7,
            n_blocks: 3,
            p_in: 1.0,
            p_out: 0.0,
            seed: 0,
        };
        assert_eq!(spec.blocks(), vec![0, 0, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn disjoint_cliques() {
        let spec = PlantedPartitionSpec {
            n_nodes: 12,
            n_blocks: 3,
            p_in: 1.0,
            p_out: 0.0,
            seed: 5,
        };
        let (g, truth) = planted_partition(&spec).unwrap();
        assert_eq!(g.n_edges(), 3 * 6);
        assert_eq!(g.connected_components(), truth.communities());
    }

    #[test]
    fn seeded_and_reproducible() {
        let spec = PlantedPartitionSpec {
            n_nodes: 80,
            n_blocks: 4,
            p_in: 0.3,
            p_out: 0.02,
            seed: 11,
        };
        let a = planted_partition(&spec).unwrap();
        let b = planted_partition(&spec).unwrap();
        assert_eq!(a, b);
        let c = planted_partition(&PlantedPartitionSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn edge_count_near_expectation() {
        let spec = PlantedPartitionSpec {
            n_nodes: 500,
            n_blocks: 10,
            p_in: 0.3,
            p_out: 0.01,
            seed: 7,
        };
        // 0.3·10·C(50,2) + 0.01·C(10,2)·50² = 3675 + 1125.
        assert!((spec.expected_edges() - 4800.0).abs() < 1e-9);
        // Binomial variance 12250·0.3·0.7 + 112500·0.01·0.99 = 3686.25.
        let sd = 3686.25f64.sqrt();
        let (g, _) = planted_partition(&spec).unwrap();
        assert!((g.n_edges() as f64 - 4800.0).abs() <= 3.0 * sd, "{}", g.n_edges());
        assert!(g.isolated_nodes().is_empty());
    }

    #[test]
    fn sparse_graphs_have_no_isolated_nodes() {
        let spec = PlantedPartitionSpec {
            n_nodes: 60,
            n_blocks: 6,
            p_in: 0.02,
            p_out: 0.0,
            seed: 3,
        };
        let (g, _) = planted_partition(&spec).unwrap();
        assert!(g.isolated_nodes().is_empty());
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = PlantedPartitionSpec {
            n_nodes: 10,
            n_blocks: 2,
            p_in: 0.1,
            p_out: 0.2,
            seed: 0,
        };
        assert!(planted_partition(&bad).is_err());
        assert!(planted_partition(&PlantedPartitionSpec { n_blocks: 11, p_out: 0.0, ..bad }).is_err());
    }
}
