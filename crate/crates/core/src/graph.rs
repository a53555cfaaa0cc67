//! Sparse weighted undirected graphs and the combinatorial graph Laplacian.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::par;

/// Immutable weighted undirected graph.
///
/// Edges are kept twice: once as a canonical upper-triangle list (`i <= j`,
/// sorted), which defines equality and hashing, and once as symmetric CSR
/// neighbor lists used by matrix-vector products. A self-loop `(i, i, w)`
/// appears once in row `i` and adds `w` to the strength `k_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    upper: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    strengths: Vec<f64>,
    total_weight: f64,
}

impl Graph {
    /// Builds a graph on `n_nodes` nodes from `(i, j, w)` triples.
    ///
    /// An edge given in one direction only is mirrored. Repeating an edge (in
    /// either direction) is allowed when the weights agree and rejected
    /// otherwise. Zero-weight edges are dropped.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut canonical: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            for index in [i, j] {
                if index >= n_nodes {
                    return Err(Error::NodeOutOfRange { index, n_nodes });
                }
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight { i, j, weight: w });
            }
            let key = (i.min(j), i.max(j));
            match canonical.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::ConflictingEdge {
                        i: key.0,
                        j: key.1,
                        first: prev,
                        second: w,
                    })
                }
                Some(_) => {}
                None => {
                    canonical.insert(key, w);
                }
            }
        }
        let upper: Vec<(usize, usize, f64)> = canonical
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|((i, j), w)| (i, j, w))
            .collect();
        Ok(Self::from_canonical(n_nodes, upper))
    }

    fn from_canonical(n_nodes: usize, upper: Vec<(usize, usize, f64)>) -> Self {
        let mut degree = vec![0usize; n_nodes];
        for &(i, j, _) in &upper {
            degree[i] += 1;
            if i != j {
                degree[j] += 1;
            }
        }
        let mut offsets = vec![0usize; n_nodes + 1];
        for i in 0..n_nodes {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let nnz = offsets[n_nodes];
        let mut targets = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut cursor = offsets[..n_nodes].to_vec();
        for &(i, j, w) in &upper {
            targets[cursor[i]] = j;
            weights[cursor[i]] = w;
            cursor[i] += 1;
            if i != j {
                targets[cursor[j]] = i;
                weights[cursor[j]] = w;
                cursor[j] += 1;
            }
        }
        for i in 0..n_nodes {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            let mut row: Vec<(usize, f64)> = targets[lo..hi]
                .iter()
                .copied()
                .zip(weights[lo..hi].iter().copied())
                .collect();
            row.sort_by_key(|&(t, _)| t);
            for (k, (t, w)) in row.into_iter().enumerate() {
                targets[lo + k] = t;
                weights[lo + k] = w;
            }
        }
        let strengths: Vec<f64> = (0..n_nodes)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        let total_weight = strengths.iter().sum();
        Graph {
            n_nodes,
            upper,
            offsets,
            targets,
            weights,
            strengths,
            total_weight,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of distinct undirected edges, self-loops included.
    pub fn n_edges(&self) -> usize {
        self.upper.len()
    }

    /// Canonical edge list with `i <= j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.upper
    }

    /// Neighbors of `i` with their weights, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.targets[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Weight `w_ij`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        match self.targets[lo..hi].binary_search(&j) {
            Ok(k) => self.weights[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.strengths[i]
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// Total volume `2m = Σ_i k_i`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Nodes with zero strength.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&i| self.strengths[i] == 0.0)
            .collect()
    }

    /// `vol(A) = Σ_{i∈A} k_i`.
    pub fn volume(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.strengths[i]).sum()
    }

    /// `Cut(A, Aᶜ) = Σ_{i∈A, j∉A} w_ij`.
    pub fn cut(&self, nodes: &[usize]) -> f64 {
        let mut inside = vec![false; self.n_nodes];
        for &i in nodes {
            inside[i] = true;
        }
        (0..self.n_nodes)
            .filter(|&i| inside[i])
            .map(|i| {
                self.neighbors(i)
                    .filter(|&(j, _)| !inside[j])
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Subgraph induced on `nodes`; local index `a` corresponds to `nodes[a]`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut local = vec![usize::MAX; self.n_nodes];
        for (a, &i) in nodes.iter().enumerate() {
            local[i] = a;
        }
        let mut upper = Vec::new();
        for (a, &i) in nodes.iter().enumerate() {
            for (j, w) in self.neighbors(i) {
                let b = local[j];
                if b != usize::MAX && a <= b {
                    upper.push((a, b, w));
                }
            }
        }
        upper.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        Graph::from_canonical(nodes.len(), upper)
    }

    /// Combinatorial Laplacian `L = D − W`.
    pub fn laplacian(&self) -> Laplacian<'_> {
        Laplacian { graph: self }
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n_nodes];
        let mut components = Vec::new();
        for start in 0..self.n_nodes {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(i) = stack.pop() {
                comp.push(i);
                for (j, _) in self.neighbors(i) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// The graph Laplacian `L = D − W` as an implicit sparse operator.
#[derive(Debug, Clone, Copy)]
pub struct Laplacian<'g> {
    graph: &'g Graph,
}

impl<'g> Laplacian<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.n_nodes
    }

    /// Diagonal entry `L_ii = k_i − w_ii`.
    pub fn diagonal(&self, i: usize) -> f64 {
        self.graph.strengths[i] - self.graph.weight(i, i)
    }

    /// Entry `L_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diagonal(i)
        } else {
            -self.graph.weight(i, j)
        }
    }

    /// `y = L x`, parallel over rows.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.graph;
        assert_eq!(x.len(), g.n_nodes);
        assert_eq!(y.len(), g.n_nodes);
        par::for_each_chunk_mut(y, par::BLOCK, |c, out| {
            let base = c * par::BLOCK;
            for (r, slot) in out.iter_mut().enumerate() {
                let i = base + r;
                let mut acc = g.strengths[i] * x[i];
                for (j, w) in g.neighbors(i) {
                    acc -= w * x[j];
                }
                *slot = acc;
            }
        });
    }

    /// `⟨z, Lz⟩` evaluated edge-wise as `Σ_{i<j} w_ij (z_i − z_j)²`.
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        self.graph
            .upper
            .iter()
            .map(|&(i, j, w)| w * (z[i] - z[j]).powi(2))
            .sum()
    }

    /// Upper bound on the spectral radius (Gershgorin).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.diagonal(i))
            .fold(0.0, f64::max)
    }
}
