//! k-nearest-neighbor similarity graphs.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;

/// `N × d` node features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be at least 1".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::LengthMismatch {
                expected: values.len().div_ceil(dim) * dim,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature in row {}",
                pos / dim
            )));
        }
        Ok(FeatureMatrix {
            n_rows: values.len() / dim,
            dim,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidParameter(format!(
                "row {r} has {} features, expected {dim}",
                rows[r].len()
            )));
        }
        Self::new(dim, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn dist_sq(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// The `k` nearest other rows of `i` as `(squared distance, index)`, closest first.
/// Equal distances are ordered by index.
fn nearest(x: &FeatureMatrix, i: usize, k: usize) -> Vec<(f64, usize)> {
    let mut cand: Vec<(f64, usize)> = (0..x.n_rows())
        .filter(|&j| j != i)
        .map(|j| (x.dist_sq(i, j), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand
}

/// Symmetric k-NN graph with Gaussian weights `exp(−d²/(3σ²))`.
///
/// `i` and `j` are joined when either is among the other's `k` nearest
/// neighbors. `σ` is the mean, over all nodes, of the distance to the `k`-th
/// nearest neighbor. Coincident points get weight 1.
pub fn knn_graph(x: &FeatureMatrix, k: usize) -> Result<Graph> {
    let n = x.n_rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < N = {n}, got {k}"
        )));
    }
    let lists = par::map_collect(n, |i| nearest(x, i, k));
    let sigma = lists.iter().map(|l| l[k - 1].0.sqrt()).sum::<f64>() / n as f64;
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, list) in lists.iter().enumerate() {
        for &(d2, j) in list {
            let key = (i.min(j), i.max(j));
            edges.entry(key).or_insert_with(|| {
                if d2 == 0.0 {
                    1.0
                } else {
                    (-d2 / (3.0 * sigma * sigma)).exp()
                }
            });
        }
    }
    Graph::from_edges(n, edges.into_iter().map(|((i, j), w)| (i, j, w)))
}

/// `σ` as used by [`knn_graph`].
pub fn knn_sigma(x: &FeatureMatrix, k: usize) -> Result<f64> {
    let n = x.n_rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < N = {n}, got {k}"
        )));
    }
    let far = par::map_collect(n, |i| nearest(x, i, k)[k - 1].0.sqrt());
    Ok(far.iter().sum::<f64>() / n as f64)
}
