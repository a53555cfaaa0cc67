//! Comparison methods: spectral clustering with k-means, and recursive
//! bipartitioning by the leading eigenvector of the modularity matrix.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{smallest_eigenpairs, smallest_eigenpairs_with, EigenOptions, SymmetricOperator, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::functional::Partition;
use crate::graph::Graph;
use crate::par;
use crate::schemes::split_gain;
use crate::seeds::restart_seed;

const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 300;

/// Rows `y_i ∈ ℝ^k` built from the nontrivial Laplacian eigenvectors `φ_1, …, φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    n_rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl SpectralEmbedding {
    /// Embedding of `g` in `min(k, N − 1)` dimensions.
    ///
    /// The rows are coordinates in the span of the `k + 1` lowest eigenvectors
    /// with the constant direction removed. On a connected graph that is the
    /// span of `φ_1, …, φ_k`; on a disconnected one the kernel basis returned by
    /// the solver is arbitrary, so the constant vector is projected out
    /// explicitly. k-means only sees distances, so the choice of orthonormal
    /// coordinates inside that span does not matter.
    pub fn new(g: &Graph, k: usize) -> Result<Self> {
        let n = g.n_nodes();
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two nodes".into()));
        }
        let n_eig = (k + 1).min(n);
        let basis = smallest_eigenpairs(&g.laplacian(), n_eig, DEFAULT_TOL)?;
        let v = DMatrix::from_fn(n, n_eig, |i, s| basis.eigenvector(s)[i]);
        let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut c = v.transpose() * ones;
        let coords = if c.norm() > 0.5 {
            // Householder reflection taking c to a multiple of e_0; its other
            // columns are an orthonormal basis of c's complement.
            c /= c.norm();
            let sign = if c[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut h = c.clone();
            h[0] += sign;
            let h = &h / h.norm();
            let reflect = DMatrix::identity(n_eig, n_eig) - 2.0 * &h * h.transpose();
            reflect.columns(1, n_eig - 1).into_owned()
        } else {
            DMatrix::identity(n_eig, n_eig).columns(1, n_eig - 1).into_owned()
        };
        let y = v * coords;
        let dim = n_eig - 1;
        let values = (0..n).flat_map(|i| (0..dim).map(move |c| (i, c))).map(|(i, c)| y[(i, c)]).collect();
        Ok(SpectralEmbedding {
            n_rows: n,
            dim,
            values,
        })
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
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center, lowest index on ties.
fn nearest(centers: &[Vec<f64>], y: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = dist_sq(center, y);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(x: &SpectralEmbedding, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.n_rows();
    let mut centers = vec![x.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| dist_sq(&centers[0], x.row(i))).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist_sq(&c, x.row(i)));
        }
        centers.push(c);
    }
    centers
}

/// One seeded Lloyd run; returns the labels and within-cluster sum of squares.
fn lloyd(x: &SpectralEmbedding, k: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = x.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus(x, k, &mut rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let assign: Vec<(usize, f64)> = (0..n).map(|i| nearest(&centers, x.row(i))).collect();
        let next: Vec<usize> = assign.iter().map(|a| a.0).collect();
        let changed = next != labels;
        labels = next;
        let mut sums = vec![vec![0.0; x.dim()]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut repaired = false;
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                continue;
            }
            // Move an empty center onto the point farthest from its own center,
            // taken from a cluster that can spare it.
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| assign[a].1.total_cmp(&assign[b].1).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                centers[c] = x.row(i).to_vec();
                repaired = true;
            }
        }
        if !changed && !repaired {
            break;
        }
    }
    let wcss = (0..n).map(|i| dist_sq(&centers[labels[i]], x.row(i))).sum();
    (labels, wcss)
}

/// k-means on `x` with plus-plus seeding; the best of several restarts by
/// within-cluster sum of squares.
pub fn kmeans(x: &SpectralEmbedding, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 || k > x.n_rows() {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={}, got {k}",
            x.n_rows()
        )));
    }
    let runs = par::map_collect(KMEANS_RESTARTS, |r| lloyd(x, k, restart_seed(seed, r)));
    let (labels, wcss) = runs
        .into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("restarts >= 1");
    debug!("kmeans: k={k} wcss={wcss:e}");
    Ok(Partition::new(labels).compacted())
}

/// Spectral clustering: k-means on the embedding from `k` nontrivial eigenvectors.
pub fn spectral_clustering(g: &Graph, k: usize, seed: u64) -> Result<Partition> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > g.n_nodes() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the node count {}",
            g.n_nodes()
        )));
    }
    let components = g.connected_components().len();
    if components > 1 {
        warn!("spectral clustering on a graph with {components} connected components");
    }
    let x = SpectralEmbedding::new(g, k)?;
    kmeans(&x, k, seed)
}

/// The modularity matrix `B = W − γ k kᵀ / 2m` as an implicit operator.
#[derive(Debug, Clone, Copy)]
pub struct ModularityMatrixView<'g> {
    graph: &'g Graph,
    gamma: f64,
}

impl<'g> ModularityMatrixView<'g> {
    pub fn new(graph: &'g Graph, gamma: f64) -> Result<Self> {
        if graph.total_weight() <= 0.0 {
            return Err(Error::EmptyGraph);
        }
        Ok(ModularityMatrixView { graph, gamma })
    }

    /// `y = W z − γ k ⟨k, z⟩ / 2m`.
    pub fn apply(&self, z: &[f64], y: &mut [f64]) {
        let g = self.graph;
        let proj = self.gamma * par::dot(g.strengths(), z) / g.total_weight();
        par::for_each_chunk_mut(y, par::BLOCK, |b, rows| {
            let base = b * par::BLOCK;
            for (r, out) in rows.iter_mut().enumerate() {
                let i = base + r;
                let wz: f64 = g.neighbors(i).map(|(j, w)| w * z[j]).sum();
                *out = wz - proj * g.strength(i);
            }
        });
    }

    /// Dense `B`, row-major; for testing.
    pub fn dense(&self) -> Vec<f64> {
        let g = self.graph;
        let n = g.n_nodes();
        let two_m = g.total_weight();
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = g.weight(i, j) - self.gamma * g.strength(i) * g.strength(j) / two_m;
            }
        }
        b
    }
}

/// `−B^(g)` for a node group, with `B^(g)_ij = B_ij − δ_ij Σ_{l∈g} B_il`.
/// Negated so that its smallest eigenpair is the leading one of `B^(g)`.
struct GroupOperator {
    sub: Graph,
    k: Vec<f64>,
    row_sums: Vec<f64>,
    two_m: f64,
    gamma: f64,
    bound: f64,
}

impl GroupOperator {
    fn new(g: &Graph, nodes: &[usize], gamma: f64) -> Self {
        let sub = g.induced_subgraph(nodes);
        let k: Vec<f64> = nodes.iter().map(|&i| g.strength(i)).collect();
        let two_m = g.total_weight();
        let vol: f64 = k.iter().sum();
        let row_sums: Vec<f64> = (0..nodes.len())
            .map(|a| sub.strength(a) - gamma * k[a] * vol / two_m)
            .collect();
        let bound = (0..nodes.len())
            .map(|a| sub.strength(a) + gamma * k[a] * vol / two_m + row_sums[a].abs())
            .fold(0.0, f64::max);
        GroupOperator {
            sub,
            k,
            row_sums,
            two_m,
            gamma,
            bound,
        }
    }
}

impl SymmetricOperator for GroupOperator {
    fn dim(&self) -> usize {
        self.k.len()
    }

    fn apply(&self, z: &[f64], y: &mut [f64]) {
        let proj = self.gamma * par::dot(&self.k, z) / self.two_m;
        for (a, out) in y.iter_mut().enumerate() {
            let wz: f64 = self.sub.neighbors(a).map(|(b, w)| w * z[b]).sum();
            *out = -(wz - proj * self.k[a] - self.row_sums[a] * z[a]);
        }
    }

    fn norm_bound(&self) -> f64 {
        self.bound
    }
}

/// Splits `nodes` by the sign pattern of the leading eigenvector of `B^(g)`;
/// `None` when the group is indivisible.
fn bisect(g: &Graph, nodes: &[usize], gamma: f64) -> Option<(Vec<usize>, Vec<usize>, f64)> {
    if nodes.len() < 2 {
        return None;
    }
    let op = GroupOperator::new(g, nodes, gamma);
    let basis = match smallest_eigenpairs_with(&op, 1, &EigenOptions::default()) {
        Ok(b) => b,
        Err(e) => {
            debug!("newman: leading eigenvector failed on a group of {}: {e}", nodes.len());
            return None;
        }
    };
    let beta = -basis.eigenvalue(0);
    if beta <= 1e-12 * op.bound.max(1.0) {
        return None;
    }
    let labels: Vec<usize> = basis
        .eigenvector(0)
        .iter()
        .map(|&u| usize::from(u < 0.0))
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return None;
    }
    let gain = split_gain(&op.sub, &op.k, op.two_m, gamma, &labels);
    if gain <= 1e-12 {
        return None;
    }
    let (a, b): (Vec<(usize, usize)>, Vec<(usize, usize)>) = nodes
        .iter()
        .copied()
        .zip(labels.iter().copied())
        .partition(|&(_, l)| l == 0);
    Some((a.into_iter().map(|p| p.0).collect(), b.into_iter().map(|p| p.0).collect(), gain))
}

/// Recursive spectral bipartitioning by the modularity matrix.
///
/// Each group is split by the signs of the leading eigenvector of its
/// generalized modularity matrix; a split is kept only if it raises `Q`.
pub fn newman_recursive_bipartition(g: &Graph, gamma: f64) -> Result<Partition> {
    if g.total_weight() <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let mut pending = vec![(0..g.n_nodes()).collect::<Vec<usize>>()];
    let mut done = Vec::new();
    while let Some(group) = pending.pop() {
        match bisect(g, &group, gamma) {
            Some((a, b, gain)) => {
                debug!("newman: split {} into {} + {} (gain {gain:.3e})", group.len(), a.len(), b.len());
                pending.push(b);
                pending.push(a);
            }
            None => done.push(group),
        }
    }
    done.sort_by_key(|c| c[0]);
    Ok(Partition::from_communities(g.n_nodes(), &done).compacted())
}
