//! Partitions, partition functions, modularity and the total-variation energy.
//!
//! For an indicator-valued partition function `f` the energy
//! `H(f) = |f|_TV − γ‖f − mean(f)‖²` satisfies `Q = 1 − γ − H / 2m`, so
//! maximizing modularity and minimizing `H` are the same problem.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Assignment of every node to a community.
///
/// Labels are 0-based. Nodes that cannot be clustered (zero strength) carry
/// [`Partition::UNASSIGNED`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub const UNASSIGNED: usize = usize::MAX;

    pub fn new(labels: Vec<usize>) -> Self {
        Partition { labels }
    }

    /// Every node in community 0.
    pub fn single(n_nodes: usize) -> Self {
        Partition::new(vec![0; n_nodes])
    }

    /// Builds a partition from disjoint node lists; unlisted nodes are unassigned.
    pub fn from_communities(n_nodes: usize, communities: &[Vec<usize>]) -> Self {
        let mut labels = vec![Self::UNASSIGNED; n_nodes];
        for (c, members) in communities.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        Partition { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        match self.labels[i] {
            Self::UNASSIGNED => None,
            l => Some(l),
        }
    }

    /// Number of nonempty communities.
    pub fn n_communities(&self) -> usize {
        let mut seen: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != Self::UNASSIGNED)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Relabels communities `0..N_c` in order of first appearance.
    pub fn compacted(&self) -> Partition {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == Self::UNASSIGNED {
                    return l;
                }
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    pub fn is_compact(&self) -> bool {
        *self == self.compacted()
    }

    /// Node lists per label of the compacted partition.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let compact = self.compacted();
        let mut out = vec![Vec::new(); compact.n_communities()];
        for (i, &l) in compact.labels.iter().enumerate() {
            if l != Self::UNASSIGNED {
                out[l].push(i);
            }
        }
        out
    }

    /// Community sizes in compacted-label order.
    pub fn sizes(&self) -> Vec<usize> {
        self.communities().iter().map(Vec::len).collect()
    }

    /// Map from community size to the number of communities of that size.
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for s in self.sizes() {
            *hist.entry(s).or_insert(0) += 1;
        }
        hist
    }

    /// Indicator partition function with `n_hat` columns.
    pub fn indicator(&self, n_hat: usize) -> Result<PartitionFunction> {
        let mut f = PartitionFunction::zeros(self.len(), n_hat);
        for (i, &l) in self.labels.iter().enumerate() {
            if l == Self::UNASSIGNED {
                continue;
            }
            if l >= n_hat {
                return Err(Error::InvalidParameter(format!(
                    "label {l} of node {i} does not fit in {n_hat} columns"
                )));
            }
            f.row_mut(i)[l] = 1.0;
        }
        Ok(f)
    }
}

/// `N × n̂` real matrix whose row `i` is `f_i ∈ ℝ^n̂`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionFunction {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl PartitionFunction {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        PartitionFunction {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_rows(n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_cols == 0 || values.len() % n_cols != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values cannot form rows of width {n_cols}",
                values.len()
            )));
        }
        Ok(PartitionFunction {
            n_rows: values.len() / n_cols,
            n_cols,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Index of the first row that is not a standard basis vector.
    pub fn first_non_indicator_row(&self) -> Option<usize> {
        (0..self.n_rows).find(|&i| {
            let row = self.row(i);
            let ones = row.iter().filter(|&&x| x == 1.0).count();
            let zeros = row.iter().filter(|&&x| x == 0.0).count();
            !(ones == 1 && zeros == self.n_cols - 1)
        })
    }

    pub fn is_indicator(&self) -> bool {
        self.first_non_indicator_row().is_none()
    }

    /// Per-row argmax with ties resolved to the lowest column.
    pub fn argmax_labels(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (l, &x) in row.iter().enumerate().skip(1) {
                    if x > row[best] {
                        best = l;
                    }
                }
                best
            })
            .collect()
    }

    /// Partition read off an indicator-valued function.
    pub fn to_partition(&self) -> Result<Partition> {
        if let Some(i) = self.first_non_indicator_row() {
            return Err(Error::NotIndicator(i));
        }
        Ok(Partition::new(self.argmax_labels()))
    }
}

fn check_rows(g: &Graph, f: &PartitionFunction) -> Result<()> {
    if f.n_rows() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            found: f.n_rows(),
        });
    }
    Ok(())
}

/// Modularity `Q = (1/2m) Σ_ij (w_ij − γ k_i k_j / 2m) δ(g_i, g_j)`, with the
/// diagonal `i = j` included.
pub fn modularity(g: &Graph, p: &Partition, gamma: f64) -> Result<f64> {
    if p.len() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            found: p.len(),
        });
    }
    let two_m = g.total_weight();
    if two_m <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let labels = p.labels();
    let mut internal = 0.0;
    let mut volumes: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..g.n_nodes() {
        let li = labels[i];
        if li == Partition::UNASSIGNED {
            continue;
        }
        *volumes.entry(li).or_insert(0.0) += g.strength(i);
        internal += g
            .neighbors(i)
            .filter(|&(j, _)| labels[j] == li)
            .map(|(_, w)| w)
            .sum::<f64>();
    }
    let null: f64 = volumes.values().map(|v| v * v).sum();
    Ok((internal - gamma * null / two_m) / two_m)
}

/// `|f|_TV = ½ Σ_ij w_ij ‖f_i − f_j‖₁`.
pub fn tv(g: &Graph, f: &PartitionFunction) -> f64 {
    g.edges()
        .iter()
        .filter(|&&(i, j, _)| i != j)
        .map(|&(i, j, w)| {
            let d: f64 = f.row(i).iter().zip(f.row(j)).map(|(a, b)| (a - b).abs()).sum();
            w * d
        })
        .sum()
}

/// `mean(f)^(l) = (1/2m) Σ_i k_i f_i^(l)`; the zero vector when `2m = 0`.
pub fn weighted_mean(g: &Graph, f: &PartitionFunction) -> Vec<f64> {
    weighted_mean_with(g.strengths(), g.total_weight(), f)
}

pub(crate) fn weighted_mean_with(k: &[f64], two_m: f64, f: &PartitionFunction) -> Vec<f64> {
    let mut mean = vec![0.0; f.n_cols()];
    if two_m <= 0.0 {
        return mean;
    }
    for (i, &ki) in k.iter().enumerate() {
        for (m, x) in mean.iter_mut().zip(f.row(i)) {
            *m += ki * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= two_m);
    mean
}

/// Weighted squared norm `‖f‖² = Σ_i k_i ‖f_i‖²`.
pub fn weighted_norm_sq(g: &Graph, f: &PartitionFunction) -> f64 {
    (0..f.n_rows())
        .map(|i| g.strength(i) * f.row(i).iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// Balance term `‖f − mean(f)‖²`.
pub fn balance(g: &Graph, f: &PartitionFunction) -> f64 {
    centered_norm_sq(g.strengths(), g.total_weight(), f)
}

fn centered_norm_sq(k: &[f64], two_m: f64, f: &PartitionFunction) -> f64 {
    let mean = weighted_mean_with(k, two_m, f);
    k.iter()
        .enumerate()
        .map(|(i, &ki)| {
            ki * f
                .row(i)
                .iter()
                .zip(&mean)
                .map(|(x, m)| (x - m).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// `H(f) = |f|_TV − γ‖f − mean(f)‖²` for indicator-valued `f`.
pub fn energy_h(g: &Graph, f: &PartitionFunction, gamma: f64) -> Result<f64> {
    check_rows(g, f)?;
    if let Some(i) = f.first_non_indicator_row() {
        return Err(Error::NotIndicator(i));
    }
    Ok(tv(g, f) - gamma * balance(g, f))
}

/// Modularity recovered from the energy: `Q = 1 − γ − H / 2m`.
pub fn modularity_from_energy(h: f64, gamma: f64, two_m: f64) -> f64 {
    1.0 - gamma - h / two_m
}

/// Energy of `f` on the node subset `nodes` with respect to global modularity:
///
/// `H^(S)(f) = |f|_TV^(S) − γ (m^(S)/m) ‖f − mean^(S)(f)‖²`
///
/// where the TV term only sees edges inside `S`, `2m^(S) = Σ_{i∈S} k_i` and all
/// `k_i` are strengths in the full graph. Row `a` of `f` belongs to `nodes[a]`.
/// For an indicator `f` this equals `−2m · ΔQ`, the change in global modularity
/// caused by splitting the community `S` according to `f`.
pub fn energy_h_subgraph(
    g: &Graph,
    nodes: &[usize],
    f: &PartitionFunction,
    gamma: f64,
) -> Result<f64> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter("node subset is empty".into()));
    }
    if f.n_rows() != nodes.len() {
        return Err(Error::LengthMismatch {
            expected: nodes.len(),
            found: f.n_rows(),
        });
    }
    let k: Vec<f64> = nodes.iter().map(|&i| g.strength(i)).collect();
    let two_m_s: f64 = k.iter().sum();
    if two_m_s <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    let sub = g.induced_subgraph(nodes);
    let ratio = two_m_s / g.total_weight();
    Ok(tv(&sub, f) - gamma * ratio * centered_norm_sq(&k, two_m_s, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Graph {
        Graph::from_edges(
            6,
            [
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
        .unwrap()
    }

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn split() -> Partition {
        Partition::new(vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn one_community_has_zero_modularity() {
        let g = two_triangles();
        assert_eq!(modularity(&g, &Partition::single(6), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn two_triangles_modularity_half() {
        let g = two_triangles();
        assert_eq!(modularity(&g, &split(), 1.0).unwrap(), 0.5);
    }

    #[test]
    fn modularity_rejects_empty_graph() {
        let g = Graph::from_edges(2, []).unwrap();
        assert!(matches!(
            modularity(&g, &Partition::single(2), 1.0),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn tv_examples() {
        let g = two_triangles();
        let f = Partition::new(vec![0, 0, 0, 1, 1, 1]).indicator(2).unwrap();
        // Each column is the indicator of one triangle; no edge crosses.
        assert_eq!(tv(&g, &f), 0.0);
        let p = path3();
        let chi = PartitionFunction::from_rows(1, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(tv(&p, &chi), 1.0);
        assert_eq!(tv(&p, &chi), p.cut(&[0]));
    }

    #[test]
    fn balance_of_indicator() {
        let g = path3();
        let chi = PartitionFunction::from_rows(1, vec![1.0, 0.0, 0.0]).unwrap();
        let expected = g.volume(&[0]) * g.volume(&[1, 2]) / g.total_weight();
        assert!((balance(&g, &chi) - expected).abs() < 1e-15);
        assert_eq!(weighted_mean(&g, &chi), vec![0.25]);
    }

    #[test]
    fn energy_examples() {
        let g = two_triangles();
        let one = Partition::single(6).indicator(1).unwrap();
        assert_eq!(energy_h(&g, &one, 1.0).unwrap(), 0.0);
        let f = split().indicator(2).unwrap();
        let h = energy_h(&g, &f, 1.0).unwrap();
        assert_eq!(h, -6.0);
        assert_eq!(modularity_from_energy(h, 1.0, 12.0), 0.5);
    }

    #[test]
    fn energy_rejects_relaxed_function() {
        let g = path3();
        let f = PartitionFunction::from_rows(2, vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(energy_h(&g, &f, 1.0), Err(Error::NotIndicator(1))));
    }

    #[test]
    fn subgraph_energy_examples() {
        let g = two_triangles();
        let all: Vec<usize> = (0..6).collect();
        let f = split().indicator(2).unwrap();
        assert_eq!(
            energy_h_subgraph(&g, &all, &f, 1.0).unwrap(),
            energy_h(&g, &f, 1.0).unwrap()
        );
        let constant = Partition::single(3).indicator(2).unwrap();
        assert_eq!(energy_h_subgraph(&g, &[0, 1, 2], &constant, 1.0).unwrap(), 0.0);

        // S = {0, 1} of the path, f = (e_1, e_2): one unit edge inside S with
        // ‖e_1 − e_2‖₁ = 2 so TV = 2; k = (1, 2), 2m^S = 3, mean = (1/3, 2/3),
        // centered norm = 1·(4/9 + 4/9) + 2·(1/9 + 1/9) = 4/3; m^S/m = 3/4.
        // H = 2 − (3/4)(4/3) = 1.
        let p = path3();
        let f = PartitionFunction::from_rows(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let h = energy_h_subgraph(&p, &[0, 1], &f, 1.0).unwrap();
        assert!((h - 1.0).abs() < 1e-15, "{h}");
        // Same number as −2m ΔQ for splitting {0, 1} in {0, 1},{2}.
        let before = modularity(&p, &Partition::new(vec![0, 0, 1]), 1.0).unwrap();
        let after = modularity(&p, &Partition::new(vec![0, 2, 1]), 1.0).unwrap();
        assert!((h + p.total_weight() * (after - before)).abs() < 1e-15);
    }

    #[test]
    fn subgraph_energy_rejects_massless_subset() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        let f = Partition::single(1).indicator(1).unwrap();
        assert!(energy_h_subgraph(&g, &[2], &f, 1.0).is_err());
        assert!(energy_h_subgraph(&g, &[], &f, 1.0).is_err());
    }

    #[test]
    fn compaction_is_first_appearance() {
        let p = Partition::new(vec![7, 3, 7, Partition::UNASSIGNED, 9]);
        assert_eq!(
            p.compacted().labels(),
            &[0, 1, 0, Partition::UNASSIGNED, 2]
        );
        assert_eq!(p.n_communities(), 3);
        assert_eq!(p.sizes(), vec![2, 1, 1]);
        assert_eq!(p.size_histogram(), BTreeMap::from([(1, 2), (2, 1)]));
    }

    #[test]
    fn unassigned_nodes_carry_no_weight() {
        let g = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let p = Partition::new(vec![0, 0, 0, Partition::UNASSIGNED]);
        assert_eq!(modularity(&g, &p, 1.0).unwrap(), 0.0);
    }
}
