//! Partition comparison: normalized mutual information and purity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Partition;

/// Overlap counts `|C_k ∩ Ĉ_l|` between two partitions of the same nodes.
///
/// Nodes unassigned in either partition are left out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(a: &Partition, b: &Partition) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        let a = a.compacted();
        let b = b.compacted();
        let n_rows = a.labels().iter().filter(|&&l| l != Partition::UNASSIGNED).max().map_or(0, |m| m + 1);
        let n_cols = b.labels().iter().filter(|&&l| l != Partition::UNASSIGNED).max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; n_cols]; n_rows];
        let mut total = 0;
        for (&x, &y) in a.labels().iter().zip(b.labels()) {
            if x == Partition::UNASSIGNED || y == Partition::UNASSIGNED {
                continue;
            }
            counts[x][y] += 1;
            total += 1;
        }
        let rows = counts.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..n_cols).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            rows,
            cols,
            total,
        })
    }

    pub fn count(&self, k: usize, l: usize) -> usize {
        self.counts[k][l]
    }

    pub fn row_marginals(&self) -> &[usize] {
        &self.rows
    }

    pub fn col_marginals(&self) -> &[usize] {
        &self.cols
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn entropy(marginals: &[usize], n: f64) -> f64 {
        marginals
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    fn joint_entropy(&self) -> f64 {
        let n = self.total as f64;
        self.counts
            .iter()
            .flatten()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    }
}

/// `NMI = 2 I(a; b) / (H(a) + H(b))` with natural logarithms.
///
/// When one side has zero entropy the ratio is 0/0: two single-community
/// partitions score 1, otherwise 0.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(a, b)?;
    if table.total == 0 {
        return Ok(1.0);
    }
    let n = table.total as f64;
    let ha = ContingencyTable::entropy(&table.rows, n);
    let hb = ContingencyTable::entropy(&table.cols, n);
    match (ha == 0.0, hb == 0.0) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    // I = H(a) + H(b) − H(a, b); identical partitions give exactly 1.
    let mi = ha + hb - table.joint_entropy();
    let value = 2.0 * mi / (ha + hb);
    Ok(value.clamp(0.0, 1.0))
}

/// `(1/N) Σ_k max_l |C_k ∩ Ĉ_l|`: fraction of nodes in their community's plurality class.
pub fn purity(c: &Partition, truth: &Partition) -> Result<f64> {
    let table = ContingencyTable::new(c, truth)?;
    if table.total == 0 {
        return Ok(1.0);
    }
    let hits: usize = table
        .counts
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / table.total as f64)
}

/// One line of evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nmi: Option<f64>,
    pub purity: Option<f64>,
    pub modularity: f64,
    pub n_communities: usize,
    pub runtime_ms: f64,
}

/// Communities keyed by size, for reporting.
pub fn size_histogram(p: &Partition) -> BTreeMap<usize, usize> {
    p.size_histogram()
}
