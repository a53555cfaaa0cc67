//! Driver strategies built on [`run_mbo`]: recursive refinement (RMM) and a
//! sweep over the maximum community count.

use std::ops::RangeInclusive;

use log::{debug, info};

use crate::eigen::{smallest_eigenpairs, EigenBasis, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::functional::{modularity, Partition};
use crate::graph::Graph;
use crate::mbo::{self, initial_function, run_mbo, MboConfig, MboRun, Problem};
use crate::par;
use crate::seeds::{child_seed, restart_seed};

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

/// Parameters shared by [`run_rmm`] and [`run_multi_n`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Settings for every MBO run; `n_hat` is overridden by the scheme.
    pub base: MboConfig,
    /// `n̂` for the first RMM pass over the whole graph.
    pub rmm_first_nhat: usize,
    /// Upper bound on `n̂` for RMM passes over a community `S`, which use `min(this, |S|)`.
    pub rmm_later_nhat: usize,
    /// Values of `n̂` tried by the sweep.
    pub multi_n_range: RangeInclusive<usize>,
    /// Random initial functions per setting; the best result is kept.
    pub restarts: usize,
    /// Residual tolerance for eigenbases computed by the schemes.
    pub eig_tol: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            base: MboConfig::default(),
            rmm_first_nhat: 50,
            rmm_later_nhat: 10,
            multi_n_range: 2..=10,
            restarts: 5,
            eig_tol: DEFAULT_TOL,
        }
    }
}

impl SchemeConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if self.rmm_first_nhat < 2 || self.rmm_later_nhat < 2 {
            return Err(Error::InvalidParameter("RMM n_hat values must be at least 2".into()));
        }
        Ok(())
    }
}

/// One accepted or rejected split attempt in the RMM recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    /// Recursion depth; the whole graph is depth 0.
    pub depth: usize,
    pub size: usize,
    pub n_hat: usize,
    /// Change in global modularity of the best restart.
    pub gain: f64,
    pub accepted: bool,
    /// Outer MBO iterations of each restart.
    pub iterations: Vec<usize>,
}

/// Result of [`run_rmm`].
#[derive(Debug, Clone, PartialEq)]
pub struct RmmRun {
    pub partition: Partition,
    pub modularity: f64,
    /// Best single pass over the whole graph, before any refinement.
    pub first_pass: MboRun,
    pub splits: Vec<SplitRecord>,
}

impl RmmRun {
    /// Outer MBO iterations over every run performed.
    pub fn iteration_counts(&self) -> Vec<usize> {
        self.splits.iter().flat_map(|s| s.iterations.iter().copied()).collect()
    }
}

/// Change in global modularity from splitting the community `nodes` by `labels`:
/// `ΔQ = −2 cut/2m + γ (vol(S)² − Σ_l vol(B_l)²) / (2m)²`, where `cut` is the
/// weight between different parts. This equals `−H^(S) / 2m`.
pub(crate) fn split_gain(sub: &Graph, k: &[f64], two_m: f64, gamma: f64, labels: &[usize]) -> f64 {
    let cross: f64 = sub
        .edges()
        .iter()
        .filter(|&&(i, j, _)| labels[i] != labels[j])
        .map(|&(_, _, w)| w)
        .sum();
    let n_parts = labels.iter().max().map_or(0, |m| m + 1);
    let mut vols = vec![0.0; n_parts];
    for (&l, &ki) in labels.iter().zip(k) {
        vols[l] += ki;
    }
    let vol_s: f64 = k.iter().sum();
    let spread = vol_s * vol_s - vols.iter().map(|v| v * v).sum::<f64>();
    -2.0 * cross / two_m + gamma * spread / (two_m * two_m)
}

/// Best of `restarts` runs on the whole graph; earliest restart wins ties.
fn best_of(g: &Graph, basis: &EigenBasis, config: &MboConfig, restarts: usize) -> Result<MboRun> {
    let runs = par::map_collect(restarts, |r| {
        run_mbo(
            g,
            basis,
            &MboConfig {
                seed: restart_seed(config.seed, r),
                ..config.clone()
            },
        )
    });
    let mut best: Option<MboRun> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().map_or(true, |b| run.modularity() > b.modularity()) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

struct Branch {
    communities: Vec<Vec<usize>>,
    splits: Vec<SplitRecord>,
}

/// Tries to split the community `nodes`; recurses into the parts when global
/// modularity strictly increases.
fn refine(
    g: &Graph,
    nodes: Vec<usize>,
    n_eig: usize,
    seed: u64,
    depth: usize,
    config: &SchemeConfig,
) -> Result<Branch> {
    if nodes.len() < 2 {
        return Ok(Branch {
            communities: vec![nodes],
            splits: Vec::new(),
        });
    }
    let sub = g.induced_subgraph(&nodes);
    let k: Vec<f64> = nodes.iter().map(|&i| g.strength(i)).collect();
    let two_m_s: f64 = k.iter().sum();
    let two_m = g.total_weight();
    let gamma = config.base.gamma;
    let n_eig = n_eig.min(nodes.len());
    let n_hat = config.rmm_later_nhat.min(nodes.len());
    let basis = smallest_eigenpairs(&sub.laplacian(), n_eig, config.eig_tol)?;
    let problem = Problem {
        strengths: &k,
        two_m: two_m_s,
        gamma_eff: gamma * two_m_s / two_m,
    };
    let mbo_config = MboConfig {
        n_hat,
        n_eig,
        known_labels: None,
        ..config.base.clone()
    };
    let score = |labels: &[usize]| split_gain(&sub, &k, two_m, gamma, labels);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut iterations = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let f0 = initial_function(nodes.len(), n_hat, restart_seed(seed, r), None)?;
        let raw = mbo::iterate(&problem, &basis, &mbo_config, f0, score);
        iterations.push(raw.iterations);
        let labels = Partition::new(raw.labels).compacted().labels().to_vec();
        let gain = score(&labels);
        if best.as_ref().map_or(true, |(b, _)| gain > *b) {
            best = Some((gain, labels));
        }
    }
    let (gain, labels) = best.expect("restarts >= 1");
    let accepted = gain > MIN_GAIN;
    debug!(
        "rmm: depth={depth} size={} n_hat={n_hat} gain={gain:.3e} accepted={accepted}",
        nodes.len()
    );
    let record = SplitRecord {
        depth,
        size: nodes.len(),
        n_hat,
        gain,
        accepted,
        iterations,
    };
    if !accepted {
        return Ok(Branch {
            communities: vec![nodes],
            splits: vec![record],
        });
    }
    let parts = Partition::new(labels).communities();
    let children: Vec<Vec<usize>> = parts
        .iter()
        .map(|p| p.iter().map(|&a| nodes[a]).collect())
        .collect();
    let results = par::map_collect(children.len(), |c| {
        refine(g, children[c].clone(), n_eig, child_seed(seed, c), depth + 1, config)
    });
    let mut out = Branch {
        communities: Vec::new(),
        splits: vec![record],
    };
    for r in results {
        let r = r?;
        out.communities.extend(r.communities);
        out.splits.extend(r.splits);
    }
    Ok(out)
}

/// Recursive Modularity MBO.
///
/// A first pass over the whole graph uses `n̂ = rmm_first_nhat`. Each resulting
/// community `S` is then split by minimizing its energy `H^(S)` in the
/// eigenbasis of its induced subgraph with `n̂ = min(rmm_later_nhat, |S|)`;
/// a split is kept only when it strictly increases global modularity, and kept
/// parts are refined the same way. Known labels only seed the first pass.
pub fn run_rmm(g: &Graph, config: &SchemeConfig) -> Result<RmmRun> {
    let n_eig = config.base.n_eig.min(g.n_nodes());
    if n_eig == 0 {
        return Err(Error::EmptyGraph);
    }
    let basis = smallest_eigenpairs(&g.laplacian(), n_eig, config.eig_tol)?;
    run_rmm_with_basis(g, &basis, config)
}

/// [`run_rmm`] with a precomputed eigenbasis for the first pass.
pub fn run_rmm_with_basis(g: &Graph, basis: &EigenBasis, config: &SchemeConfig) -> Result<RmmRun> {
    config.validate()?;
    let first_config = MboConfig {
        n_hat: config.rmm_first_nhat.min(g.n_nodes()).max(2),
        n_eig: basis.len(),
        ..config.base.clone()
    };
    let first = best_of(g, basis, &first_config, config.restarts)?;
    let mut splits = vec![SplitRecord {
        depth: 0,
        size: g.n_nodes(),
        n_hat: first_config.n_hat,
        gain: first.modularity(),
        accepted: true,
        iterations: vec![first.iterations],
    }];
    let roots = first.partition.communities();
    let results = par::map_collect(roots.len(), |c| {
        refine(
            g,
            roots[c].clone(),
            basis.len(),
            child_seed(config.base.seed, c),
            1,
            config,
        )
    });
    let mut communities = Vec::new();
    for r in results {
        let r = r?;
        communities.extend(r.communities);
        splits.extend(r.splits);
    }
    communities.sort_by_key(|c| c[0]);
    let partition = Partition::from_communities(g.n_nodes(), &communities).compacted();
    let q = modularity(g, &partition, config.base.gamma)?;
    info!(
        "rmm: {} communities, Q = {q:.6}, first pass Q = {:.6}",
        partition.n_communities(),
        first.modularity()
    );
    Ok(RmmRun {
        partition,
        modularity: q,
        first_pass: first,
        splits,
    })
}

/// One `(n̂, restart)` entry of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub n_hat: usize,
    pub restart: usize,
    pub seed: u64,
    pub modularity: f64,
    pub n_communities: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of [`run_multi_n`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRun {
    pub partition: Partition,
    /// Index into `table` of the returned partition.
    pub best: usize,
    pub table: Vec<SweepEntry>,
    /// Modularity trace of the returned run.
    pub q_trace: Vec<f64>,
}

impl MultiRun {
    pub fn best_entry(&self) -> &SweepEntry {
        &self.table[self.best]
    }

    pub fn modularity(&self) -> f64 {
        self.best_entry().modularity
    }
}

/// Multi-n̂ Modularity MBO: runs every `n̂` in `multi_n_range` with `restarts`
/// random starts against one shared eigenbasis and keeps the highest modularity.
/// Ties go to fewer communities, then smaller `n̂`, then the earlier restart.
pub fn run_multi_n(g: &Graph, basis: &EigenBasis, config: &SchemeConfig) -> Result<MultiRun> {
    config.validate()?;
    let range = config.multi_n_range.clone();
    if range.is_empty() || *range.start() < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_hat range must be nonempty and start at 2 or more, got {}..={}",
            range.start(),
            range.end()
        )));
    }
    let jobs: Vec<(usize, usize)> = range
        .flat_map(|n_hat| (0..config.restarts).map(move |r| (n_hat, r)))
        .collect();
    let runs = par::map_slice(&jobs, |&(n_hat, r)| {
        let seed = restart_seed(config.base.seed, r);
        let run = run_mbo(
            g,
            basis,
            &MboConfig {
                n_hat,
                seed,
                ..config.base.clone()
            },
        )?;
        Ok::<_, Error>((
            SweepEntry {
                n_hat,
                restart: r,
                seed,
                modularity: run.modularity(),
                n_communities: run.partition.n_communities(),
                iterations: run.iterations,
                converged: run.converged,
            },
            (run.partition, run.q_trace),
        ))
    });
    let mut table = Vec::with_capacity(jobs.len());
    let mut outputs = Vec::with_capacity(jobs.len());
    for run in runs {
        let (entry, out) = run?;
        table.push(entry);
        outputs.push(out);
    }
    let best = (0..table.len())
        .reduce(|a, b| {
            let (x, y) = (&table[a], &table[b]);
            let better = y.modularity > x.modularity
                || (y.modularity == x.modularity && y.n_communities < x.n_communities);
            if better {
                b
            } else {
                a
            }
        })
        .expect("jobs nonempty");
    info!(
        "multi-n: best n_hat = {} (restart {}), Q = {:.6}",
        table[best].n_hat, table[best].restart, table[best].modularity
    );
    let (partition, q_trace) = outputs.swap_remove(best);
    Ok(MultiRun {
        partition,
        best,
        table,
        q_trace,
    })
}
