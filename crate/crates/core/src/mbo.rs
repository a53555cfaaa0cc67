//! The Modularity MBO iteration.
//!
//! Each outer iteration runs `η` convex-splitting steps of
//! `∂f/∂t = −Lf + 2γ k ⊙ (f − mean(f))` in the truncated eigenbasis,
//! `a_s ← (a_s + b_s) / (1 + dt·λ_s)`, then thresholds every row to the nearest
//! simplex vertex. Iteration stops once the thresholded function repeats.

use std::collections::BTreeMap;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{default_n_eig, EigenBasis};
use crate::error::{Error, Result};
use crate::functional::{self, weighted_mean_with, Partition, PartitionFunction};
use crate::graph::Graph;
use crate::par;

/// Parameters of one MBO run.
#[derive(Debug, Clone, PartialEq)]
pub struct MboConfig {
    /// Resolution `γ`.
    pub gamma: f64,
    /// Maximum number of communities `n̂`.
    pub n_hat: usize,
    /// Diffusion steps per outer iteration.
    pub eta: usize,
    /// Time step.
    pub dt: f64,
    /// Number of eigenpairs the basis must hold.
    pub n_eig: usize,
    /// Cap on outer iterations.
    pub max_iter: usize,
    pub seed: u64,
    /// Partial ground truth fixed in the initial function.
    pub known_labels: Option<BTreeMap<usize, usize>>,
}

impl Default for MboConfig {
    fn default() -> Self {
        MboConfig {
            gamma: 1.0,
            n_hat: 2,
            eta: 5,
            dt: 1.0,
            n_eig: default_n_eig(usize::MAX),
            max_iter: 500,
            seed: 0,
            known_labels: None,
        }
    }
}

impl MboConfig {
    /// Default parameters sized for `basis`.
    pub fn for_basis(basis: &EigenBasis) -> Self {
        MboConfig {
            n_eig: basis.len(),
            ..MboConfig::default()
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_n_hat(mut self, n_hat: usize) -> Self {
        self.n_hat = n_hat;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_known_labels(mut self, known: BTreeMap<usize, usize>) -> Self {
        self.known_labels = Some(known);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_hat < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_hat must be at least 2, got {}",
                self.n_hat
            )));
        }
        if self.eta == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "eta and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of [`run_mbo`].
#[derive(Debug, Clone, PartialEq)]
pub struct MboRun {
    /// Compacted partition; `n_communities() ≤ n̂`.
    pub partition: Partition,
    /// Modularity of the thresholded partition after every outer iteration.
    pub q_trace: Vec<f64>,
    /// Outer iterations performed.
    pub iterations: usize,
    /// Whether the thresholded function stopped changing before `max_iter`.
    pub converged: bool,
}

impl MboRun {
    /// Modularity of the returned partition.
    pub fn modularity(&self) -> f64 {
        self.q_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Node weights and balance coefficient of the energy being minimized.
///
/// On the whole graph `gamma_eff = γ`; on a community `S` it is `γ m^(S)/m`
/// with the original strengths restricted to `S`.
pub(crate) struct Problem<'a> {
    pub strengths: &'a [f64],
    pub two_m: f64,
    pub gamma_eff: f64,
}

/// Coefficients of the current iterate in the eigenbasis.
#[derive(Debug, Clone)]
pub struct MboState {
    a: Vec<f64>,
    b: Vec<f64>,
    f: PartitionFunction,
    iteration: usize,
}

impl MboState {
    /// Synchronizes a state with the indicator `f`.
    pub fn new(g: &Graph, basis: &EigenBasis, f: PartitionFunction, config: &MboConfig) -> Self {
        let problem = Problem {
            strengths: g.strengths(),
            two_m: g.total_weight(),
            gamma_eff: config.gamma,
        };
        Self::with_problem(&problem, basis, f, config.dt)
    }

    fn with_problem(problem: &Problem<'_>, basis: &EigenBasis, f: PartitionFunction, dt: f64) -> Self {
        let a = project(basis, &f);
        let b = project(basis, &forcing(problem, &f, dt));
        MboState {
            a,
            b,
            f,
            iteration: 0,
        }
    }

    /// `a_s ∈ ℝ^n̂`, one row per eigenpair.
    pub fn coefficients(&self, s: usize) -> &[f64] {
        let n_hat = self.f.n_cols();
        &self.a[s * n_hat..(s + 1) * n_hat]
    }

    pub fn forcing(&self, s: usize) -> &[f64] {
        let n_hat = self.f.n_cols();
        &self.b[s * n_hat..(s + 1) * n_hat]
    }

    /// The current function: an indicator after thresholding, real-valued after diffusion.
    pub fn function(&self) -> &PartitionFunction {
        &self.f
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}

/// `⟨f, φ_s⟩` for every eigenvector, as an `n_eig × n̂` row-major matrix.
fn project(basis: &EigenBasis, f: &PartitionFunction) -> Vec<f64> {
    let n_hat = f.n_cols();
    let rows = par::map_collect(basis.len(), |s| {
        let phi = basis.eigenvector(s);
        let mut acc = vec![0.0; n_hat];
        for (i, &p) in phi.iter().enumerate() {
            for (c, x) in acc.iter_mut().zip(f.row(i)) {
                *c += p * x;
            }
        }
        acc
    });
    rows.concat()
}

/// `f = Σ_s φ_s a_s`.
fn reconstruct(basis: &EigenBasis, a: &[f64], f: &mut PartitionFunction) {
    let n_hat = f.n_cols();
    let n_eig = basis.len();
    let rows_per_chunk = par::BLOCK;
    par::for_each_chunk_mut(f.values_mut(), rows_per_chunk * n_hat, |c, chunk| {
        let first = c * rows_per_chunk;
        for (r, row) in chunk.chunks_mut(n_hat).enumerate() {
            let i = first + r;
            row.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..n_eig {
                let p = basis.eigenvector(s)[i];
                for (x, c) in row.iter_mut().zip(&a[s * n_hat..(s + 1) * n_hat]) {
                    *x += p * c;
                }
            }
        }
    });
}

/// `2 γ dt k ⊙ (f − mean(f))`.
fn forcing(problem: &Problem<'_>, f: &PartitionFunction, dt: f64) -> PartitionFunction {
    let mean = weighted_mean_with(problem.strengths, problem.two_m, f);
    let n_hat = f.n_cols();
    let scale = 2.0 * problem.gamma_eff * dt;
    let mut out = f.clone();
    let k = problem.strengths;
    par::for_each_chunk_mut(out.values_mut(), par::BLOCK * n_hat, |c, chunk| {
        let first = c * par::BLOCK;
        for (r, row) in chunk.chunks_mut(n_hat).enumerate() {
            let w = scale * k[first + r];
            for (x, m) in row.iter_mut().zip(&mean) {
                *x = w * (*x - m);
            }
        }
    });
    out
}

/// Random indicator `f⁰`: each row uniform over the `n̂` vertices, known rows fixed.
pub fn initial_function(
    n_nodes: usize,
    n_hat: usize,
    seed: u64,
    known_labels: Option<&BTreeMap<usize, usize>>,
) -> Result<PartitionFunction> {
    if n_hat < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_hat must be at least 2, got {n_hat}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n_nodes).map(|_| rng.gen_range(0..n_hat)).collect();
    if let Some(known) = known_labels {
        for (&node, &label) in known {
            if node >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    index: node,
                    n_nodes,
                });
            }
            if label >= n_hat {
                return Err(Error::KnownLabelOutOfRange { node, label, n_hat });
            }
            labels[node] = label;
        }
    }
    Partition::new(labels).indicator(n_hat)
}

/// Runs the `η` inner diffusion steps, leaving the real-valued `f̂` in the state.
pub fn diffuse(state: &mut MboState, basis: &EigenBasis, g: &Graph, config: &MboConfig) {
    let problem = Problem {
        strengths: g.strengths(),
        two_m: g.total_weight(),
        gamma_eff: config.gamma,
    };
    diffuse_with(state, basis, &problem, config);
}

fn diffuse_with(state: &mut MboState, basis: &EigenBasis, problem: &Problem<'_>, config: &MboConfig) {
    let n_hat = state.f.n_cols();
    for _ in 0..config.eta {
        for (s, &lambda) in basis.eigenvalues().iter().enumerate() {
            let denom = 1.0 + config.dt * lambda;
            for l in s * n_hat..(s + 1) * n_hat {
                state.a[l] = (state.a[l] + state.b[l]) / denom;
            }
        }
        reconstruct(basis, &state.a, &mut state.f);
        state.b = project(basis, &forcing(problem, &state.f, config.dt));
    }
}

/// Snaps every row to `e_g` with `g = argmax_l f̂^(l)`, lowest index on ties.
pub fn threshold(f_hat: &PartitionFunction) -> PartitionFunction {
    let labels = f_hat.argmax_labels();
    let mut f = PartitionFunction::zeros(f_hat.n_rows(), f_hat.n_cols());
    for (i, &l) in labels.iter().enumerate() {
        f.row_mut(i)[l] = 1.0;
    }
    f
}

pub(crate) struct RawRun {
    pub labels: Vec<usize>,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// The outer loop; `score` is evaluated on the labels after every threshold.
pub(crate) fn iterate(
    problem: &Problem<'_>,
    basis: &EigenBasis,
    config: &MboConfig,
    f0: PartitionFunction,
    score: impl Fn(&[usize]) -> f64,
) -> RawRun {
    let mut labels = f0.argmax_labels();
    let mut state = MboState::with_problem(problem, basis, f0, config.dt);
    let mut trace = Vec::new();
    let mut converged = false;
    while state.iteration < config.max_iter {
        diffuse_with(&mut state, basis, problem, config);
        let next = state.f.argmax_labels();
        state.f = threshold(&state.f);
        state.iteration += 1;
        trace.push(score(&next));
        let same = next == labels;
        labels = next;
        if same {
            converged = true;
            break;
        }
        state.a = project(basis, &state.f);
        state.b = project(basis, &forcing(problem, &state.f, config.dt));
    }
    debug!(
        "mbo: n_hat={} iterations={} converged={}",
        config.n_hat, state.iteration, converged
    );
    RawRun {
        labels,
        trace,
        iterations: state.iteration,
        converged,
    }
}

pub(crate) fn check_basis(g: &Graph, basis: &EigenBasis, config: &MboConfig) -> Result<()> {
    if basis.n_nodes() != g.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: g.n_nodes(),
            found: basis.n_nodes(),
        });
    }
    if basis.len() != config.n_eig {
        return Err(Error::BasisMismatch {
            basis: basis.len(),
            config: config.n_eig,
        });
    }
    Ok(())
}

/// Minimizes the modularity energy on `g` from a seeded random start.
///
/// Fails on graphs with isolated nodes, since those carry no strength and
/// cannot be assigned by the balance term.
pub fn run_mbo(g: &Graph, basis: &EigenBasis, config: &MboConfig) -> Result<MboRun> {
    config.validate()?;
    if g.total_weight() <= 0.0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(&i) = g.isolated_nodes().first() {
        return Err(Error::IsolatedNode(i));
    }
    check_basis(g, basis, config)?;
    let f0 = initial_function(
        g.n_nodes(),
        config.n_hat,
        config.seed,
        config.known_labels.as_ref(),
    )?;
    let problem = Problem {
        strengths: g.strengths(),
        two_m: g.total_weight(),
        gamma_eff: config.gamma,
    };
    let raw = iterate(&problem, basis, config, f0, |labels| {
        functional::modularity(g, &Partition::new(labels.to_vec()).compacted(), config.gamma)
            .expect("graph has positive weight")
    });
    Ok(MboRun {
        partition: Partition::new(raw.labels).compacted(),
        q_trace: raw.trace,
        iterations: raw.iterations,
        converged: raw.converged,
    })
}
