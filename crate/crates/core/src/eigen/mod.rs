//! Smallest eigenpairs of the graph Laplacian.
//!
//! The solver is a thick-restart Lanczos iteration with full (two-pass classical
//! Gram–Schmidt) reorthogonalization. A single Krylov sequence sees only one
//! vector per eigenspace, so after the first solve converges the operator is
//! deflated by the accepted vectors and probed again from a fresh random start;
//! any Ritz value found below the current largest accepted eigenvalue is a
//! missed copy of a repeated eigenvalue and is merged in. When the Krylov basis
//! grows to the full dimension the decomposition is exact and probing is skipped.

mod cache;

pub use cache::{cache_key, load, load_or_compute, save, CACHE_ENV};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::par;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Default eigenbasis size: 80 up to 20 000 nodes, 100 above, capped at `n_nodes`.
pub fn default_n_eig(n_nodes: usize) -> usize {
    let n = if n_nodes <= 20_000 { 80 } else { 100 };
    n.min(n_nodes)
}

/// A real symmetric linear operator.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Upper bound on the spectral radius; sets the breakdown scale.
    fn norm_bound(&self) -> f64;
}

impl SymmetricOperator for Laplacian<'_> {
    fn dim(&self) -> usize {
        Laplacian::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        Laplacian::apply(self, x, y)
    }

    fn norm_bound(&self) -> f64 {
        Laplacian::norm_bound(self)
    }
}

/// The `n_eig` smallest eigenpairs, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    n_nodes: usize,
    values: Vec<f64>,
    // Column-major: eigenvector `s` occupies `vectors[s * n_nodes..(s + 1) * n_nodes]`.
    vectors: Vec<f64>,
    residuals: Vec<f64>,
}

impl EigenBasis {
    pub(crate) fn from_parts(
        n_nodes: usize,
        values: Vec<f64>,
        vectors: Vec<f64>,
        residuals: Vec<f64>,
    ) -> Self {
        assert_eq!(vectors.len(), n_nodes * values.len());
        assert_eq!(residuals.len(), values.len());
        EigenBasis {
            n_nodes,
            values,
            vectors,
            residuals,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvalue(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn eigenvector(&self, s: usize) -> &[f64] {
        &self.vectors[s * self.n_nodes..(s + 1) * self.n_nodes]
    }

    pub(crate) fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// `‖Lφ_s − λ_s φ_s‖₂` measured when the basis was computed.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Recomputes residual norms against `op`.
    pub fn residual_norms<O: SymmetricOperator>(&self, op: &O) -> Vec<f64> {
        let mut y = vec![0.0; self.n_nodes];
        (0..self.len())
            .map(|s| {
                let phi = self.eigenvector(s);
                op.apply(phi, &mut y);
                let lambda = self.values[s];
                y.iter()
                    .zip(phi)
                    .map(|(a, b)| (a - lambda * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// `max_{s,t} |⟨φ_s, φ_t⟩ − δ_st|`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.len();
        let mut worst: f64 = 0.0;
        for s in 0..k {
            for t in s..k {
                let d = par::dot(self.eigenvector(s), self.eigenvector(t));
                let target = if s == t { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// First `k` pairs.
    pub fn truncated(&self, k: usize) -> EigenBasis {
        let k = k.min(self.len());
        EigenBasis {
            n_nodes: self.n_nodes,
            values: self.values[..k].to_vec(),
            vectors: self.vectors[..k * self.n_nodes].to_vec(),
            residuals: self.residuals[..k].to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance: `‖Lφ − λφ‖ ≤ tol · max(1, λ)`.
    pub tol: f64,
    /// Seed for the Lanczos start vectors.
    pub seed: u64,
    /// Krylov basis size before a restart; defaults to `10 · n_eig + 100`.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: DEFAULT_TOL,
            seed: 0x6d6f_646d_626f,
            krylov_dim: None,
            max_restarts: 300,
        }
    }
}

/// The `n_eig` smallest eigenpairs of `l` with default options.
pub fn smallest_eigenpairs(l: &Laplacian<'_>, n_eig: usize, tol: f64) -> Result<EigenBasis> {
    smallest_eigenpairs_with(
        l,
        n_eig,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

// Cap on pairs requested by each deflated probing run.
const PROBE_PAIRS: usize = 8;

pub fn smallest_eigenpairs_with<O: SymmetricOperator>(
    op: &O,
    n_eig: usize,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let n = op.dim();
    if n_eig == 0 {
        return Err(Error::InvalidParameter("n_eig must be at least 1".into()));
    }
    if n_eig > n {
        return Err(Error::TooManyEigenpairs {
            requested: n_eig,
            dim: n,
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eigensolver tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if op.norm_bound() == 0.0 {
        // The zero operator: any orthonormal set is an eigenbasis.
        let mut vectors = vec![0.0; n_eig * n];
        for s in 0..n_eig {
            vectors[s * n + s] = 1.0;
        }
        return Ok(EigenBasis::from_parts(n, vec![0.0; n_eig], vectors, vec![0.0; n_eig]));
    }
    let krylov = opts.krylov_dim.unwrap_or(10 * n_eig + 100);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let first = lanczos(op, n_eig, &[], krylov, opts, &mut rng);
    if !first.converged {
        return Err(no_convergence(opts.tol, first.values, first.estimates));
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = first
        .values
        .iter()
        .copied()
        .zip(first.vectors.chunks(n.max(1)).map(|c| c.to_vec()))
        .collect();

    let exact = first.exhausted;
    while !exact && pairs.len() < n {
        let locked: Vec<f64> = pairs.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let want = (n - pairs.len()).min(n_eig).min(PROBE_PAIRS);
        let probe = lanczos(op, want, &locked, krylov, opts, &mut rng);
        if !probe.converged {
            return Err(no_convergence(opts.tol, probe.values, probe.estimates));
        }
        let top = pairs.last().map(|p| p.0).unwrap_or(f64::INFINITY);
        let threshold = top - opts.tol * top.abs().max(1.0);
        let missed: Vec<(f64, Vec<f64>)> = probe
            .values
            .iter()
            .copied()
            .zip(probe.vectors.chunks(n).map(|c| c.to_vec()))
            .filter(|(v, _)| *v < threshold)
            .collect();
        if missed.is_empty() {
            break;
        }
        log::debug!("eigensolver: merged {} missed eigenpairs", missed.len());
        pairs.extend(missed);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.truncate(n_eig);
    }

    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vectors: Vec<f64> = pairs.into_iter().flat_map(|p| p.1).collect();
    let mut basis = EigenBasis::from_parts(n, values, vectors, vec![0.0; n_eig]);
    basis.residuals = basis.residual_norms(op);
    let worst = basis
        .values
        .iter()
        .zip(&basis.residuals)
        .map(|(l, r)| r / l.abs().max(1.0))
        .fold(0.0, f64::max);
    if worst > opts.tol {
        return Err(Error::NoConvergence {
            tol: opts.tol,
            worst_residual: worst,
            eigenvalues: basis.values,
            residuals: basis.residuals,
        });
    }
    Ok(basis)
}

fn no_convergence(tol: f64, values: Vec<f64>, residuals: Vec<f64>) -> Error {
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    Error::NoConvergence {
        tol,
        worst_residual: worst,
        eigenvalues: values,
        residuals,
    }
}

struct Outcome {
    values: Vec<f64>,
    vectors: Vec<f64>,
    estimates: Vec<f64>,
    converged: bool,
    // The Krylov basis spans the whole complement of the locked vectors.
    exhausted: bool,
}

/// Removes from `w` its components along the `n`-vectors stored column-major in
/// `locked` and `basis` (two passes) and returns the accumulated coefficients
/// against `basis`.
fn orthogonalize(w: &mut [f64], locked: &[f64], basis: &[f64], n: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len() / n];
    for _ in 0..2 {
        project_out(w, locked, n);
        for (acc, h) in coeffs.iter_mut().zip(project_out(w, basis, n)) {
            *acc += h;
        }
    }
    coeffs
}

fn project_out(w: &mut [f64], set: &[f64], n: usize) -> Vec<f64> {
    let count = set.len() / n;
    if count == 0 {
        return Vec::new();
    }
    let h: Vec<f64> = par::map_collect(count, |c| par::dot(&set[c * n..(c + 1) * n], w));
    par::for_each_chunk_mut(w, par::BLOCK, |b, rows| {
        let base = b * par::BLOCK;
        for (c, &hc) in h.iter().enumerate() {
            let col = &set[c * n + base..c * n + base + rows.len()];
            for (x, v) in rows.iter_mut().zip(col) {
                *x -= hc * v;
            }
        }
    });
    h
}

fn random_orthogonal(
    rng: &mut ChaCha8Rng,
    locked: &[f64],
    basis: &[f64],
    n: usize,
) -> Option<Vec<f64>> {
    for _ in 0..5 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let before = par::norm(&v);
        orthogonalize(&mut v, locked, basis, n);
        let after = par::norm(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            return Some(v);
        }
    }
    None
}

fn lanczos<O: SymmetricOperator>(
    op: &O,
    want: usize,
    locked: &[f64],
    krylov: usize,
    opts: &EigenOptions,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    let n = op.dim();
    let avail = n - locked.len() / n.max(1);
    let want = want.min(avail);
    let m = krylov.max(want + 2).min(avail);
    let breakdown = 1e-10 * op.norm_bound().max(1.0);
    let inner_tol = 0.1 * opts.tol;

    let mut basis = vec![0.0; m * n];
    let mut t = vec![0.0; m * m];
    let Some(v0) = random_orthogonal(rng, locked, &[], n) else {
        return Outcome {
            values: Vec::new(),
            vectors: Vec::new(),
            estimates: Vec::new(),
            converged: false,
            exhausted: true,
        };
    };
    basis[..n].copy_from_slice(&v0);

    let mut j = 0;
    let mut restarts = 0;
    let mut w = vec![0.0; n];
    loop {
        let mut last_beta = 0.0;
        let mut residual_dir: Option<Vec<f64>> = None;
        let mut exhausted = false;
        while j < m {
            op.apply(&basis[j * n..(j + 1) * n], &mut w);
            let h = orthogonalize(&mut w, locked, &basis[..(j + 1) * n], n);
            for (i, &hi) in h.iter().enumerate() {
                t[i * m + j] = hi;
                t[j * m + i] = hi;
            }
            let beta = par::norm(&w);
            let next = if beta > breakdown {
                let inv = 1.0 / beta;
                Some(w.iter().map(|x| x * inv).collect::<Vec<f64>>())
            } else {
                None
            };
            if j + 1 == m {
                last_beta = if next.is_some() { beta } else { 0.0 };
                residual_dir = next;
                j += 1;
                break;
            }
            let v = match next {
                Some(v) => v,
                None => match random_orthogonal(rng, locked, &basis[..(j + 1) * n], n) {
                    Some(v) => v,
                    None => {
                        exhausted = true;
                        j += 1;
                        break;
                    }
                },
            };
            basis[(j + 1) * n..(j + 2) * n].copy_from_slice(&v);
            j += 1;
        }
        let k = j;
        exhausted |= k == avail;

        let tk = DMatrix::from_fn(k, k, |r, c| t[r * m + c]);
        let eig = SymmetricEigen::new(tk);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let estimates: Vec<f64> = order
            .iter()
            .map(|&i| (last_beta * eig.eigenvectors[(k - 1, i)]).abs())
            .collect();
        let converged = exhausted
            || (0..want).all(|r| estimates[r] <= inner_tol * theta[r].abs().max(1.0));

        if converged || restarts >= opts.max_restarts {
            let take = want.min(k);
            let vectors = ritz_vectors(&basis, n, k, &eig.eigenvectors, &order[..take]);
            return Outcome {
                values: theta[..take].to_vec(),
                vectors,
                estimates: estimates[..take].to_vec(),
                converged,
                exhausted,
            };
        }

        let keep = (want + (m - want) / 2).min(m - 1);
        let kept = ritz_vectors(&basis, n, k, &eig.eigenvectors, &order[..keep]);
        basis[..keep * n].copy_from_slice(&kept);
        // A zero residual means every estimate vanished and we returned above.
        let resid = match residual_dir
            .or_else(|| random_orthogonal(rng, locked, &basis[..keep * n], n))
        {
            Some(r) => r,
            None => {
                return Outcome {
                    values: theta[..want].to_vec(),
                    vectors: kept[..want * n].to_vec(),
                    estimates: estimates[..want].to_vec(),
                    converged: false,
                    exhausted,
                }
            }
        };
        basis[keep * n..(keep + 1) * n].copy_from_slice(&resid);
        t.iter_mut().for_each(|x| *x = 0.0);
        for (i, th) in theta.iter().take(keep).enumerate() {
            t[i * m + i] = *th;
        }
        j = keep;
        restarts += 1;
        log::trace!(
            "lanczos restart {restarts}: worst wanted estimate {:e}",
            estimates[..want].iter().copied().fold(0.0, f64::max)
        );
    }
}

/// `X[:, r] = V · y_{cols[r]}` for the first `k` basis vectors.
fn ritz_vectors(basis: &[f64], n: usize, k: usize, y: &DMatrix<f64>, cols: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; cols.len() * n];
    let coeffs: Vec<Vec<f64>> = cols
        .iter()
        .map(|&c| (0..k).map(|r| y[(r, c)]).collect())
        .collect();
    let cols_out: Vec<Vec<f64>> = par::map_slice(&coeffs, |yc| {
        let mut v = vec![0.0; n];
        for (c, &coef) in yc.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            for (x, b) in v.iter_mut().zip(&basis[c * n..(c + 1) * n]) {
                *x += coef * b;
            }
        }
        v
    });
    for (r, v) in cols_out.into_iter().enumerate() {
        out[r * n..(r + 1) * n].copy_from_slice(&v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

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

    #[test]
    fn path_spectrum() {
        let g = path3();
        let b = smallest_eigenpairs(&g.laplacian(), 3, 1e-8).unwrap();
        for (got, want) in b.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(b.orthonormality_error() < 1e-10);
    }

    #[test]
    fn disconnected_kernel_is_two_dimensional() {
        let g = two_triangles();
        let b = smallest_eigenpairs(&g.laplacian(), 2, 1e-8).unwrap();
        assert!(b.eigenvalue(0).abs() < 1e-10);
        assert!(b.eigenvalue(1).abs() < 1e-10);
        let full = smallest_eigenpairs(&g.laplacian(), 6, 1e-8).unwrap();
        let expected = [0.0, 0.0, 3.0, 3.0, 3.0, 3.0];
        for (got, want) in full.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn connected_graph_has_constant_null_vector() {
        let g = path3();
        let b = smallest_eigenpairs(&g.laplacian(), 1, 1e-8).unwrap();
        let phi = b.eigenvector(0);
        let c = 1.0 / 3f64.sqrt();
        assert!(phi.iter().all(|x| (x.abs() - c).abs() < 1e-10));
    }

    #[test]
    fn rejects_too_many_pairs() {
        let g = path3();
        assert!(matches!(
            smallest_eigenpairs(&g.laplacian(), 4, 1e-8),
            Err(Error::TooManyEigenpairs { requested: 4, dim: 3 })
        ));
        assert!(smallest_eigenpairs(&g.laplacian(), 0, 1e-8).is_err());
    }

    #[test]
    fn non_convergence_reports_residuals() {
        // A ring of 400 nodes with a 4-vector Krylov space and no restarts cannot
        // resolve its clustered low spectrum.
        let edges: Vec<_> = (0..400).map(|i| (i, (i + 1) % 400, 1.0)).collect();
        let g = Graph::from_edges(400, edges).unwrap();
        let opts = EigenOptions {
            krylov_dim: Some(4),
            max_restarts: 0,
            ..EigenOptions::default()
        };
        match smallest_eigenpairs_with(&g.laplacian(), 2, &opts) {
            Err(Error::NoConvergence { residuals, .. }) => assert_eq!(residuals.len(), 2),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn restarted_solve_on_ring() {
        // Ring Laplacian eigenvalues are 2 − 2cos(2πj/n), each nonzero one doubled.
        let n = 300;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        let g = Graph::from_edges(n, edges).unwrap();
        let opts = EigenOptions {
            krylov_dim: Some(60),
            ..EigenOptions::default()
        };
        let b = smallest_eigenpairs_with(&g.laplacian(), 7, &opts).unwrap();
        let mut expected: Vec<f64> = (0..n)
            .map(|j| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (got, want) in b.eigenvalues().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(b.orthonormality_error() < 1e-8);
    }
}
