//! On-disk eigenbasis cache keyed by a content hash of the edge list and `n_eig`.
//!
//! File layout (little endian): the magic `MODMBOEIG1\n`, `u64` node count,
//! `u64` pair count, then the eigenvalues, the residuals, and the eigenvectors
//! column by column, all as `f64`.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{smallest_eigenpairs_with, EigenBasis, EigenOptions};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "MODMBO_EIG_CACHE";

const MAGIC: &[u8] = b"MODMBOEIG1\n";

/// Hex SHA-256 of the canonical edge list and `n_eig`.
pub fn cache_key(g: &Graph, n_eig: usize) -> String {
    let mut h = Sha256::new();
    h.update(b"modmbo-eig-v1");
    h.update((g.n_nodes() as u64).to_le_bytes());
    for &(i, j, w) in g.edges() {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
        h.update(w.to_bits().to_le_bytes());
    }
    h.update((n_eig as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save(basis: &EigenBasis, path: &Path) -> Result<()> {
    let tmp = path.with_extension("eig.tmp");
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(fs::File::create(&tmp)?);
        out.write_all(MAGIC)?;
        out.write_all(&(basis.n_nodes() as u64).to_le_bytes())?;
        out.write_all(&(basis.len() as u64).to_le_bytes())?;
        for x in basis
            .eigenvalues()
            .iter()
            .chain(basis.residuals())
            .chain(basis.raw_vectors())
        {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()?;
        drop(out);
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<EigenBasis> {
    let mut input = BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let bad = |msg: &str| Error::Cache {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut magic = [0u8; 11];
    input
        .read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut BufReader<fs::File>| -> Result<u64> {
        input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next_u64(&mut input)? as usize;
    let k = next_u64(&mut input)? as usize;
    let mut rest = Vec::new();
    input
        .read_to_end(&mut rest)
        .map_err(|e| Error::io(path, e))?;
    let expected = k
        .checked_mul(n + 2)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| bad("size overflow"))?;
    if rest.len() != expected {
        return Err(bad("payload length does not match header"));
    }
    let floats: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if floats.iter().any(|x| !x.is_finite()) {
        return Err(bad("non-finite value"));
    }
    let values = floats[..k].to_vec();
    let residuals = floats[k..2 * k].to_vec();
    let vectors = floats[2 * k..].to_vec();
    Ok(EigenBasis::from_parts(n, values, vectors, residuals))
}

fn cache_path(dir: &Path, g: &Graph, n_eig: usize) -> PathBuf {
    dir.join(format!("{}.eig", cache_key(g, n_eig)))
}

/// Loads the basis for `(g, n_eig)` from `dir` or computes and stores it.
/// Returns the basis and whether it came from the cache.
pub fn load_or_compute(
    dir: &Path,
    g: &Graph,
    n_eig: usize,
    opts: &EigenOptions,
) -> Result<(EigenBasis, bool)> {
    let path = cache_path(dir, g, n_eig);
    if path.exists() {
        match load(&path) {
            Ok(b) if b.n_nodes() == g.n_nodes() && b.len() == n_eig => return Ok((b, true)),
            Ok(_) => log::warn!("{}: cached basis has the wrong shape, recomputing", path.display()),
            Err(e) => log::warn!("{e}; recomputing"),
        }
    }
    let basis = smallest_eigenpairs_with(&g.laplacian(), n_eig, opts)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save(&basis, &path)?;
    Ok((basis, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, 1.0))).unwrap()
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let g = ring(12);
        let (b, hit) = load_or_compute(dir.path(), &g, 5, &EigenOptions::default()).unwrap();
        assert!(!hit);
        let (again, hit) = load_or_compute(dir.path(), &g, 5, &EigenOptions::default()).unwrap();
        assert!(hit);
        assert_eq!(b, again);
    }

    #[test]
    fn key_depends_on_edges_and_size() {
        let g = ring(12);
        assert_ne!(cache_key(&g, 5), cache_key(&g, 6));
        assert_ne!(cache_key(&g, 5), cache_key(&ring(13), 5));
        assert_eq!(cache_key(&g, 5), cache_key(&ring(12), 5));
    }

    #[test]
    fn corrupt_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.eig");
        fs::write(&path, b"MODMBOEIG1\n\x01\x00").unwrap();
        assert!(matches!(load(&path), Err(Error::Cache { .. })));
    }
}
