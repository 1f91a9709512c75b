//! On-disk eigendecomposition cache.
//!
//! File layout, all little-endian:
//! magic `HKEIG001` (8 bytes), content hash (32 bytes), dim (u64), count (u64),
//! full flag (u64), `count` f64 eigenvalues, then `dim * count` complex entries
//! of the eigenvector columns stored as interleaved f64 (re, im), column-major.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::Mat;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::eigen::{EigenDecomposition, EigenMode};
use crate::error::{Error, Result};
use crate::manybody::{HoppingSet, InteractionSet};
use crate::lattice::LatticeSpec;
use crate::C64;

const MAGIC: &[u8; 8] = b"HKEIG001";

pub type ContentHash = [u8; 32];

#[derive(Serialize)]
struct KeyMaterial<'a> {
    lattice: &'a LatticeSpec,
    hoppings: &'a HoppingSet,
    interactions: &'a InteractionSet,
    n_particles: usize,
    mode: EigenMode,
    solver: &'a str,
}

/// Hash of everything that determines a decomposition. The hoppings passed in
/// are the twisted ones, so the twist is part of the key.
pub fn content_hash(
    lattice: &LatticeSpec,
    twisted_hoppings: &HoppingSet,
    interactions: &InteractionSet,
    n_particles: usize,
    mode: EigenMode,
    solver: &str,
) -> ContentHash {
    let km = KeyMaterial {
        lattice,
        hoppings: twisted_hoppings,
        interactions,
        n_particles,
        mode,
        solver,
    };
    let bytes = serde_json::to_vec(&km).expect("key material serializes");
    Sha256::digest(&bytes).into()
}

pub fn hex(hash: &ContentHash) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(hash: &ContentHash, eig: &EigenDecomposition) -> Vec<u8> {
    let (dim, count) = (eig.dim(), eig.count());
    let mut out = Vec::with_capacity(64 + 8 * count + 16 * dim * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(hash);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out.extend_from_slice(&(eig.full as u64).to_le_bytes());
    for v in &eig.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for j in 0..count {
        for i in 0..dim {
            let z = eig.vectors[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn corrupt(msg: &str) -> Error {
    Error::Resource(format!("corrupt cache entry: {msg}"))
}

pub fn decode(bytes: &[u8]) -> Result<(ContentHash, EigenDecomposition)> {
    if bytes.len() < 64 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad header"));
    }
    let mut hash = [0u8; 32];
    hash.copy_from_slice(&bytes[8..40]);
    let word = |k: usize| u64::from_le_bytes(bytes[40 + 8 * k..48 + 8 * k].try_into().unwrap());
    let (dim, count, full) = (word(0) as usize, word(1) as usize, word(2) != 0);
    let expected = 64usize
        .checked_add(count.checked_mul(8).ok_or_else(|| corrupt("size"))?)
        .and_then(|s| s.checked_add(dim.checked_mul(count)?.checked_mul(16)?))
        .ok_or_else(|| corrupt("size"))?;
    if bytes.len() != expected {
        return Err(corrupt("length mismatch"));
    }
    let f = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let values = (0..count).map(|k| f(64 + 8 * k)).collect();
    let base = 64 + 8 * count;
    let vectors = Mat::from_fn(dim, count, |i, j| {
        let off = base + 16 * (j * dim + i);
        C64::new(f(off), f(off + 8))
    });
    Ok((
        hash,
        EigenDecomposition {
            values,
            vectors,
            full,
        },
    ))
}

/// Directory of cache files named by content hash, with hit/miss counters.
#[derive(Debug)]
pub struct EigenCache {
    root: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

/// Environment variable overriding the cache root.
pub const CACHE_ENV: &str = "HALLKIT_CACHE_DIR";

impl EigenCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EigenCache {
            root: root.into(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// `$HALLKIT_CACHE_DIR`, else `.hallkit-cache` in the working directory.
    pub fn default_root() -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".hallkit-cache"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, hash: &ContentHash) -> PathBuf {
        self.root.join(format!("{}.eig", hex(hash)))
    }

    pub fn get(&self, hash: &ContentHash) -> Result<Option<EigenDecomposition>> {
        let p = self.path(hash);
        if !p.exists() {
            self.misses.fetch_add(1, Ordering::Relaxed);
            return Ok(None);
        }
        let mut bytes = Vec::new();
        fs::File::open(&p)?.read_to_end(&mut bytes)?;
        let (h, eig) = decode(&bytes)?;
        if &h != hash {
            return Err(corrupt("hash mismatch"));
        }
        self.hits.fetch_add(1, Ordering::Relaxed);
        Ok(Some(eig))
    }

    pub fn put(&self, hash: &ContentHash, eig: &EigenDecomposition) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        let p = self.path(hash);
        let tmp = p.with_extension(format!("tmp{}", std::process::id()));
        fs::File::create(&tmp)?.write_all(&encode(hash, eig))?;
        fs::rename(tmp, p)?;
        Ok(())
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// (file name, size in bytes) of every entry, sorted by name.
    pub fn entries(&self) -> Result<Vec<(String, u64)>> {
        let mut out = Vec::new();
        if !self.root.exists() {
            return Ok(out);
        }
        for e in fs::read_dir(&self.root)? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if name.ends_with(".eig") {
                out.push((name, e.metadata()?.len()));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Removes every entry; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        let entries = self.entries()?;
        for (name, _) in &entries {
            fs::remove_file(self.root.join(name))?;
        }
        Ok(entries.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let eig = EigenDecomposition {
            values: vec![-1.5, 0.25],
            vectors: Mat::from_fn(3, 2, |i, j| C64::new(i as f64 + 0.5, j as f64 - 0.125)),
            full: false,
        };
        let hash = [7u8; 32];
        let bytes = encode(&hash, &eig);
        assert_eq!(bytes.len(), 64 + 16 + 96);
        let (h, back) = decode(&bytes).unwrap();
        assert_eq!(h, hash);
        assert_eq!(back.values, eig.values);
        assert_eq!(back.vectors, eig.vectors);
        assert!(!back.full);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
