//! Morgan (ECFP-style) fingerprints and Tanimoto similarity.
//!
//! Identifiers are 64-bit hashes of iteratively grown atom environments,
//! computed with a pinned FNV-1a seed so fingerprints are bit-exact across
//! runs and platforms. Folded bits set position `id % n_bits`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chemcore::{ring_info, Molecule};
use crate::rng::{FNV_OFFSET, FNV_PRIME};

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_N_BITS: usize = 2048;

// Domain-separation constant mixed into every environment hash.
const HASH_SEED: u64 = 0x4d6f_6c46_7573_6e31; // "MolFusn1"

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FingerprintError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    /// Hashed environment identifiers, all radii, deduplicated.
    pub identifiers: BTreeSet<u64>,
    /// Folded bit vector, packed 64 bits per word.
    bits: Vec<u64>,
    n_bits: usize,
}

impl Fingerprint {
    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_bits(&self) -> Vec<usize> {
        (0..self.n_bits).filter(|&i| self.bit(i)).collect()
    }

    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }
}

struct Hasher(u64);

impl Hasher {
    fn new() -> Self {
        let mut h = Hasher(FNV_OFFSET);
        h.u64(HASH_SEED);
        h
    }

    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(FNV_PRIME);
    }

    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }

    fn bytes(&mut self, bs: &[u8]) {
        for &b in bs {
            self.byte(b);
        }
    }

    fn finish(self) -> u64 {
        self.0
    }
}

/// Initial atom invariant: (element, heavy degree, formal charge, attached
/// hydrogens, in-ring flag).
fn initial_invariant(mol: &Molecule, atom: usize, in_ring: bool) -> u64 {
    let a = &mol.atoms[atom];
    let mut h = Hasher::new();
    h.bytes(a.element.symbol().as_bytes());
    h.byte(0xff); // separator so "C"+"l" never collides with "Cl"
    h.byte(mol.degree(atom) as u8);
    h.byte(a.formal_charge as u8);
    h.byte(a.explicit_h);
    h.byte(in_ring as u8);
    h.finish()
}

/// Morgan fingerprint with the given radius, folded to `n_bits`.
pub fn morgan(mol: &Molecule, radius: u32, n_bits: usize) -> Fingerprint {
    assert!(n_bits > 0, "n_bits must be positive");
    let (atom_in_ring, _) = ring_info(mol);
    let n = mol.atom_count();
    let mut current: Vec<u64> = (0..n)
        .map(|i| initial_invariant(mol, i, atom_in_ring[i]))
        .collect();
    let mut identifiers: BTreeSet<u64> = current.iter().copied().collect();
    for r in 1..=radius {
        let mut next = vec![0u64; n];
        for i in 0..n {
            let mut env: Vec<(u8, u64)> = mol
                .neighbors(i)
                .into_iter()
                .map(|(j, order)| (order.code(), current[j]))
                .collect();
            env.sort_unstable();
            if env.is_empty() {
                // No neighborhood to grow; the environment is unchanged.
                next[i] = current[i];
                continue;
            }
            let mut h = Hasher::new();
            h.u64(r as u64);
            h.u64(current[i]);
            for (code, id) in env {
                h.byte(code);
                h.u64(id);
            }
            next[i] = h.finish();
        }
        identifiers.extend(next.iter().copied());
        current = next;
    }
    let words = n_bits.div_ceil(64);
    let mut bits = vec![0u64; words];
    for &id in &identifiers {
        let pos = (id % n_bits as u64) as usize;
        bits[pos / 64] |= 1u64 << (pos % 64);
    }
    Fingerprint {
        identifiers,
        bits,
        n_bits,
    }
}

/// Tanimoto coefficient over folded bits. Both-empty returns 0.0.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.n_bits != b.n_bits {
        return Err(FingerprintError::LengthMismatch(a.n_bits, b.n_bits));
    }
    let mut inter = 0u32;
    let mut union = 0u32;
    for (x, y) in a.bits.iter().zip(&b.bits) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    if union == 0 {
        Ok(0.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n: usize,
    /// Row-major N×N Tanimoto coefficients.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Pairwise Tanimoto matrix over a molecule list.
pub fn similarity_matrix(mols: &[Molecule], radius: u32, n_bits: usize) -> SimilarityMatrix {
    let n = mols.len();
    let fps: Vec<Fingerprint> = mols.iter().map(|m| morgan(m, radius, n_bits)).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let t = tanimoto(&fps[i], &fps[j]).expect("equal n_bits by construction");
            values[i * n + j] = t;
            values[j * n + i] = t;
        }
    }
    SimilarityMatrix { n, values }
}
