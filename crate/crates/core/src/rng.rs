//! Deterministic randomness and low-discrepancy sampling.
//!
//! Every random stream in the crate is derived from one root seed by a
//! labelled split: the label selects the key, the index selects the ChaCha
//! stream. Two streams with different labels or indices never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Counter-based generator for the stream `(seed, label, index)`.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label));
    rng.set_stream(index);
    rng
}

/// Radical inverse of `index` in `base` (van der Corput).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// First `count` points of the Halton sequence in `[0,1)^dim`, skipping the
/// origin.
pub fn halton(count: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton supports at most {} dimensions", PRIMES.len());
    (1..=count as u64).map(|i| PRIMES[..dim].iter().map(|&b| radical_inverse(i, b)).collect()).collect()
}

/// Halton points mapped affinely into the box `lo[k]..hi[k]`.
pub fn halton_in_box(count: usize, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    halton(count, lo.len())
        .into_iter()
        .map(|p| p.iter().zip(lo.iter().zip(hi)).map(|(s, (a, b))| a + s * (b - a)).collect())
        .collect()
}
