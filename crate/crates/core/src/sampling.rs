//! Seeded sampling shared by split construction and the probe's held-out
//! split. ChaCha8 seeded through `seed_from_u64`; bounded integers use
//! Lemire's multiply-and-reject method so draws are exactly uniform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `[0, n)`.
pub(crate) fn bounded(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(n);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

/// Partial Fisher-Yates: the first `k` slots become a uniform sample
/// without replacement, in draw order.
pub(crate) fn partial_shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T], k: usize) {
    let k = k.min(items.len());
    for i in 0..k {
        let j = i + bounded(rng, (items.len() - i) as u64) as usize;
        items.swap(i, j);
    }
}

/// `k` sorted indices drawn without replacement from `0..n`.
pub(crate) fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    partial_shuffle(rng, &mut idx, k);
    idx.truncate(k.min(n));
    idx.sort_unstable();
    idx
}
