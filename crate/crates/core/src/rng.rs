//! Deterministic random streams.
//!
//! Every sampled object in this crate is a pure function of a 64-bit seed.
//! The generator is ChaCha8 keyed through `ChaCha8Rng::seed_from_u64` (the
//! rand_core SplitMix64 key expansion), and all derived quantities below are
//! defined directly on the `next_u64` output stream:
//!
//! * `uniform_f64` takes the top 53 bits of one `next_u64` call and scales by
//!   2^-53, giving a uniform value in [0, 1).
//! * `uniform_index(m)` draws `next_u64` values, rejecting draws at or above
//!   the largest multiple of `m`, then reduces modulo `m`.
//! * `shuffle` is a Fisher-Yates pass from the top index down, swapping
//!   position `i` with `uniform_index(i + 1)`.
//!
//! Fixing these reductions here (rather than borrowing a library's sampling
//! internals) is what makes streams reproducible from another language: a
//! reimplementation only needs ChaCha8 plus the three reductions above.
//! Derived seeds for independent substreams come from `mix_seed`, a SplitMix64
//! round over the base seed and a salt.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 round; the standard finalizer with good avalanche behavior.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent substream seed from a base seed and a salt.
///
/// Used to give each trial, each matrix of a pair, and each auxiliary draw
/// (permutations, bootstrap resamples) its own stream without correlation.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ splitmix64(salt.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Fresh ChaCha8 stream for the given seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in [0, 1) from the top 53 bits of one `next_u64`.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in 0..m via rejection sampling (m must be nonzero).
pub fn uniform_index(rng: &mut ChaCha8Rng, m: u64) -> u64 {
    debug_assert!(m > 0, "uniform_index needs a nonempty range");
    // Largest multiple of m representable in u64; draws at or above it would
    // bias the low residues and are rejected.
    let zone = m.wrapping_mul(u64::MAX / m);
    loop {
        let x = rng.next_u64();
        if zone == 0 || x < zone {
            return x % m;
        }
    }
}

/// In-place Fisher-Yates shuffle driven by `uniform_index`.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}

/// Uniform permutation of 0..n as a vector.
pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut perm);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut r1 = rng_from(12345);
        let mut r2 = rng_from(12345);
        for _ in 0..64 {
            assert_eq!(r1.next_u64(), r2.next_u64());
        }
    }

    #[test]
    fn mixed_seeds_differ_across_salts() {
        let a = mix_seed(7, 0);
        let b = mix_seed(7, 1);
        let c = mix_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn uniform_f64_is_in_unit_interval() {
        let mut rng = rng_from(99);
        for _ in 0..10_000 {
            let u = uniform_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn uniform_index_covers_range_evenly() {
        let mut rng = rng_from(3);
        let mut counts = [0usize; 5];
        for _ in 0..50_000 {
            counts[uniform_index(&mut rng, 5) as usize] += 1;
        }
        for &c in &counts {
            // 10k expected per bucket; 4 sigma is about 360.
            assert!((c as i64 - 10_000).abs() < 400, "skewed bucket: {counts:?}");
        }
    }

    #[test]
    fn random_permutation_is_a_bijection() {
        let mut rng = rng_from(17);
        let perm = random_permutation(&mut rng, 100);
        let mut seen = vec![false; 100];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
    }
}
