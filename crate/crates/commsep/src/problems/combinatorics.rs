//! Exact binomial coefficients and lexicographic ranking of k-subsets.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `C(n, k)` as an arbitrary-precision integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `C(n, k)` in `u128`; panics on overflow (fine at desk scale).
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .expect("binomial overflow")
            / (i as u128 + 1);
    }
    acc
}

/// The `rank`-th (0-based) k-subset of `{0, ..., ground-1}` in lexicographic
/// order of sorted element lists.
pub fn unrank_subset(ground: u64, k: u64, mut rank: u128) -> Vec<u32> {
    debug_assert!(rank < binomial_u128(ground, k));
    let mut out = Vec::with_capacity(k as usize);
    let mut c = 0u64;
    let mut remaining = k;
    while remaining > 0 {
        let with_c = binomial_u128(ground - c - 1, remaining - 1);
        if rank < with_c {
            out.push(c as u32);
            remaining -= 1;
        } else {
            rank -= with_c;
        }
        c += 1;
    }
    out
}

/// Inverse of [`unrank_subset`]; `subset` must be sorted and within range.
pub fn rank_subset(ground: u64, subset: &[u32]) -> u128 {
    let k = subset.len() as u64;
    let mut rank: u128 = 0;
    let mut prev = 0u64;
    let mut remaining = k;
    for &e in subset {
        for c in prev..e as u64 {
            rank += binomial_u128(ground - c - 1, remaining - 1);
        }
        prev = e as u64 + 1;
        remaining -= 1;
    }
    rank
}
