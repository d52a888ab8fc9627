//! Classical two-way protocol harness: protocol trees over an accounted
//! binary channel, transcript-rectangle extraction at small `n`, and
//! rectangle analytics (restricted distributions, δ-labels, Razborov-style
//! mass ratios).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::combinatorics::{binomial_u128, rank_subset, unrank_subset};
use crate::problems::ProblemError;

pub mod rectangles;
pub mod tree;

pub use rectangles::{
    extract_rectangles, is_delta_labeled, razborov_masses, rectangle_stats, RazDistribution,
    RazborovMasses, Rectangle, RectanglePartition, RectangleStats,
};
pub use tree::{AnswerRule, BitRule, Owner, ProtocolTree, RunRecord, Transcript, TreeNode};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("instance shape does not match the protocol's declared shape")]
    ShapeMismatch,
    #[error("protocol uses public coins; fix them before rectangle extraction")]
    NotDeterministic,
    #[error("input space too large for exhaustive enumeration ({0} pairs)")]
    TooLargeForExhaustive(u128),
    #[error("message bits {used} exceed declared cost {declared}")]
    CostViolation { declared: u32, used: u32 },
    #[error("transcript group at leaf {0} is not a combinatorial rectangle")]
    NonRectanglePartition(usize),
    #[error("rectangle has an empty side")]
    EmptyRectangle,
    #[error("malformed protocol tree: {0}")]
    BadTree(String),
    #[error("distribution shape mismatch: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// The product input domain of a two-party problem: Alice holds a
/// `alice_k`-subset and Bob a `bob_k`-subset of `[ground]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairShape {
    pub ground: u32,
    pub alice_k: u32,
    pub bob_k: u32,
}

impl PairShape {
    /// The `PS`-shaped domain: `x` of size `n/2` and `y` of size `n` over
    /// `[n^2]`.
    pub fn ps(n: u32) -> Result<Self, ProtocolError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(ProtocolError::BadTree(format!("invalid n = {n}")));
        }
        Ok(PairShape {
            ground: n * n,
            alice_k: n / 2,
            bob_k: n,
        })
    }

    /// Disjointness-style domain over `[n]` with side sizes `k1 <= k2`.
    pub fn disjointness(n: u32, k1: u32, k2: u32) -> Result<Self, ProtocolError> {
        if k1 > k2 || k2 > n {
            return Err(ProtocolError::BadTree(format!(
                "invalid disjointness sizes k1={k1}, k2={k2}, n={n}"
            )));
        }
        Ok(PairShape {
            ground: n,
            alice_k: k1,
            bob_k: k2,
        })
    }

    pub fn alice_count(&self) -> u128 {
        binomial_u128(self.ground as u64, self.alice_k as u64)
    }

    pub fn bob_count(&self) -> u128 {
        binomial_u128(self.ground as u64, self.bob_k as u64)
    }

    pub fn pair_count(&self) -> u128 {
        self.alice_count() * self.bob_count()
    }

    fn side_k(&self, side: Owner) -> u32 {
        match side {
            Owner::Alice => self.alice_k,
            Owner::Bob => self.bob_k,
        }
    }

    pub fn side_count(&self, side: Owner) -> u128 {
        binomial_u128(self.ground as u64, self.side_k(side) as u64)
    }

    /// The rank-th input of a side, as sorted 1-based elements.
    pub fn side_set(&self, side: Owner, rank: u64) -> Vec<u32> {
        unrank_subset(self.ground as u64, self.side_k(side) as u64, rank as u128)
            .into_iter()
            .map(|e| e + 1)
            .collect()
    }

    pub fn side_rank(&self, side: Owner, set: &[u32]) -> Result<u64, ProtocolError> {
        if set.len() != self.side_k(side) as usize {
            return Err(ProtocolError::ShapeMismatch);
        }
        let zero_based: Vec<u32> = set.iter().map(|&e| e - 1).collect();
        Ok(rank_subset(self.ground as u64, &zero_based) as u64)
    }

    /// Bitmask form of a side's inputs (requires `ground <= 63`); bit
    /// `e - 1` marks element `e`.
    pub fn side_masks(&self, side: Owner) -> Result<Vec<u64>, ProtocolError> {
        if self.ground > 63 {
            return Err(ProtocolError::TooLargeForExhaustive(self.pair_count()));
        }
        let count = self.side_count(side) as u64;
        let k = self.side_k(side);
        let mut masks = Vec::with_capacity(count as usize);
        // Enumerate k-subsets in lexicographic order without re-unranking.
        let mut current: Vec<u32> = (0..k).collect();
        loop {
            let mask = current.iter().fold(0u64, |m, &e| m | (1u64 << e));
            masks.push(mask);
            // Next lexicographic k-subset of {0..ground-1}.
            let mut i = k as i64 - 1;
            while i >= 0 && current[i as usize] == self.ground - k + i as u32 {
                i -= 1;
            }
            if i < 0 {
                break;
            }
            current[i as usize] += 1;
            for j in (i as usize + 1)..k as usize {
                current[j] = current[j - 1] + 1;
            }
        }
        debug_assert_eq!(masks.len() as u64, count);
        Ok(masks)
    }
}

#[cfg(test)]
mod shape_tests {
    use super::*;

    #[test]
    fn ps_shape_counts() {
        let s = PairShape::ps(4).unwrap();
        assert_eq!(s.alice_count(), 120);
        assert_eq!(s.bob_count(), 1820);
        assert_eq!(s.pair_count(), 218_400);
    }

    #[test]
    fn masks_agree_with_unranking() {
        let s = PairShape::disjointness(8, 3, 3).unwrap();
        let masks = s.side_masks(Owner::Alice).unwrap();
        assert_eq!(masks.len() as u128, s.alice_count());
        for (rank, mask) in masks.iter().enumerate() {
            let set = s.side_set(Owner::Alice, rank as u64);
            let expect = set.iter().fold(0u64, |m, &e| m | (1u64 << (e - 1)));
            assert_eq!(*mask, expect);
            assert_eq!(s.side_rank(Owner::Alice, &set).unwrap(), rank as u64);
        }
    }
}
