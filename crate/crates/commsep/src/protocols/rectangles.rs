//! Transcript-rectangle extraction and rectangle analytics.
//!
//! For a deterministic protocol the inputs reaching a common transcript form
//! a combinatorial rectangle A × B; extraction enumerates the full input
//! product (small shapes only), groups pairs by transcript, and verifies the
//! product structure by counting. Stats and δ-labels are computed in exact
//! rational arithmetic over the uniform distribution restricted to a
//! rectangle, whose marginals are uniform on the two sides.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::problems::combinatorics::binomial_u128;

use super::tree::{Owner, ProtocolTree, TreeNode};
use super::{PairShape, ProtocolError};

const MAX_EXHAUSTIVE_PAIRS: u128 = 8_000_000;

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Clone, Debug, Serialize)]
pub struct Rectangle {
    pub leaf: usize,
    /// Transcript key shared by every pair in this rectangle.
    pub transcript: String,
    /// Sorted ranks of the Alice side A and Bob side B.
    pub alice: Vec<u64>,
    pub bob: Vec<u64>,
}

impl Rectangle {
    pub fn full_domain(shape: &PairShape) -> Result<Rectangle, ProtocolError> {
        if shape.pair_count() > MAX_EXHAUSTIVE_PAIRS {
            return Err(ProtocolError::TooLargeForExhaustive(shape.pair_count()));
        }
        Ok(Rectangle {
            leaf: 0,
            transcript: String::new(),
            alice: (0..shape.alice_count() as u64).collect(),
            bob: (0..shape.bob_count() as u64).collect(),
        })
    }

    pub fn pair_count(&self) -> u128 {
        self.alice.len() as u128 * self.bob.len() as u128
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RectanglePartition {
    pub shape: PairShape,
    pub rectangles: Vec<Rectangle>,
}

/// Per-node message bits tabulated by owner rank, for fast enumeration.
fn compile_tables(tree: &ProtocolTree) -> Vec<Option<Vec<bool>>> {
    tree.nodes
        .iter()
        .map(|node| match node {
            TreeNode::Leaf { .. } => None,
            TreeNode::Decision { owner, rule, .. } => {
                let count = tree.shape.side_count(*owner) as u64;
                Some(
                    (0..count)
                        .map(|rank| {
                            // Coins were rejected up front, so the rule is a
                            // function of the rank alone.
                            tree_eval(tree, *owner, rule, rank)
                        })
                        .collect(),
                )
            }
        })
        .collect()
}

fn tree_eval(
    tree: &ProtocolTree,
    owner: Owner,
    rule: &super::tree::BitRule,
    rank: u64,
) -> bool {
    use super::tree::BitRule;
    match rule {
        BitRule::Constant { value } => *value,
        BitRule::RankBit { bit } => (rank >> bit) & 1 == 1,
        BitRule::MinElementParity => tree.shape.side_set(owner, rank)[0] % 2 == 1,
        BitRule::Table { values } => values[rank as usize],
        BitRule::CoinBit { .. } => unreachable!("coins rejected before compilation"),
    }
}

/// Enumerate every input pair, group by transcript, and verify each group is
/// a product set. Deterministic trees only; randomized trees must have their
/// coins fixed first.
pub fn extract_rectangles(tree: &ProtocolTree) -> Result<RectanglePartition, ProtocolError> {
    if tree.coin_bits != 0 {
        return Err(ProtocolError::NotDeterministic);
    }
    tree.validate()?;
    let shape = tree.shape;
    if shape.pair_count() > MAX_EXHAUSTIVE_PAIRS {
        return Err(ProtocolError::TooLargeForExhaustive(shape.pair_count()));
    }
    if tree.declared_cost > 48 {
        return Err(ProtocolError::BadTree(format!(
            "declared cost {} too deep for packed transcripts",
            tree.declared_cost
        )));
    }
    let tables = compile_tables(tree);
    let alice_count = shape.alice_count() as u64;
    let bob_count = shape.bob_count() as u64;

    struct Group {
        alice: Vec<bool>,
        bob: Vec<bool>,
        pairs: u64,
        witness: (u64, u64),
    }
    // Key: (leaf, path bits packed LSB-first, path length). Equal keys mean
    // equal transcripts because the tree structure fixes the speaker order.
    let mut groups: HashMap<(usize, u64, u32), Group> = HashMap::new();

    for a in 0..alice_count {
        for b in 0..bob_count {
            let mut idx = 0usize;
            let mut bits = 0u64;
            let mut len = 0u32;
            loop {
                match &tree.nodes[idx] {
                    TreeNode::Leaf { .. } => break,
                    TreeNode::Decision {
                        owner,
                        on_zero,
                        on_one,
                        ..
                    } => {
                        if len >= tree.declared_cost {
                            return Err(ProtocolError::CostViolation {
                                declared: tree.declared_cost,
                                used: len + 1,
                            });
                        }
                        let rank = match owner {
                            Owner::Alice => a,
                            Owner::Bob => b,
                        };
                        let bit = tables[idx].as_ref().expect("decision table")[rank as usize];
                        if bit {
                            bits |= 1 << len;
                        }
                        len += 1;
                        idx = if bit { *on_one } else { *on_zero };
                    }
                }
            }
            let group = groups.entry((idx, bits, len)).or_insert_with(|| Group {
                alice: vec![false; alice_count as usize],
                bob: vec![false; bob_count as usize],
                pairs: 0,
                witness: (a, b),
            });
            group.alice[a as usize] = true;
            group.bob[b as usize] = true;
            group.pairs += 1;
        }
    }

    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    let mut rectangles = Vec::with_capacity(keys.len());
    let mut covered = 0u128;
    for key in keys {
        let group = &groups[&key];
        let alice: Vec<u64> = group
            .alice
            .iter()
            .enumerate()
            .filter_map(|(r, &m)| m.then_some(r as u64))
            .collect();
        let bob: Vec<u64> = group
            .bob
            .iter()
            .enumerate()
            .filter_map(|(r, &m)| m.then_some(r as u64))
            .collect();
        if group.pairs as u128 != alice.len() as u128 * bob.len() as u128 {
            return Err(ProtocolError::NonRectanglePartition(key.0));
        }
        covered += group.pairs as u128;
        let (wa, wb) = group.witness;
        let transcript = tree.run_ranks(wa, wb, &[])?.transcript.key();
        rectangles.push(Rectangle {
            leaf: key.0,
            transcript,
            alice,
            bob,
        });
    }
    if covered != shape.pair_count() {
        return Err(ProtocolError::NonRectanglePartition(usize::MAX));
    }
    Ok(RectanglePartition { shape, rectangles })
}

/// Exact statistics of the uniform distribution restricted to a rectangle.
#[derive(Clone, Debug)]
pub struct RectangleStats {
    /// `overlap_counts[j]` = number of pairs in the rectangle with
    /// `|x ∩ y| = j`.
    pub overlap_counts: Vec<u128>,
    pub total_pairs: u128,
    /// Pr over the rectangle's Alice side that both elements of a ground
    /// pair lie in `x`; only nonzero entries, keyed by 1-based elements.
    pub pair_probs: BTreeMap<(u32, u32), BigRational>,
    pub alice_side: usize,
    pub bob_side: usize,
}

impl RectangleStats {
    /// `U_A(X_j)`: restricted mass of pairs with intersection size exactly
    /// `j` (the top index also absorbs larger overlaps).
    pub fn weight(&self, j: usize) -> BigRational {
        let count = if j + 1 == self.overlap_counts.len() {
            self.overlap_counts[j..].iter().sum()
        } else {
            self.overlap_counts.get(j).copied().unwrap_or(0)
        };
        ratio(count, self.total_pairs)
    }

    pub fn weight_exact(&self, j: usize) -> BigRational {
        ratio(
            self.overlap_counts.get(j).copied().unwrap_or(0),
            self.total_pairs,
        )
    }
}

pub fn rectangle_stats(
    shape: &PairShape,
    rect: &Rectangle,
) -> Result<RectangleStats, ProtocolError> {
    if rect.alice.is_empty() || rect.bob.is_empty() {
        return Err(ProtocolError::EmptyRectangle);
    }
    let alice_masks = shape.side_masks(Owner::Alice)?;
    let bob_masks = shape.side_masks(Owner::Bob)?;
    let a_masks: Vec<u64> = rect.alice.iter().map(|&r| alice_masks[r as usize]).collect();
    let b_masks: Vec<u64> = rect.bob.iter().map(|&r| bob_masks[r as usize]).collect();

    let mut overlap_counts = vec![0u128; shape.alice_k as usize + 1];
    for &am in &a_masks {
        for &bm in &b_masks {
            overlap_counts[(am & bm).count_ones() as usize] += 1;
        }
    }

    let mut pair_counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for &am in &a_masks {
        let elems: Vec<u32> = (0..shape.ground).filter(|e| am >> e & 1 == 1).collect();
        for i in 0..elems.len() {
            for j in (i + 1)..elems.len() {
                *pair_counts.entry((elems[i] + 1, elems[j] + 1)).or_default() += 1;
            }
        }
    }
    let pair_probs = pair_counts
        .into_iter()
        .map(|(k, c)| (k, ratio(c as u128, a_masks.len() as u128)))
        .collect();

    Ok(RectangleStats {
        overlap_counts,
        total_pairs: a_masks.len() as u128 * b_masks.len() as u128,
        pair_probs,
        alice_side: a_masks.len(),
        bob_side: b_masks.len(),
    })
}

/// A rectangle is δ-labeled when, for more than a third of its Bob side,
/// `y` contains a ground pair that is δ-heavy on the Alice side.
pub fn is_delta_labeled(
    shape: &PairShape,
    rect: &Rectangle,
    delta: &BigRational,
) -> Result<bool, ProtocolError> {
    let stats = rectangle_stats(shape, rect)?;
    let heavy: Vec<u64> = stats
        .pair_probs
        .iter()
        .filter(|(_, p)| *p >= delta)
        .map(|((a, b), _)| (1u64 << (a - 1)) | (1u64 << (b - 1)))
        .collect();
    if heavy.is_empty() {
        return Ok(false);
    }
    let bob_masks = shape.side_masks(Owner::Bob)?;
    let labeled = rect
        .bob
        .iter()
        .filter(|&&r| {
            let ym = bob_masks[r as usize];
            // Not a membership test: each heavy pair is checked for
            // containment in the row's mask.
            #[allow(clippy::manual_contains)]
            heavy.iter().any(|&pm| ym & pm == pm)
        })
        .count();
    // Strict: labeled fraction must exceed 1/3.
    Ok(3 * labeled as u128 > rect.bob.len() as u128)
}

/// Input distributions for disjointness-style mass ratios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RazDistribution {
    /// Independent uniform sides over `[n]` of sizes `k1` and `k2`.
    Product { n: u32, k1: u32, k2: u32 },
    /// Over `[4l - 1]` with both sides of size `l`: weight 3/4 spread
    /// uniformly on disjoint pairs, 1/4 on pairs sharing exactly one element.
    Mixed { l: u32 },
}

impl RazDistribution {
    fn shape(&self) -> Result<PairShape, ProtocolError> {
        match *self {
            RazDistribution::Product { n, k1, k2 } => PairShape::disjointness(n, k1, k2),
            RazDistribution::Mixed { l } => {
                if l < 1 {
                    return Err(ProtocolError::BadDistribution("l must be positive".into()));
                }
                PairShape::disjointness(4 * l - 1, l, l)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RazborovMasses {
    /// Mass of the rectangle intersected with the disjoint pairs.
    pub x0: BigRational,
    /// Mass intersected with the pairs sharing exactly one element.
    pub x1: BigRational,
    /// `x1 / x0`, or `None` on an x0-null rectangle.
    pub ratio: Option<BigRational>,
}

pub fn razborov_masses(
    shape: &PairShape,
    rect: &Rectangle,
    dist: &RazDistribution,
) -> Result<RazborovMasses, ProtocolError> {
    let want = dist.shape()?;
    if *shape != want {
        return Err(ProtocolError::BadDistribution(format!(
            "distribution expects shape {want:?}, rectangle lives in {shape:?}"
        )));
    }
    let stats = rectangle_stats(shape, rect)?;
    let c0 = stats.overlap_counts[0];
    let c1 = stats.overlap_counts.get(1).copied().unwrap_or(0);

    let (x0, x1) = match *dist {
        RazDistribution::Product { .. } => {
            let total = shape.pair_count();
            (ratio(c0, total), ratio(c1, total))
        }
        RazDistribution::Mixed { l } => {
            let n = 4 * l as u64 - 1;
            let l = l as u64;
            let n0 = binomial_u128(n, l) * binomial_u128(n - l, l);
            let n1 = binomial_u128(n, l) * l as u128 * binomial_u128(n - l, l - 1);
            (
                ratio(3, 4) * ratio(c0, n0),
                ratio(1, 4) * ratio(c1, n1),
            )
        }
    };
    let zero = BigRational::new(BigInt::from(0), BigInt::from(1));
    let ratio = (x0 != zero).then(|| x1.clone() / x0.clone());
    Ok(RazborovMasses { x0, x1, ratio })
}
