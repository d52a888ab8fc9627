//! The three relational problems, their instance types, and exact
//! samplers/probabilities for the input distributions they are studied
//! under.
//!
//! Ground sets are 1-based: `[n^2] = {1, ..., n^2}` and `[2n^2]` for the
//! block problem. Sets are kept as sorted arrays, so "lexicographically
//! first" always means numerically smallest.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{inner_product, BitString, Gf2Error, SigmaEncoding};

pub mod combinatorics;

use combinatorics::binomial;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("n = {0} must be a power of two, at least 4")]
    BadSize(u32),
    #[error("set has wrong cardinality: expected {expected}, got {got}")]
    BadCardinality { expected: usize, got: usize },
    #[error("element {0} out of range [{1}]")]
    ElementOutOfRange(u32, u64),
    #[error("elements must be distinct")]
    DuplicateElement,
    #[error("blocks are not pairwise disjoint")]
    BlocksNotDisjoint,
    #[error("block {0} meets x in {1} elements, expected 2")]
    BadBlockIntersection(usize, usize),
    #[error("block index {0} out of range, have {1} blocks")]
    BadBlockIndex(usize, usize),
    #[error("z must be a nonzero vector")]
    ZeroWitness,
    #[error("witness length {got} does not match encoding width {expected}")]
    WitnessLength { expected: usize, got: usize },
    #[error("encoding domain [{0}] too small for ground set [{1}]")]
    EncodingTooSmall(u64, u64),
    #[error("infeasible conditioning: no allowed intersection size in 0..={0}")]
    InfeasibleSpec(u32),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

fn check_n(n: u32) -> Result<(), ProblemError> {
    if n < 4 || !n.is_power_of_two() {
        return Err(ProblemError::BadSize(n));
    }
    Ok(())
}

fn check_set(elems: &mut [u32], expected: usize, ground: u64) -> Result<(), ProblemError> {
    if elems.len() != expected {
        return Err(ProblemError::BadCardinality {
            expected,
            got: elems.len(),
        });
    }
    elems.sort_unstable();
    for w in elems.windows(2) {
        if w[0] == w[1] {
            return Err(ProblemError::DuplicateElement);
        }
    }
    for &e in elems.iter() {
        if e < 1 || e as u64 > ground {
            return Err(ProblemError::ElementOutOfRange(e, ground));
        }
    }
    Ok(())
}

pub fn log2n(n: u32) -> usize {
    n.trailing_zeros() as usize
}

/// Sorted intersection of two sorted slices.
pub fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// An input pair for `PS` / `Piip`: `x, y` subsets of `[n^2]` with
/// `|x| = n/2`, `|y| = n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Instance {
    n: u32,
    x: Vec<u32>,
    y: Vec<u32>,
}

impl Instance {
    pub fn new(n: u32, mut x: Vec<u32>, mut y: Vec<u32>) -> Result<Self, ProblemError> {
        check_n(n)?;
        let ground = (n as u64) * (n as u64);
        check_set(&mut x, n as usize / 2, ground)?;
        check_set(&mut y, n as usize, ground)?;
        Ok(Instance { n, x, y })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn y(&self) -> &[u32] {
        &self.y
    }

    pub fn ground(&self) -> u64 {
        (self.n as u64) * (self.n as u64)
    }

    pub fn intersection(&self) -> Vec<u32> {
        intersect_sorted(&self.x, &self.y)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: u32,
            x: Vec<u32>,
            y: Vec<u32>,
        }
        let raw = Raw::deserialize(d)?;
        Instance::new(raw.n, raw.x, raw.y).map_err(serde::de::Error::custom)
    }
}

/// An input pair for `Pin`: `x` a subset of `[2n^2]` with `|x| = n`, and
/// `n/4` pairwise-disjoint blocks of size `n`, each meeting `x` in exactly
/// two elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PinInstance {
    n: u32,
    x: Vec<u32>,
    blocks: Vec<Vec<u32>>,
}

impl PinInstance {
    pub fn new(n: u32, mut x: Vec<u32>, blocks: Vec<Vec<u32>>) -> Result<Self, ProblemError> {
        check_n(n)?;
        let ground = 2 * (n as u64) * (n as u64);
        check_set(&mut x, n as usize, ground)?;
        if blocks.len() != n as usize / 4 {
            return Err(ProblemError::BadCardinality {
                expected: n as usize / 4,
                got: blocks.len(),
            });
        }
        let mut blocks: Vec<Vec<u32>> = blocks;
        let mut seen: Vec<u32> = Vec::new();
        for (idx, block) in blocks.iter_mut().enumerate() {
            check_set(block, n as usize, ground)?;
            let hit = intersect_sorted(&x, block).len();
            if hit != 2 {
                return Err(ProblemError::BadBlockIntersection(idx + 1, hit));
            }
            seen.extend_from_slice(block);
        }
        let before = seen.len();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != before {
            return Err(ProblemError::BlocksNotDisjoint);
        }
        Ok(PinInstance { n, x, blocks })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn ground(&self) -> u64 {
        2 * (self.n as u64) * (self.n as u64)
    }

    /// The two elements of `x` inside block `i` (1-based).
    pub fn block_pair(&self, i: usize) -> Result<(u32, u32), ProblemError> {
        if i < 1 || i > self.blocks.len() {
            return Err(ProblemError::BadBlockIndex(i, self.blocks.len()));
        }
        let hit = intersect_sorted(&self.x, &self.blocks[i - 1]);
        debug_assert_eq!(hit.len(), 2);
        Ok((hit[0], hit[1]))
    }

    /// Witness width for answers: `2 log2(n) + 1`.
    pub fn witness_bits(&self) -> usize {
        2 * log2n(self.n) + 1
    }
}

impl<'de> Deserialize<'de> for PinInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: u32,
            x: Vec<u32>,
            blocks: Vec<Vec<u32>>,
        }
        let raw = Raw::deserialize(d)?;
        PinInstance::new(raw.n, raw.x, raw.blocks).map_err(serde::de::Error::custom)
    }
}

/// Events characterizing an input pair by its intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Event {
    /// `|x ∩ y| = j`.
    SizeIs(u32),
    /// `x ∩ y = {i}`.
    Singleton(u32),
    /// `x ∩ y = {i, j}`, `i != j`.
    Pair(u32, u32),
}

impl Event {
    pub fn pair(i: u32, j: u32) -> Result<Self, ProblemError> {
        if i == j {
            return Err(ProblemError::DuplicateElement);
        }
        Ok(Event::Pair(i.min(j), i.max(j)))
    }

    pub fn holds(&self, inst: &Instance) -> bool {
        let cap = inst.intersection();
        match *self {
            Event::SizeIs(j) => cap.len() as u32 == j,
            Event::Singleton(i) => cap == [i],
            Event::Pair(i, j) => cap == [i.min(j), i.max(j)],
        }
    }
}

/// `(x, y, z) ∈ PS` iff `|x ∩ y| != 2` or `<z, σ(a) + σ(b)> = 0` where
/// `{a, b} = x ∩ y`.
///
/// The encoding domain may be larger than `[n^2]` (the derandomized
/// reductions hand back encodings over `[2n^2]`); the witness length must
/// match the encoding width.
pub fn member_ps(
    inst: &Instance,
    z: &BitString,
    sigma: &SigmaEncoding,
) -> Result<bool, ProblemError> {
    if z.is_zero() {
        return Err(ProblemError::ZeroWitness);
    }
    if z.len() != sigma.bits() {
        return Err(ProblemError::WitnessLength {
            expected: sigma.bits(),
            got: z.len(),
        });
    }
    if sigma.domain_size() < inst.ground() {
        return Err(ProblemError::EncodingTooSmall(
            sigma.domain_size(),
            inst.ground(),
        ));
    }
    let cap = inst.intersection();
    if cap.len() != 2 {
        return Ok(true);
    }
    let a = sigma.encode(cap[0] as u64)?;
    let b = sigma.encode(cap[1] as u64)?;
    Ok(inner_product(z, &a.xor(&b)?)? == 0)
}

/// `(x, y, (i, z)) ∈ Pin` iff `<z, σ0(a) + σ0(b)> = 0` where
/// `{a, b} = x ∩ y_i`, with `σ0` the order-preserving encoding of `[2n^2]`.
pub fn member_pin(inst: &PinInstance, i: usize, z: &BitString) -> Result<bool, ProblemError> {
    if z.is_zero() {
        return Err(ProblemError::ZeroWitness);
    }
    let bits = inst.witness_bits();
    if z.len() != bits {
        return Err(ProblemError::WitnessLength {
            expected: bits,
            got: z.len(),
        });
    }
    let (a, b) = inst.block_pair(i)?;
    let sigma = SigmaEncoding::sigma0(bits);
    let d = sigma.encode(a as u64)?.xor(&sigma.encode(b as u64)?)?;
    Ok(inner_product(z, &d)? == 0)
}

/// `(x, y, z) ∈ Piip` iff `z = x ∩ y` exactly.
pub fn member_piip(inst: &Instance, z: &[u32]) -> bool {
    let mut z: Vec<u32> = z.to_vec();
    z.sort_unstable();
    z.dedup();
    z == inst.intersection()
}

/// Exact distribution of `|x ∩ y|` under the uniform input distribution:
/// `Pr[|x ∩ y| = j] = C(n,j) C(n^2-n, n/2-j) / C(n^2, n/2)`.
pub fn intersection_pmf(n: u32) -> Result<Vec<BigRational>, ProblemError> {
    check_n(n)?;
    let nn = (n as u64) * (n as u64);
    let total = binomial(nn, n as u64 / 2);
    let mut pmf = Vec::with_capacity(n as usize / 2 + 1);
    for j in 0..=(n as u64 / 2) {
        let ways = binomial(n as u64, j) * binomial(nn - n as u64, n as u64 / 2 - j);
        pmf.push(BigRational::new(
            BigInt::from(ways),
            BigInt::from(total.clone()),
        ));
    }
    Ok(pmf)
}

#[derive(Clone, Debug)]
pub struct TailCheck {
    pub n: u32,
    pub t: u32,
    pub tail: BigRational,
    pub bound: BigRational,
    pub pass: bool,
}

/// Exact tail `Pr[|x ∩ y| >= t]` against the `(3/4)^t` bound.
pub fn tail_bound_check(n: u32, t: u32) -> Result<TailCheck, ProblemError> {
    let pmf = intersection_pmf(n)?;
    let tail: BigRational = pmf
        .iter()
        .enumerate()
        .filter(|(j, _)| *j as u32 >= t)
        .fold(BigRational::zero(), |acc, (_, p)| acc + p);
    let three_quarters = BigRational::new(BigInt::from(3), BigInt::from(4));
    let mut bound = BigRational::one();
    for _ in 0..t {
        bound *= &three_quarters;
    }
    let pass = tail <= bound;
    Ok(TailCheck {
        n,
        t,
        tail,
        bound,
        pass,
    })
}

/// The uniform distribution over valid `PS` input pairs, optionally
/// conditioned on a set of allowed intersection sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionSpec {
    n: u32,
    /// Allowed values of `|x ∩ y|`; `None` means unconditioned.
    allowed: Option<Vec<u32>>,
}

impl DistributionSpec {
    /// Unconditioned uniform distribution `U`.
    pub fn uniform(n: u32) -> Result<Self, ProblemError> {
        check_n(n)?;
        Ok(DistributionSpec { n, allowed: None })
    }

    /// `U` conditioned on `|x ∩ y| ∈ sizes`.
    pub fn conditioned(n: u32, sizes: &[u32]) -> Result<Self, ProblemError> {
        check_n(n)?;
        let mut allowed: Vec<u32> = sizes.iter().copied().filter(|&j| j <= n / 2).collect();
        allowed.sort_unstable();
        allowed.dedup();
        if allowed.is_empty() {
            return Err(ProblemError::InfeasibleSpec(n / 2));
        }
        Ok(DistributionSpec {
            n,
            allowed: Some(allowed),
        })
    }

    /// `U` conditioned on `|x ∩ y| >= t`.
    pub fn at_least(n: u32, t: u32) -> Result<Self, ProblemError> {
        let sizes: Vec<u32> = (t..=n / 2).collect();
        Self::conditioned(n, &sizes)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Renormalized pmf over the allowed intersection sizes, as pairs
    /// `(j, probability)`.
    pub fn conditioned_pmf(&self) -> Result<Vec<(u32, BigRational)>, ProblemError> {
        let pmf = intersection_pmf(self.n)?;
        let entries: Vec<(u32, BigRational)> = match &self.allowed {
            None => pmf.into_iter().enumerate().map(|(j, p)| (j as u32, p)).collect(),
            Some(allowed) => allowed
                .iter()
                .map(|&j| (j, pmf[j as usize].clone()))
                .collect(),
        };
        let total: BigRational = entries
            .iter()
            .fold(BigRational::zero(), |acc, (_, p)| acc + p);
        if total.is_zero() {
            return Err(ProblemError::InfeasibleSpec(self.n / 2));
        }
        Ok(entries.into_iter().map(|(j, p)| (j, p / &total)).collect())
    }

    /// Draw one instance distributed exactly as the conditioned uniform
    /// distribution.
    ///
    /// Implemented by direct construction: choose the intersection size `j`
    /// from the renormalized pmf, then the `j` common elements, then fill the
    /// private parts of `x` and `y` disjointly. All valid instances with a
    /// given intersection size are exchangeable under the uniform
    /// distribution, so this equals rejection sampling from `U` conditioned
    /// on the allowed sizes.
    pub fn sample_with(&self, rng: &mut impl Rng) -> Result<Instance, ProblemError> {
        let pmf = self.conditioned_pmf()?;
        let j = draw_discrete(&pmf, rng);
        let n = self.n as usize;
        let ground = n * n;
        // Common elements, then x-private, then y-private, all disjoint.
        let picks = index_sample(rng, ground, n / 2 + n - j as usize).into_vec();
        let common = &picks[..j as usize];
        let x_rest = &picks[j as usize..n / 2];
        let y_rest = &picks[n / 2..];
        let mut x: Vec<u32> = common.iter().chain(x_rest).map(|&e| e as u32 + 1).collect();
        let mut y: Vec<u32> = common.iter().chain(y_rest).map(|&e| e as u32 + 1).collect();
        x.sort_unstable();
        y.sort_unstable();
        Instance::new(self.n, x, y)
    }

    pub fn sample(&self, seed: u64) -> Result<Instance, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }
}

fn draw_discrete(pmf: &[(u32, BigRational)], rng: &mut impl Rng) -> u32 {
    let weights: Vec<f64> = pmf.iter().map(|(_, p)| rational_to_f64(p)).collect();
    let total: f64 = weights.iter().sum();
    let mut u: f64 = rng.random::<f64>() * total;
    for ((j, _), w) in pmf.iter().zip(&weights) {
        if u < *w {
            return *j;
        }
        u -= w;
    }
    pmf.last().expect("nonempty pmf").0
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer: f64 = r.numer().to_string().parse().unwrap_or(f64::NAN);
    let denom: f64 = r.denom().to_string().parse().unwrap_or(f64::NAN);
    if numer.is_finite() && denom.is_finite() && denom != 0.0 {
        numer / denom
    } else {
        // Fall back to a scaled representation for huge terms.
        let scaled = r * BigRational::from_integer(BigInt::from(1u64 << 53));
        let approx: f64 = scaled.to_integer().to_string().parse().unwrap_or(f64::NAN);
        approx / (1u64 << 53) as f64
    }
}

/// A uniformly random valid `Pin` instance.
///
/// Blocks are built sequentially; at every step the number of available
/// choices depends only on how many elements previous blocks consumed (each
/// uses two from `x` and `n - 2` from outside), so the sequential uniform
/// choices compose to a uniform choice of the whole block tuple.
pub fn sample_pin_with(n: u32, rng: &mut impl Rng) -> Result<PinInstance, ProblemError> {
    check_n(n)?;
    let ground = 2 * (n as usize) * (n as usize);
    let x: Vec<u32> = index_sample(rng, ground, n as usize)
        .into_iter()
        .map(|e| e as u32 + 1)
        .collect();
    let mut x = x;
    x.sort_unstable();
    let x_set: std::collections::HashSet<u32> = x.iter().copied().collect();
    let mut free_x: Vec<u32> = x.clone();
    let mut free_out: Vec<u32> = (1..=ground as u32).filter(|e| !x_set.contains(e)).collect();
    let mut blocks = Vec::with_capacity(n as usize / 4);
    for _ in 0..n / 4 {
        let mut block = Vec::with_capacity(n as usize);
        for idx in index_sample(rng, free_x.len(), 2).into_iter() {
            block.push(free_x[idx]);
        }
        free_x.retain(|e| !block.contains(e));
        let mut outs = Vec::with_capacity(n as usize - 2);
        for idx in index_sample(rng, free_out.len(), n as usize - 2).into_iter() {
            outs.push(free_out[idx]);
        }
        free_out.retain(|e| !outs.contains(e));
        block.extend(outs);
        block.sort_unstable();
        blocks.push(block);
    }
    PinInstance::new(n, x, blocks)
}

pub fn sample_pin(n: u32, seed: u64) -> Result<PinInstance, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pin_with(n, &mut rng)
}
