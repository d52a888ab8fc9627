//! The reduction chain: block-embedding a PS pair into a Pin instance (with
//! seed derandomization), the six-step rectangle protocol turning a PS
//! solver into an exact intersection finder, the padding reduction feeding a
//! t-element solver, its l-fold repetition, and the random embedding into
//! larger disjointness domains.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gf2::{BitString, Gf2Error, SigmaEncoding};
use crate::problems::{
    intersect_sorted, DistributionSpec, Instance, PinInstance, ProblemError,
};
use crate::protocols::{
    extract_rectangles, rectangle_stats, Owner, PairShape, ProtocolError, ProtocolTree,
    RectanglePartition, RectangleStats,
};
use crate::quantum::{run_sampled_with, QuantumError, QuantumOutcome};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("bad reduction input: {0}")]
    BadInput(String),
    #[error("no qualifying seed within budget {0}")]
    SearchFailure(u32),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Ordered log of every stage and random choice of a reduction run;
/// serializes to JSON for the CLI's `--trace` flag.
#[derive(Clone, Debug, Default)]
pub struct ReductionTrace {
    entries: Vec<(String, Value)>,
}

impl ReductionTrace {
    pub fn push(&mut self, label: &str, value: Value) {
        self.entries.push((label.to_string(), value));
    }

    pub fn get(&self, label: &str) -> Option<&Value> {
        self.entries
            .iter()
            .rev()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.entries
                .iter()
                .map(|(l, v)| json!({ "stage": l, "value": v }))
                .collect(),
        )
    }
}

fn apply_perm(perm: &[u32], set: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = set.iter().map(|&e| perm[(e - 1) as usize]).collect();
    out.sort_unstable();
    out
}

fn random_perm(size: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut perm: Vec<u32> = (1..=size as u32).collect();
    perm.shuffle(rng);
    perm
}

// ---------------------------------------------------------------------------
// Pin solvers

/// Anything that can play the inner protocol on a `PinInstance`. The quantum
/// simulator, synthetic oracles, and adversaries all implement this, since
/// the reductions' distributional claims are solver-independent.
pub trait PinSolver {
    fn run(
        &self,
        inst: &PinInstance,
        rng: &mut ChaCha8Rng,
    ) -> Result<QuantumOutcome, ReductionError>;

    fn name(&self) -> &'static str;
}

/// The one-way quantum protocol, sampled through the float pipeline.
pub struct QuantumPinSolver;

impl PinSolver for QuantumPinSolver {
    fn run(
        &self,
        inst: &PinInstance,
        rng: &mut ChaCha8Rng,
    ) -> Result<QuantumOutcome, ReductionError> {
        Ok(run_sampled_with(inst, rng))
    }

    fn name(&self) -> &'static str {
        "quantum"
    }
}

/// Oracle that always answers correctly: a uniformly random block with the
/// lexicographically smallest valid witness for it.
pub struct PerfectPinSolver;

impl PinSolver for PerfectPinSolver {
    fn run(
        &self,
        inst: &PinInstance,
        rng: &mut ChaCha8Rng,
    ) -> Result<QuantumOutcome, ReductionError> {
        let blocks = inst.blocks().len();
        let i = rng.random_range(1..=blocks);
        let bits = inst.witness_bits();
        let (a, b) = inst.block_pair(i)?;
        let sigma = SigmaEncoding::sigma0(bits);
        let d = sigma.encode(a as u64)?.xor(&sigma.encode(b as u64)?)?;
        for v in 1..(1u64 << bits) {
            if (v & d.value()).count_ones() % 2 == 0 {
                return Ok(QuantumOutcome::Answer {
                    block: i,
                    readout: BitString::new(v, bits),
                });
            }
        }
        unreachable!("the orthogonal complement of a nonzero vector has nonzero members");
    }

    fn name(&self) -> &'static str {
        "perfect"
    }
}

/// Adversary that never answers.
pub struct RefusePinSolver;

impl PinSolver for RefusePinSolver {
    fn run(
        &self,
        _inst: &PinInstance,
        _rng: &mut ChaCha8Rng,
    ) -> Result<QuantumOutcome, ReductionError> {
        Ok(QuantumOutcome::Refuse)
    }

    fn name(&self) -> &'static str {
        "refuse"
    }
}

// ---------------------------------------------------------------------------
// PS <- Pin

/// Deterministic part of the embedding: `x' = {n^2+1..n^2+n/2} ∪ x` and the
/// padding blocks `y'_j = {n^2 + j + k n/4 : 0 <= k < n}`, each of which
/// meets `x'` in exactly the two elements `n^2 + j` and `n^2 + j + n/4`.
pub fn build_pin_embedding(inst: &Instance) -> Result<(Vec<u32>, Vec<Vec<u32>>), ReductionError> {
    let n = inst.n();
    if n < 8 {
        return Err(ReductionError::BadInput(format!(
            "embedding needs n >= 8, got {n}"
        )));
    }
    if inst.intersection().len() != 2 {
        return Err(ReductionError::BadInput(
            "instance must satisfy |x ∩ y| = 2".into(),
        ));
    }
    let n2 = n * n;
    let mut x_prime: Vec<u32> = (n2 + 1..=n2 + n / 2).collect();
    x_prime.extend_from_slice(inst.x());
    x_prime.sort_unstable();

    let mut blocks = vec![inst.y().to_vec()];
    for j in 1..n / 4 {
        let block: Vec<u32> = (0..n).map(|k| n2 + j + k * n / 4).collect();
        blocks.push(block);
    }
    Ok((x_prime, blocks))
}

pub struct In2iiRun {
    /// `(σ, z)` on answer: the witness `z` is valid against the composed
    /// encoding `σ = σ0 ∘ σ1`.
    pub answer: Option<(SigmaEncoding, BitString)>,
    /// The instance handed to the solver.
    pub fed: PinInstance,
    pub outcome: QuantumOutcome,
    pub trace: ReductionTrace,
}

/// Core of the reduction with explicit permutations. `sigma1` permutes
/// `[2n^2]` (image of `j` at index `j - 1`); `sigma2` permutes the block
/// index set `[n/4]`: the block fed at position `p` is `ȳ_{sigma2[p-1]}`.
pub fn reduce_in2ii_with(
    inst: &Instance,
    solver: &dyn PinSolver,
    sigma1: &[u32],
    sigma2: &[usize],
    solver_rng: &mut ChaCha8Rng,
) -> Result<In2iiRun, ReductionError> {
    let n = inst.n();
    let (x_prime, blocks) = build_pin_embedding(inst)?;
    if sigma1.len() as u32 != 2 * n * n || sigma2.len() as u32 != n / 4 {
        return Err(ReductionError::BadInput("permutation sizes".into()));
    }

    let fed_x = apply_perm(sigma1, &x_prime);
    let fed_blocks: Vec<Vec<u32>> = sigma2
        .iter()
        .map(|&j| apply_perm(sigma1, &blocks[j - 1]))
        .collect();
    let fed = PinInstance::new(n, fed_x, fed_blocks)?;

    let mut trace = ReductionTrace::default();
    trace.push("input", json!({ "n": n, "x": inst.x(), "y": inst.y() }));
    trace.push("x_prime", json!(x_prime));
    trace.push("sigma2", json!(sigma2));
    trace.push("solver", json!(solver.name()));

    let outcome = solver.run(&fed, solver_rng)?;
    trace.push(
        "outcome",
        serde_json::to_value(&outcome).expect("outcome serializes"),
    );

    let answer = match &outcome {
        QuantumOutcome::Answer { block, readout } if sigma2[block - 1] == 1 => {
            let perm64: Vec<u64> = sigma1.iter().map(|&v| v as u64).collect();
            let sigma = SigmaEncoding::composed(fed.witness_bits(), perm64)?;
            Some((sigma, *readout))
        }
        _ => None,
    };
    trace.push("answered", json!(answer.is_some()));
    Ok(In2iiRun {
        answer,
        fed,
        outcome,
        trace,
    })
}

/// The randomized reduction: σ1, σ2 and the solver's coins all derive from
/// `seed`.
pub fn reduce_in2ii(
    inst: &Instance,
    solver: &dyn PinSolver,
    seed: u64,
) -> Result<In2iiRun, ReductionError> {
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma1 = random_perm(2 * (n * n) as usize, &mut rng);
    let sigma2: Vec<usize> = {
        let mut p: Vec<usize> = (1..=(n / 4) as usize).collect();
        p.shuffle(&mut rng);
        p
    };
    reduce_in2ii_with(inst, solver, &sigma1, &sigma2, &mut rng)
}

/// Debug mode with identity permutations: the fed instance equals the
/// deterministic embedding, so an answer means the solver named block 1
/// (the original `y`) and the input is recoverable from the trace.
pub fn reduce_in2ii_debug(
    inst: &Instance,
    solver: &dyn PinSolver,
    seed: u64,
) -> Result<In2iiRun, ReductionError> {
    let n = inst.n();
    let sigma1: Vec<u32> = (1..=2 * n * n).collect();
    let sigma2: Vec<usize> = (1..=(n / 4) as usize).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reduce_in2ii_with(inst, solver, &sigma1, &sigma2, &mut rng)
}

#[derive(Clone, Debug)]
pub struct Derandomized {
    pub seed: u64,
    pub answer_rate: f64,
    pub error_rate: f64,
    pub trials: u32,
}

/// Search seeds for one whose fixed (σ1, σ2) keep the empirical answer rate
/// at `>= 2/n` with conditional error `<= 2 eps`; the solver still uses fresh
/// coins each trial. Returns the first qualifying seed with its measurements.
pub fn derandomize_in2ii(
    solver: &dyn PinSolver,
    n: u32,
    eps: f64,
    budget: u32,
    trials: u32,
    master_seed: u64,
) -> Result<Derandomized, ReductionError> {
    if budget == 0 || trials == 0 {
        return Err(ReductionError::BadInput("budget and trials must be >= 1".into()));
    }
    let spec = DistributionSpec::conditioned(n, &[2])?;
    for candidate in 0..budget {
        let mut coin_rng = ChaCha8Rng::seed_from_u64(candidate as u64);
        let sigma1 = random_perm(2 * (n * n) as usize, &mut coin_rng);
        let sigma2: Vec<usize> = {
            let mut p: Vec<usize> = (1..=(n / 4) as usize).collect();
            p.shuffle(&mut coin_rng);
            p
        };
        let mut trial_rng =
            ChaCha8Rng::seed_from_u64(master_seed ^ (candidate as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let mut answered = 0u32;
        let mut wrong = 0u32;
        for _ in 0..trials {
            let inst = spec.sample_with(&mut trial_rng)?;
            let run = reduce_in2ii_with(&inst, solver, &sigma1, &sigma2, &mut trial_rng)?;
            if let Some((sigma, z)) = &run.answer {
                answered += 1;
                if !crate::problems::member_ps(&inst, z, sigma)? {
                    wrong += 1;
                }
            }
        }
        let rate = answered as f64 / trials as f64;
        let error = if answered > 0 {
            wrong as f64 / answered as f64
        } else {
            0.0
        };
        if rate >= 2.0 / n as f64 && (answered == 0 || error <= 2.0 * eps) && answered > 0 {
            return Ok(Derandomized {
                seed: candidate as u64,
                answer_rate: rate,
                error_rate: error,
                trials,
            });
        }
    }
    Err(ReductionError::SearchFailure(budget))
}

// ---------------------------------------------------------------------------
// Piip <- PS

/// Deterministic PS protocol together with its rectangle partition and
/// per-rectangle statistics, precomputed once.
pub struct PsTreeSolver {
    pub tree: ProtocolTree,
    pub partition: RectanglePartition,
    stats: Vec<RectangleStats>,
    by_transcript: HashMap<String, usize>,
}

impl PsTreeSolver {
    pub fn new(tree: ProtocolTree) -> Result<Self, ReductionError> {
        let partition = extract_rectangles(&tree)?;
        let shape = partition.shape;
        let stats = partition
            .rectangles
            .iter()
            .map(|r| rectangle_stats(&shape, r))
            .collect::<Result<Vec<_>, _>>()?;
        let by_transcript = partition
            .rectangles
            .iter()
            .enumerate()
            .map(|(i, r)| (r.transcript.clone(), i))
            .collect();
        Ok(PsTreeSolver {
            tree,
            partition,
            stats,
            by_transcript,
        })
    }

    pub fn cost(&self) -> u32 {
        self.tree.declared_cost
    }

    fn rectangle_of(&self, transcript: &str) -> Option<usize> {
        self.by_transcript.get(transcript).copied()
    }
}

/// Indices to drop from the first `j0` elements so the rest avoids `other`:
/// all positions whose element hits `other` are forced; the pair is then
/// completed and ordered lexicographically smallest.
fn removal_pair(first: &[u32], other: &[u32]) -> Result<(usize, usize), ReductionError> {
    let bad: Vec<usize> = first
        .iter()
        .enumerate()
        .filter(|(_, e)| other.binary_search(e).is_ok())
        .map(|(i, _)| i)
        .collect();
    match bad.as_slice() {
        [] => Ok((0, 1)),
        [b] => {
            if *b == 0 {
                Ok((0, 1))
            } else {
                Ok((0, *b))
            }
        }
        [b1, b2] => Ok((*b1, *b2)),
        _ => Err(ReductionError::BadInput(
            "more than two overlap elements in the prefix".into(),
        )),
    }
}

/// Steps 2-3 of the six-step protocol: raise `|x ∩ y|` to exactly `j0` by
/// swapping prefix elements (removing `I_x` from `x`, importing `I_y` from
/// `y`), keeping both side sizes. Returns `(x_tilde, i_x, i_y)`.
#[allow(clippy::type_complexity)]
pub fn lift_to_j0(
    inst: &Instance,
    j0: u32,
) -> Result<(Vec<u32>, Vec<u32>, Vec<u32>), ReductionError> {
    if j0 < 2 || j0 as usize > inst.x().len() || j0 as usize > inst.y().len() {
        return Err(ReductionError::BadInput(format!("j0 = {j0} out of range")));
    }
    let xj = &inst.x()[..j0 as usize];
    let (i1, i2) = removal_pair(xj, inst.y())?;
    let i_x: Vec<u32> = xj
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != i1 && *i != i2)
        .map(|(_, &e)| e)
        .collect();
    let yj = &inst.y()[..j0 as usize];
    let (i3, i4) = removal_pair(yj, inst.x())?;
    let i_y: Vec<u32> = yj
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != i3 && *i != i4)
        .map(|(_, &e)| e)
        .collect();
    let mut x_tilde: Vec<u32> = inst
        .x()
        .iter()
        .copied()
        .filter(|e| i_x.binary_search(e).is_err())
        .chain(i_y.iter().copied())
        .collect();
    x_tilde.sort_unstable();
    Ok((x_tilde, i_x, i_y))
}

pub struct Ii2iipRun {
    /// Sorted intersection pair on success.
    pub answer: Option<[u32; 2]>,
    pub j0: u32,
    pub threshold: u32,
    /// The permuted pair handed to the PS solver (absent when truncated).
    pub fed: Option<Instance>,
    pub trace: ReductionTrace,
}

/// The six-step protocol: sample `j0 ~ D`, lift `(x, y)` to an intersection
/// of size `j0`, permute, run the PS solver, look for a δ-heavy pair in the
/// reached rectangle, and verify against `x ∩ y` before answering. The final
/// verification makes the reduction literally zero-error.
pub fn reduce_ii2iip(
    inst: &Instance,
    solver: &PsTreeSolver,
    gamma: f64,
    delta: Option<BigRational>,
    seed: u64,
) -> Result<Ii2iipRun, ReductionError> {
    let n = inst.n();
    if inst.intersection().len() != 2 {
        return Err(ReductionError::BadInput(
            "instance must satisfy |x ∩ y| = 2".into(),
        ));
    }
    if solver.partition.shape != PairShape::ps(n)? {
        return Err(ReductionError::BadInput("solver shape mismatch".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ReductionError::BadInput(format!("gamma = {gamma}")));
    }
    let delta = match delta {
        Some(d) => d,
        None => {
            let k = solver.cost();
            if k == 0 {
                return Err(ReductionError::BadInput(
                    "zero-cost solver needs an explicit delta".into(),
                ));
            }
            BigRational::new(BigInt::from(1), BigInt::from((k as u64) * (k as u64)))
        }
    };
    let delta_f = crate::problems::rational_to_f64(&delta);
    let threshold = (3.0 * (312.0 / (gamma * delta_f)).log2()).ceil() as u32;

    let mut trace = ReductionTrace::default();
    trace.push("input", json!({ "n": n, "x": inst.x(), "y": inst.y() }));
    trace.push("delta", json!(delta.to_string()));
    trace.push("threshold", json!(threshold));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Step 1: j0 ~ D, D(j) = U^{(>=2)}(X_j).
    let pmf = DistributionSpec::at_least(n, 2)?.conditioned_pmf()?;
    let weights: Vec<f64> = pmf
        .iter()
        .map(|(_, p)| crate::problems::rational_to_f64(p))
        .collect();
    let mut u: f64 = rng.random::<f64>();
    let mut j0 = pmf.last().expect("nonempty pmf").0;
    for ((j, _), w) in pmf.iter().zip(&weights) {
        if u < *w {
            j0 = *j;
            break;
        }
        u -= w;
    }
    trace.push("j0", json!(j0));
    if j0 > threshold {
        trace.push("verdict", json!("refuse: j0 over threshold"));
        return Ok(Ii2iipRun {
            answer: None,
            j0,
            threshold,
            fed: None,
            trace,
        });
    }

    // Steps 2-3: swap prefix elements so the intersection grows to j0.
    let (x_tilde, i_x, i_y) = lift_to_j0(inst, j0)?;
    trace.push("i_x", json!(i_x));
    trace.push("i_y", json!(i_y));
    trace.push("x_tilde", json!(x_tilde));
    debug_assert_eq!(
        intersect_sorted(&x_tilde, inst.y()).len(),
        j0 as usize,
        "lift must reach intersection size j0"
    );

    // Step 4: random permutation of [n^2].
    let rho = random_perm((n * n) as usize, &mut rng);
    let fed = Instance::new(n, apply_perm(&rho, &x_tilde), apply_perm(&rho, inst.y()))?;
    trace.push("fed", json!({ "x": fed.x(), "y": fed.y() }));

    // Step 5: run the PS solver, find its rectangle, search a δ-heavy pair
    // inside the (permuted) y.
    let shape = solver.partition.shape;
    let a_rank = shape.side_rank(Owner::Alice, fed.x())?;
    let b_rank = shape.side_rank(Owner::Bob, fed.y())?;
    let rec = solver.tree.run_ranks(a_rank, b_rank, &[])?;
    let key = rec.transcript.key();
    let rect_idx = solver
        .rectangle_of(&key)
        .ok_or_else(|| ReductionError::BadInput(format!("unknown transcript {key}")))?;
    trace.push("rectangle", json!(key));
    let stats = &solver.stats[rect_idx];
    let mut chosen = None;
    for (key, p) in stats.pair_probs.iter() {
        if *p >= delta
            && fed.y().binary_search(&key.0).is_ok()
            && fed.y().binary_search(&key.1).is_ok()
        {
            chosen = Some(*key);
            break;
        }
    }
    let Some((a_prime, b_prime)) = chosen else {
        trace.push("verdict", json!("refuse: no heavy pair"));
        return Ok(Ii2iipRun {
            answer: None,
            j0,
            threshold,
            fed: Some(fed),
            trace,
        });
    };
    trace.push("pair", json!([a_prime, b_prime]));

    // Step 6: pull back through rho and verify against x ∩ y.
    let mut inv = vec![0u32; rho.len()];
    for (j, &image) in rho.iter().enumerate() {
        inv[(image - 1) as usize] = j as u32 + 1;
    }
    let mut cand = [inv[(a_prime - 1) as usize], inv[(b_prime - 1) as usize]];
    cand.sort_unstable();
    let cap = inst.intersection();
    let ok = cap.binary_search(&cand[0]).is_ok() && cap.binary_search(&cand[1]).is_ok();
    trace.push("verdict", json!(if ok { "answer" } else { "refuse: verification" }));
    Ok(Ii2iipRun {
        answer: ok.then_some(cand),
        j0,
        threshold,
        fed: Some(fed),
        trace,
    })
}

// ---------------------------------------------------------------------------
// Padding reduction and repetition

/// A solver that, given a PS-shaped pair, tries to output `t` elements of
/// `x ∩ y` (`None` = refuse).
pub trait PiipSolver {
    fn run(&self, inst: &Instance, t: usize, rng: &mut ChaCha8Rng) -> Option<Vec<u32>>;

    fn name(&self) -> &'static str;
}

/// Outputs the `t` lexicographically smallest intersection elements when
/// there are at least `t` of them.
pub struct PerfectPiipSolver;

impl PiipSolver for PerfectPiipSolver {
    fn run(&self, inst: &Instance, t: usize, _rng: &mut ChaCha8Rng) -> Option<Vec<u32>> {
        let cap = inst.intersection();
        (cap.len() >= t).then(|| cap[..t].to_vec())
    }

    fn name(&self) -> &'static str {
        "perfect"
    }
}

pub struct RefusePiipSolver;

impl PiipSolver for RefusePiipSolver {
    fn run(&self, _inst: &Instance, _t: usize, _rng: &mut ChaCha8Rng) -> Option<Vec<u32>> {
        None
    }

    fn name(&self) -> &'static str {
        "refuse"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Zero,
    Refuse,
}

/// Pad `(x', y')` over `[m]`, `m = n^2 - i0`, with the common tail
/// `{m+1..n^2}`, permute, run the solver; verdict `zero` iff all `t`
/// produced elements land inside the permuted tail. Malformed solver output
/// counts as a refusal.
pub fn reduce_iip_padding(
    n: u32,
    i0: u32,
    t: usize,
    x_prime: &[u32],
    y_prime: &[u32],
    solver: &dyn PiipSolver,
    seed: u64,
) -> Result<Verdict, ReductionError> {
    let n2 = n * n;
    if i0 >= n / 2 {
        return Err(ReductionError::BadInput(format!("i0 = {i0} too large")));
    }
    let m = n2 - i0;
    let want_x = (n / 2 - i0) as usize;
    let want_y = (n - i0) as usize;
    let in_range = |s: &[u32]| s.iter().all(|&e| 1 <= e && e <= m);
    if x_prime.len() != want_x || y_prime.len() != want_y || !in_range(x_prime) || !in_range(y_prime)
    {
        return Err(ReductionError::BadInput(
            "padded input sides have wrong shape".into(),
        ));
    }
    let tail: Vec<u32> = (m + 1..=n2).collect();
    let mut x0: Vec<u32> = x_prime.to_vec();
    x0.extend_from_slice(&tail);
    let mut y0: Vec<u32> = y_prime.to_vec();
    y0.extend_from_slice(&tail);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_perm(n2 as usize, &mut rng);
    let fed = Instance::new(n, apply_perm(&rho, &x0), apply_perm(&rho, &y0))?;
    let Some(out) = solver.run(&fed, t, &mut rng) else {
        return Ok(Verdict::Refuse);
    };
    if out.len() != t {
        return Ok(Verdict::Refuse);
    }
    let rho_tail: Vec<u32> = {
        let mut v = apply_perm(&rho, &tail);
        v.sort_unstable();
        v
    };
    let all_tail = out.iter().all(|e| rho_tail.binary_search(e).is_ok());
    Ok(if all_tail { Verdict::Zero } else { Verdict::Refuse })
}

/// `l`-fold repetition: `zero` iff every independent inner run says `zero`.
pub fn repeat_iip(
    l: u32,
    seed: u64,
    mut inner: impl FnMut(u64) -> Result<Verdict, ReductionError>,
) -> Result<Verdict, ReductionError> {
    if l == 0 {
        return Err(ReductionError::BadInput("l must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..l {
        if inner(rng.random::<u64>())? == Verdict::Refuse {
            return Ok(Verdict::Refuse);
        }
    }
    Ok(Verdict::Zero)
}

/// Uniform pair `(x, y)` over `[m]` with `|x| = kx`, `|y| = ky` and
/// `|x ∩ y| = overlap`, built by choosing the common part, then the private
/// parts from the leftovers (uniform by exchangeability).
pub fn sample_overlap_pair(
    m: u32,
    kx: u32,
    ky: u32,
    overlap: u32,
    rng: &mut impl Rng,
) -> Result<(Vec<u32>, Vec<u32>), ReductionError> {
    if overlap > kx || overlap > ky || kx as u64 + ky as u64 - overlap as u64 > m as u64 {
        return Err(ReductionError::BadInput("infeasible overlap sizes".into()));
    }
    fn take(pool: &mut Vec<u32>, k: u32, rng: &mut impl Rng) -> Vec<u32> {
        let idx = rand::seq::index::sample(rng, pool.len(), k as usize).into_vec();
        let mut chosen: Vec<u32> = idx.iter().map(|&i| pool[i]).collect();
        let mut sorted_idx = idx;
        sorted_idx.sort_unstable_by(|a, b| b.cmp(a));
        for i in sorted_idx {
            pool.swap_remove(i);
        }
        chosen.sort_unstable();
        chosen
    }
    let mut pool: Vec<u32> = (1..=m).collect();
    let common = take(&mut pool, overlap, rng);
    let x_priv = take(&mut pool, kx - overlap, rng);
    let y_priv = take(&mut pool, ky - overlap, rng);
    let mut x = common.clone();
    x.extend(x_priv);
    x.sort_unstable();
    let mut y = common;
    y.extend(y_priv);
    y.sort_unstable();
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Embedding into a larger disjointness domain

/// The shared random choice of the embedding: disjoint `(M, β)` in `[n]`
/// with `|M| = m` and `|β| = k2 - k1`. `M` is identified with `[m]` in
/// increasing order, so each side embeds locally.
#[derive(Clone, Debug)]
pub struct RazChoice {
    pub m_set: Vec<u32>,
    pub beta: Vec<u32>,
}

impl RazChoice {
    pub fn apply_alice(&self, x_prime: &[u32]) -> Vec<u32> {
        let mut x: Vec<u32> = x_prime
            .iter()
            .map(|&e| self.m_set[(e - 1) as usize])
            .collect();
        x.sort_unstable();
        x
    }

    pub fn apply_bob(&self, y_prime: &[u32]) -> Vec<u32> {
        let mut y: Vec<u32> = y_prime
            .iter()
            .map(|&e| self.m_set[(e - 1) as usize])
            .collect();
        y.extend_from_slice(&self.beta);
        y.sort_unstable();
        y
    }
}

pub fn raz_choice(n: u32, k1: u32, k2: u32, seed: u64) -> Result<RazChoice, ReductionError> {
    if k1 == 0 {
        return Err(ReductionError::BadInput("k1 must be positive".into()));
    }
    let m = 4 * k1 - 1;
    if k2 < k1 || m + (k2 - k1) > n {
        return Err(ReductionError::BadInput(format!(
            "infeasible embedding sizes: m = {m}, k2 - k1 = {}, n = {n}",
            k2 as i64 - k1 as i64
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<u32> = (1..=n).collect();
    pool.shuffle(&mut rng);
    let mut m_set: Vec<u32> = pool[..m as usize].to_vec();
    m_set.sort_unstable();
    let mut beta: Vec<u32> = pool[m as usize..(m + k2 - k1) as usize].to_vec();
    beta.sort_unstable();
    Ok(RazChoice { m_set, beta })
}

/// Embed a pair over `[4 k1 - 1]` (both sides of size `k1`) into `[n]` with
/// Bob padded up to size `k2`; preserves `|x ∩ y|` exactly.
pub fn embed_razlem(
    x_prime: &[u32],
    y_prime: &[u32],
    n: u32,
    k2: u32,
    seed: u64,
) -> Result<(Vec<u32>, Vec<u32>, RazChoice), ReductionError> {
    let k1 = x_prime.len() as u32;
    let m = 4 * k1 - 1;
    let in_range = |s: &[u32]| s.iter().all(|&e| 1 <= e && e <= m);
    if y_prime.len() as u32 != k1 || !in_range(x_prime) || !in_range(y_prime) {
        return Err(ReductionError::BadInput(
            "embedding input must be two k1-subsets of [4 k1 - 1]".into(),
        ));
    }
    let choice = raz_choice(n, k1, k2, seed)?;
    Ok((
        choice.apply_alice(x_prime),
        choice.apply_bob(y_prime),
        choice,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{member_piip, member_pin, member_ps};

    fn u2_instance(n: u32, seed: u64) -> Instance {
        DistributionSpec::conditioned(n, &[2])
            .unwrap()
            .sample(seed)
            .unwrap()
    }

    #[test]
    fn pin_embedding_is_a_valid_instance() {
        let inst = u2_instance(8, 3);
        let (x_prime, blocks) = build_pin_embedding(&inst).unwrap();
        assert_eq!(x_prime.len(), 8);
        assert_eq!(blocks.len(), 2);
        // PinInstance::new enforces disjointness, sizes, and |x' ∩ block| = 2.
        PinInstance::new(8, x_prime, blocks).unwrap();
    }

    #[test]
    fn debug_mode_recovers_input_and_matches_block_one() {
        let inst = u2_instance(8, 11);
        for seed in 0..40 {
            let run = reduce_in2ii_debug(&inst, &QuantumPinSolver, seed).unwrap();
            let logged = run.trace.get("input").unwrap();
            assert_eq!(logged["x"], json!(inst.x()));
            assert_eq!(logged["y"], json!(inst.y()));
            if let QuantumOutcome::Answer { block, .. } = run.outcome {
                assert_eq!(run.answer.is_some(), block == 1);
            }
        }
    }

    #[test]
    fn perfect_solver_never_errs_and_rate_is_four_over_n() {
        let n = 8;
        let trials = 4000u32;
        let mut answered = 0u32;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = DistributionSpec::conditioned(n, &[2]).unwrap();
        for _ in 0..trials {
            let inst = spec.sample_with(&mut rng).unwrap();
            let run = reduce_in2ii(&inst, &PerfectPinSolver, rng.random::<u64>()).unwrap();
            if let Some((sigma, z)) = &run.answer {
                answered += 1;
                assert!(member_ps(&inst, z, sigma).unwrap());
            }
        }
        let rate = answered as f64 / trials as f64;
        let p = 4.0 / n as f64;
        let sigma3 = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() <= sigma3, "rate {rate} vs {p} ± {sigma3}");
    }

    #[test]
    fn quantum_solver_answers_are_always_correct() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = DistributionSpec::conditioned(n, &[2]).unwrap();
        let mut answered = 0;
        for _ in 0..2000 {
            let inst = spec.sample_with(&mut rng).unwrap();
            let run = reduce_in2ii(&inst, &QuantumPinSolver, rng.random::<u64>()).unwrap();
            if let Some((sigma, z)) = &run.answer {
                answered += 1;
                assert!(member_ps(&inst, z, sigma).unwrap());
            }
        }
        assert!(answered > 0);
    }

    #[test]
    fn refuse_solver_never_answers() {
        let inst = u2_instance(8, 2);
        for seed in 0..20 {
            let run = reduce_in2ii(&inst, &RefusePinSolver, seed).unwrap();
            assert!(run.answer.is_none());
        }
    }

    #[test]
    fn fed_outcome_matches_member_pin_on_answer() {
        // Whatever the quantum protocol answers is a valid Pin witness for
        // the fed instance; checked against the independent membership test.
        let inst = u2_instance(8, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let run = reduce_in2ii(&inst, &QuantumPinSolver, rng.random::<u64>()).unwrap();
            if let QuantumOutcome::Answer { block, readout } = &run.outcome {
                assert!(member_pin(&run.fed, *block, readout).unwrap());
            }
        }
    }

    #[test]
    fn derandomization_finds_perfect_seed_and_rejects_refuser() {
        let d = derandomize_in2ii(&PerfectPinSolver, 8, 0.01, 10, 200, 77).unwrap();
        assert_eq!(d.seed, 0);
        assert_eq!(d.error_rate, 0.0);
        assert!(d.answer_rate >= 0.25);
        let err = derandomize_in2ii(&RefusePinSolver, 8, 0.01, 5, 50, 77).unwrap_err();
        assert!(matches!(err, ReductionError::SearchFailure(5)));
    }

    #[test]
    fn removal_pair_prefers_lexicographic_order() {
        // No forced index -> (0, 1); one forced -> paired with index 0.
        assert_eq!(removal_pair(&[1, 2, 3], &[7, 8]).unwrap(), (0, 1));
        assert_eq!(removal_pair(&[1, 2, 3], &[3, 8]).unwrap(), (0, 2));
        assert_eq!(removal_pair(&[1, 2, 3], &[1, 9]).unwrap(), (0, 1));
        assert_eq!(removal_pair(&[1, 2, 3, 4], &[2, 4]).unwrap(), (1, 3));
    }

    #[test]
    fn ii2iip_with_verbatim_solver_is_zero_error_and_answers() {
        let solver = PsTreeSolver::new(ProtocolTree::alice_verbatim(PairShape::ps(4).unwrap()))
            .unwrap();
        let spec = DistributionSpec::conditioned(4, &[2]).unwrap();
        let mut answered = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..400 {
            let inst = spec.sample_with(&mut rng).unwrap();
            let run = reduce_ii2iip(&inst, &solver, 0.5, None, rng.random::<u64>()).unwrap();
            if let Some(pair) = run.answer {
                answered += 1;
                assert!(member_piip(&inst, &pair));
            }
        }
        // The verbatim solver has singleton Alice sides, so the heavy pair
        // is x ∩ y itself whenever j0 = 2 (always at n = 4).
        assert_eq!(answered, 400);
    }

    #[test]
    fn ii2iip_with_trivial_solver_refuses_without_erring() {
        let solver =
            PsTreeSolver::new(ProtocolTree::trivial(PairShape::ps(4).unwrap())).unwrap();
        let spec = DistributionSpec::conditioned(4, &[2]).unwrap();
        let delta = BigRational::new(BigInt::from(1), BigInt::from(2));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let inst = spec.sample_with(&mut rng).unwrap();
            let run =
                reduce_ii2iip(&inst, &solver, 0.5, Some(delta.clone()), rng.random::<u64>())
                    .unwrap();
            assert!(run.answer.is_none());
        }
    }

    #[test]
    fn lift_reaches_every_j0_at_n8() {
        // The prefix swap only departs from the identity once j0 > 2, which
        // never happens at n = 4; check the bookkeeping at n = 8 directly.
        let spec = DistributionSpec::conditioned(8, &[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let inst = spec.sample_with(&mut rng).unwrap();
            for j0 in 2..=4u32 {
                let (x_tilde, i_x, i_y) = lift_to_j0(&inst, j0).unwrap();
                assert_eq!(x_tilde.len(), inst.x().len());
                assert_eq!(
                    intersect_sorted(&x_tilde, inst.y()).len(),
                    j0 as usize
                );
                assert!(i_x.iter().all(|e| inst.y().binary_search(e).is_err()));
                assert!(i_y.iter().all(|e| inst.x().binary_search(e).is_err()));
                // The original intersection survives the swap.
                for e in inst.intersection() {
                    assert!(x_tilde.binary_search(&e).is_ok());
                }
            }
        }
    }

    #[test]
    fn padding_with_perfect_solver_is_always_zero_on_x0() {
        // t = i0 and a disjoint (x', y'): the only intersection elements are
        // the padding tail, so the perfect solver's output lies inside it.
        let (n, i0, t) = (8, 2u32, 2usize);
        let m = n * n - i0;
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..200 {
            let (xp, yp) = sample_overlap_pair(m, n / 2 - i0, n - i0, 0, &mut rng).unwrap();
            let v = reduce_iip_padding(n, i0, t, &xp, &yp, &PerfectPiipSolver, rng.random::<u64>())
                .unwrap();
            assert_eq!(v, Verdict::Zero);
        }
    }

    #[test]
    fn padding_rate_on_x1_approaches_one_third() {
        let (n, i0, t) = (8, 2u32, 2usize);
        let m = n * n - i0;
        let trials = 6000u32;
        let mut zero = 0u32;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..trials {
            let (xp, yp) = sample_overlap_pair(m, n / 2 - i0, n - i0, 1, &mut rng).unwrap();
            let v = reduce_iip_padding(n, i0, t, &xp, &yp, &PerfectPiipSolver, rng.random::<u64>())
                .unwrap();
            if v == Verdict::Zero {
                zero += 1;
            }
        }
        let rate = zero as f64 / trials as f64;
        let p = 1.0 / 3.0;
        let sigma3 = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() <= sigma3, "rate {rate} vs {p} ± {sigma3}");
    }

    #[test]
    fn repetition_is_conjunctive() {
        let always_zero = |_s: u64| Ok(Verdict::Zero);
        assert_eq!(repeat_iip(1, 4, always_zero).unwrap(), Verdict::Zero);
        assert_eq!(repeat_iip(5, 4, always_zero).unwrap(), Verdict::Zero);
        let mut calls = 0;
        let flaky = |_s: u64| {
            calls += 1;
            Ok(if calls == 2 { Verdict::Refuse } else { Verdict::Zero })
        };
        assert_eq!(repeat_iip(5, 4, flaky).unwrap(), Verdict::Refuse);
    }

    #[test]
    fn repetition_rate_is_p_to_the_l() {
        // Single-run rate measured first, then compared against the l-fold
        // empirical rate.
        let (n, i0, t, l) = (8, 2u32, 2usize, 2u32);
        let m = n * n - i0;
        let trials = 4000u32;
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut single = 0u32;
        let mut repeated = 0u32;
        for _ in 0..trials {
            let (xp, yp) = sample_overlap_pair(m, n / 2 - i0, n - i0, 1, &mut rng).unwrap();
            if reduce_iip_padding(n, i0, t, &xp, &yp, &PerfectPiipSolver, rng.random::<u64>())
                .unwrap()
                == Verdict::Zero
            {
                single += 1;
            }
            let v = repeat_iip(l, rng.random::<u64>(), |s| {
                reduce_iip_padding(n, i0, t, &xp, &yp, &PerfectPiipSolver, s)
            })
            .unwrap();
            if v == Verdict::Zero {
                repeated += 1;
            }
        }
        let p = single as f64 / trials as f64;
        let q = repeated as f64 / trials as f64;
        let expect = p.powi(l as i32);
        let sigma3 = 3.0 * (expect * (1.0 - expect) / trials as f64).sqrt()
            + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((q - expect).abs() <= sigma3, "rate {q} vs {expect} ± {sigma3}");
    }

    #[test]
    fn embedding_preserves_intersection_and_is_local() {
        let (k1, k2, n) = (2u32, 3u32, 12u32);
        let m = 4 * k1 - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..2000 {
            let overlap = rng.random_range(0..=k1);
            let (xp, yp) = sample_overlap_pair(m, k1, k1, overlap, &mut rng).unwrap();
            let seed = rng.random::<u64>();
            let (x, y, choice) = embed_razlem(&xp, &yp, n, k2, seed).unwrap();
            assert_eq!(x.len() as u32, k1);
            assert_eq!(y.len() as u32, k2);
            assert_eq!(
                intersect_sorted(&x, &y).len(),
                intersect_sorted(&xp, &yp).len()
            );
            // Locality: each side recomputable from the shared choice alone.
            assert_eq!(x, choice.apply_alice(&xp));
            assert_eq!(y, choice.apply_bob(&yp));
            // And the shared choice is a function of the seed only.
            let (x2, _, _) = embed_razlem(&xp, &[1, 2], n, k2, seed).unwrap();
            assert_eq!(x, x2);
        }
    }

    #[test]
    fn embedding_rejects_infeasible_sizes() {
        assert!(embed_razlem(&[1, 2], &[1, 3], 12, 1, 0).is_err()); // k2 < k1
        assert!(embed_razlem(&[1, 2], &[1, 3], 6, 2, 0).is_err()); // m = 7 > 6
        assert!(embed_razlem(&[1, 2], &[1], 12, 3, 0).is_err()); // size mismatch
        assert!(embed_razlem(&[1, 9], &[1, 2], 12, 3, 0).is_err()); // out of [m]
    }

    #[test]
    fn embedding_preimage_of_rectangle_is_rectangle() {
        // Fix r; pull a random rectangle back through T_r and check product
        // closure over the full (tiny) preimage domain.
        let (k1, k2, n) = (1u32, 2u32, 5u32);
        let m = 4 * k1 - 1; // 3
        let choice = raz_choice(n, k1, k2, 123).unwrap();
        let shape = PairShape::disjointness(n, k1, k2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = ProtocolTree::random(shape, 2, &mut rng).unwrap();
        let part = extract_rectangles(&tree).unwrap();
        for rect in &part.rectangles {
            let in_a: Vec<bool> = (1..=m)
                .map(|e| {
                    let x = choice.apply_alice(&[e]);
                    let r = shape.side_rank(Owner::Alice, &x).unwrap();
                    rect.alice.binary_search(&r).is_ok()
                })
                .collect();
            let in_b: Vec<bool> = (1..=m)
                .map(|e| {
                    let y = choice.apply_bob(&[e]);
                    let r = shape.side_rank(Owner::Bob, &y).unwrap();
                    rect.bob.binary_search(&r).is_ok()
                })
                .collect();
            for (xe, &a_in) in in_a.iter().enumerate() {
                for (ye, &b_in) in in_b.iter().enumerate() {
                    // Membership of the embedded pair must factor through
                    // the per-side memberships.
                    let both = a_in && b_in;
                    let x = choice.apply_alice(&[xe as u32 + 1]);
                    let y = choice.apply_bob(&[ye as u32 + 1]);
                    let ra = shape.side_rank(Owner::Alice, &x).unwrap();
                    let rb = shape.side_rank(Owner::Bob, &y).unwrap();
                    let member = rect.alice.binary_search(&ra).is_ok()
                        && rect.bob.binary_search(&rb).is_ok();
                    assert_eq!(member, both);
                }
            }
        }
    }
}
