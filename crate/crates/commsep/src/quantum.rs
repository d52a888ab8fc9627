//! Exact and sampled simulation of the one-way quantum protocol for `Pin`.
//!
//! Alice sends `|α> = n^{-1/2} Σ_{j∈x} |j>` over a register of dimension
//! `2n^2`. Bob measures with the `n/4 + 1` block projectors, applies the
//! Walsh-Hadamard transform over `GF(2)^{2 log n + 1}` to the projected
//! state, and reads the computational basis. He refuses on block 0 or on a
//! zero readout; otherwise the readout is orthogonal to the encoded block
//! pair and `(i_0, a_{i_0})` is a correct answer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{walsh_hadamard_exact, walsh_hadamard_f64, BitString};
use crate::problems::{log2n, rational_to_f64, PinInstance, ProblemError};

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("exact mode supports n up to 1024, got {0}")]
    TooLarge(u32),
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// The result of one run: either a refusal or a block index with a nonzero
/// readout vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantumOutcome {
    Refuse,
    Answer { block: usize, readout: BitString },
}

impl QuantumOutcome {
    pub fn is_answer(&self) -> bool {
        matches!(self, QuantumOutcome::Answer { .. })
    }
}

/// Exact outcome distribution of one run of the protocol on a fixed
/// instance. Probabilities are arbitrary-precision rationals and sum to 1.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    pub n: u32,
    /// `Pr[i_0 = i]` for `i = 0..=n/4` (first measurement marginal).
    pub block_probs: Vec<BigRational>,
    /// Joint probabilities of the answered outcomes `(block, readout)`.
    pub answers: Vec<(usize, BitString, BigRational)>,
    /// Total refusal probability (block 0 plus zero readouts).
    pub refuse_prob: BigRational,
}

impl OutcomeDistribution {
    pub fn answer_probability(&self) -> BigRational {
        self.answers
            .iter()
            .fold(BigRational::zero(), |acc, (_, _, p)| acc + p)
    }

    pub fn total(&self) -> BigRational {
        self.answer_probability() + &self.refuse_prob
    }

    /// True iff, within every block, all answered readouts carry the same
    /// conditional probability (uniformity over the orthogonal set minus 0̄).
    pub fn conditional_readout_uniform(&self) -> bool {
        let blocks = self.block_probs.len() - 1;
        for i in 1..=blocks {
            let probs: Vec<&BigRational> = self
                .answers
                .iter()
                .filter(|(b, _, _)| *b == i)
                .map(|(_, _, p)| p)
                .collect();
            if probs.is_empty() {
                return false;
            }
            if probs.iter().any(|p| *p != probs[0]) {
                return false;
            }
        }
        true
    }

    /// JSON form used by the CLI: block marginals as exact `p/q` strings.
    pub fn to_json(&self) -> serde_json::Value {
        let blocks: serde_json::Map<String, serde_json::Value> = self
            .block_probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i.to_string(), serde_json::Value::String(p.to_string())))
            .collect();
        serde_json::json!({
            "n": self.n,
            "blocks": blocks,
            "answer_prob": self.answer_probability().to_string(),
            "conditional_readout_uniform": self.conditional_readout_uniform(),
        })
    }

    /// A reusable sampler over the exact outcome distribution.
    pub fn sampler(&self) -> OutcomeSampler {
        let mut outcomes = Vec::with_capacity(self.answers.len() + 1);
        let mut cumulative = Vec::with_capacity(self.answers.len() + 1);
        let mut acc = 0.0f64;
        for (block, readout, p) in &self.answers {
            acc += rational_to_f64(p);
            outcomes.push(QuantumOutcome::Answer {
                block: *block,
                readout: *readout,
            });
            cumulative.push(acc);
        }
        acc += rational_to_f64(&self.refuse_prob);
        outcomes.push(QuantumOutcome::Refuse);
        cumulative.push(acc);
        OutcomeSampler {
            outcomes,
            cumulative,
        }
    }
}

/// Cumulative-weight sampler built from an exact distribution.
pub struct OutcomeSampler {
    outcomes: Vec<QuantumOutcome>,
    cumulative: Vec<f64>,
}

impl OutcomeSampler {
    pub fn draw(&self, rng: &mut impl Rng) -> QuantumOutcome {
        let total = *self.cumulative.last().expect("nonempty");
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[idx.min(self.outcomes.len() - 1)].clone()
    }
}

/// Runs the projective-measurement + Hadamard pipeline exactly.
///
/// Amplitudes through the pipeline are integer multiples of a common
/// `2^{-s/2}` scale (`n` is a power of two), so squared magnitudes are exact
/// rationals. The Walsh-Hadamard step is the actual butterfly, not the
/// closed form; the closed form lives in
/// [`answer_probability_closed_form`] as an independent cross-check.
pub fn run_exact(inst: &PinInstance) -> Result<OutcomeDistribution, QuantumError> {
    let n = inst.n();
    if n > 1024 {
        return Err(QuantumError::TooLarge(n));
    }
    let dim = inst.ground() as usize;
    let m = 2 * log2n(n) + 1;
    debug_assert_eq!(1usize << m, dim);
    let scale_pow_initial = log2n(n) as u32; // |α> amplitudes are 2^{-log2(n)/2}

    let blocks = inst.blocks().len();
    let mut block_probs = vec![BigRational::zero(); blocks + 1];
    let mut answers = Vec::new();
    let mut refuse_prob = BigRational::zero();

    for (idx, block) in inst.blocks().iter().enumerate() {
        let i = idx + 1;
        // Unnormalized projection E_i |α>: WHT is unitary, so squared output
        // amplitudes are joint probabilities Pr[i_0 = i, readout = j].
        let mut coeffs = vec![BigRational::zero(); dim];
        for &e in block {
            if inst.x().binary_search(&e).is_ok() {
                coeffs[(e - 1) as usize] = BigRational::one();
            }
        }
        let extra = walsh_hadamard_exact(&mut coeffs).expect("power-of-two dimension");
        let scale_pow = scale_pow_initial + extra;
        let scale = BigRational::new(BigInt::one(), BigInt::from(1u64) << scale_pow);
        let mut block_total = BigRational::zero();
        for (j, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let p = c * c * &scale;
            block_total += &p;
            if j == 0 {
                refuse_prob += &p; // readout 0̄
            } else {
                answers.push((i, BitString::new(j as u64, m), p));
            }
        }
        block_probs[i] = block_total;
    }

    // Block 0 catches everything outside the union of the blocks.
    let covered: BigRational = block_probs
        .iter()
        .fold(BigRational::zero(), |acc, p| acc + p);
    block_probs[0] = BigRational::one() - &covered;
    refuse_prob += &block_probs[0];

    Ok(OutcomeDistribution {
        n,
        block_probs,
        answers,
        refuse_prob,
    })
}

/// Closed form `(1/2)(1 - 1/n^2)` for the answer probability; kept separate
/// from the state-vector pipeline as an independent oracle.
pub fn answer_probability_closed_form(n: u32) -> BigRational {
    let nn = BigInt::from(n as u64 * n as u64);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    half * (BigRational::one() - BigRational::new(BigInt::one(), nn))
}

/// One outcome drawn from the protocol's distribution, via the
/// double-precision state-vector pipeline (suitable for larger `n`).
///
/// The answered support stays exact even in floats: a zero output amplitude
/// of the Hadamard step is an exact cancellation of two equal doubles.
pub fn run_sampled_with(inst: &PinInstance, rng: &mut impl Rng) -> QuantumOutcome {
    let n = inst.n() as f64;
    let dim = inst.ground() as usize;
    let m = 2 * log2n(inst.n()) + 1;

    // First measurement: block weights |E_i α|^2.
    let amp = 1.0 / n.sqrt();
    let mut weights = Vec::with_capacity(inst.blocks().len() + 1);
    let mut covered = 0.0;
    for block in inst.blocks() {
        let w: f64 = block
            .iter()
            .filter(|e| inst.x().binary_search(e).is_ok())
            .map(|_| amp * amp)
            .sum();
        covered += w;
        weights.push(w);
    }
    let w0 = 1.0 - covered;
    let mut u: f64 = rng.random::<f64>();
    let mut block_idx = 0usize; // 0 = reject branch
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            block_idx = i + 1;
            break;
        }
        u -= w;
    }
    if block_idx == 0 {
        debug_assert!(u <= w0 + 1e-9);
        return QuantumOutcome::Refuse;
    }

    // Normalize the projected state, transform, measure.
    let norm = weights[block_idx - 1].sqrt();
    let mut state = vec![0.0f64; dim];
    for &e in &inst.blocks()[block_idx - 1] {
        if inst.x().binary_search(&e).is_ok() {
            state[(e - 1) as usize] = amp / norm;
        }
    }
    walsh_hadamard_f64(&mut state).expect("power-of-two dimension");
    let mut u: f64 = rng.random::<f64>();
    let mut readout = dim - 1;
    for (j, a) in state.iter().enumerate() {
        let p = a * a;
        if u < p {
            readout = j;
            break;
        }
        u -= p;
    }
    if readout == 0 {
        QuantumOutcome::Refuse
    } else {
        QuantumOutcome::Answer {
            block: block_idx,
            readout: BitString::new(readout as u64, m),
        }
    }
}

pub fn run_sampled(inst: &PinInstance, seed: u64) -> QuantumOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_sampled_with(inst, &mut rng)
}

/// Number of qubits one run transmits: `ceil(log2(2n^2)) = 2 log2 n + 1`.
pub fn qubit_cost(n: u32) -> u32 {
    2 * log2n(n) as u32 + 1
}

/// `t = ceil(log_{3/2}(1/ε))` parallel repetitions.
pub fn repetition_count(epsilon: f64) -> Result<u32, QuantumError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(QuantumError::BadEpsilon(epsilon));
    }
    let t = ((1.0 / epsilon).ln() / 1.5f64.ln()).ceil() as u32;
    Ok(t.max(1))
}

#[derive(Clone, Debug, Serialize)]
#[allow(clippy::struct_field_names)]
pub struct RepeatedOutcome {
    pub outcome: QuantumOutcome,
    pub repetitions: u32,
    pub qubits: u32,
}

/// Runs `t` independent instances of the protocol in parallel and returns
/// the first answered outcome, or a refusal if all refuse.
pub fn run_repeated_with(
    inst: &PinInstance,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<RepeatedOutcome, QuantumError> {
    let t = repetition_count(epsilon)?;
    let mut outcome = QuantumOutcome::Refuse;
    for _ in 0..t {
        let o = run_sampled_with(inst, rng);
        if o.is_answer() && !outcome.is_answer() {
            outcome = o;
            // Keep drawing so the qubit accounting reflects parallel runs;
            // the remaining runs are independent and discarded.
        }
    }
    Ok(RepeatedOutcome {
        outcome,
        repetitions: t,
        qubits: t * qubit_cost(inst.n()),
    })
}

pub fn run_repeated(
    inst: &PinInstance,
    epsilon: f64,
    seed: u64,
) -> Result<RepeatedOutcome, QuantumError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_repeated_with(inst, epsilon, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{member_pin, sample_pin};
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_block_probabilities() {
        for n in [4u32, 8, 16] {
            let inst = sample_pin(n, 3).unwrap();
            let dist = run_exact(&inst).unwrap();
            assert_eq!(dist.block_probs[0], rat(1, 2), "n = {n}");
            for i in 1..dist.block_probs.len() {
                assert_eq!(dist.block_probs[i], rat(2, n as i64));
            }
            assert!(dist.total().is_one());
        }
    }

    #[test]
    fn exact_answer_probability_matches_closed_form() {
        for n in [4u32, 8, 16] {
            let inst = sample_pin(n, 11).unwrap();
            let dist = run_exact(&inst).unwrap();
            assert_eq!(dist.answer_probability(), answer_probability_closed_form(n));
        }
        // n = 4: (1/2)(1 - 1/16) = 15/32.
        assert_eq!(answer_probability_closed_form(4), rat(15, 32));
    }

    #[test]
    fn exact_readout_uniform_and_orthogonal() {
        let inst = sample_pin(8, 21).unwrap();
        let dist = run_exact(&inst).unwrap();
        assert!(dist.conditional_readout_uniform());
        for (block, readout, p) in &dist.answers {
            assert!(!readout.is_zero());
            assert!(p > &BigRational::zero());
            assert!(member_pin(&inst, *block, readout).unwrap());
        }
        // Each block answers on exactly n^2 - 1 readouts.
        let per_block = dist.answers.iter().filter(|(b, _, _)| *b == 1).count();
        assert_eq!(per_block, 63);
    }

    #[test]
    fn sampled_block_marginal_within_3_sigma() {
        let inst = sample_pin(8, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 100_000u64;
        let mut refusals_block0 = 0u64;
        for _ in 0..trials {
            // Count first-measurement refusals by re-deriving from outcome:
            // an answered outcome or a zero readout both mean i_0 != 0 with
            // probability 1/2 overall; test the aggregate refusal rate
            // instead, whose exact value is 1 - (1/2)(1 - 1/n^2).
            if !run_sampled_with(&inst, &mut rng).is_answer() {
                refusals_block0 += 1;
            }
        }
        let p = 1.0 - rational_to_f64(&answer_probability_closed_form(8));
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let observed = refusals_block0 as f64 / trials as f64;
        assert!((observed - p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn sampled_outcomes_are_zero_error() {
        let inst = sample_pin(8, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20_000 {
            if let QuantumOutcome::Answer { block, readout } = run_sampled_with(&inst, &mut rng) {
                assert!(member_pin(&inst, block, &readout).unwrap());
            }
        }
    }

    #[test]
    fn sampled_is_deterministic() {
        let inst = sample_pin(16, 2).unwrap();
        assert_eq!(run_sampled(&inst, 77), run_sampled(&inst, 77));
    }

    #[test]
    fn sampler_agrees_with_exact_distribution() {
        let inst = sample_pin(4, 13).unwrap();
        let dist = run_exact(&inst).unwrap();
        let sampler = dist.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 200_000u64;
        let mut answered = 0u64;
        for _ in 0..trials {
            if sampler.draw(&mut rng).is_answer() {
                answered += 1;
            }
        }
        let p = rational_to_f64(&dist.answer_probability());
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(((answered as f64 / trials as f64) - p).abs() <= 3.0 * sigma);
    }

    #[test]
    fn repetition_parameters() {
        assert_eq!(repetition_count(1.0).unwrap(), 1);
        assert_eq!(repetition_count(0.01).unwrap(), 12);
        assert!(repetition_count(0.0).is_err());
        assert!(repetition_count(1.5).is_err());
    }

    #[test]
    fn repeated_answers_stay_zero_error() {
        let inst = sample_pin(8, 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let r = run_repeated_with(&inst, 0.05, &mut rng).unwrap();
            assert_eq!(r.qubits, r.repetitions * qubit_cost(8));
            if let QuantumOutcome::Answer { block, readout } = r.outcome {
                assert!(member_pin(&inst, block, &readout).unwrap());
            }
        }
    }

    #[test]
    fn qubit_cost_values() {
        assert_eq!(qubit_cost(4), 5);
        assert_eq!(qubit_cost(1024), 21);
        assert_eq!(3 * qubit_cost(8), 21); // additivity under repetition
    }

}
