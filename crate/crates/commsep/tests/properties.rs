//! Cross-module property tests: randomized invariants that must hold for
//! every input, independent of the statistical suites.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use commsep::problems::{member_piip, sample_pin_with, DistributionSpec};
use commsep::protocols::{extract_rectangles, PairShape, ProtocolTree};
use commsep::quantum::{run_exact, run_sampled};
use commsep::reductions::{
    reduce_iip_padding, sample_overlap_pair, PerfectPiipSolver, RefusePiipSolver, Verdict,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Sampled instances always satisfy their own cardinality and
    /// conditioning contracts.
    #[test]
    fn conditioned_sampling_hits_the_requested_overlap(seed in any::<u64>(), j in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = DistributionSpec::conditioned(8, &[j as u32]).unwrap();
        let inst = spec.sample_with(&mut rng).unwrap();
        prop_assert_eq!(inst.x().len(), 4);
        prop_assert_eq!(inst.y().len(), 8);
        prop_assert_eq!(inst.intersection().len(), j);
        prop_assert!(member_piip(&inst, &inst.intersection()));
    }

    /// The exact outcome distribution is a probability distribution with
    /// the closed-form answer mass, at any sampled instance.
    #[test]
    fn exact_distribution_is_normalized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = sample_pin_with(8, &mut rng).unwrap();
        let dist = run_exact(&inst).unwrap();
        prop_assert!(dist.total().is_integer() && dist.total().to_integer() == 1.into());
        prop_assert!(dist.conditional_readout_uniform());
    }

    /// Sampling is a pure function of (instance, seed).
    #[test]
    fn sampled_runs_are_reproducible(inst_seed in any::<u64>(), run_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
        let inst = sample_pin_with(4, &mut rng).unwrap();
        prop_assert_eq!(run_sampled(&inst, run_seed), run_sampled(&inst, run_seed));
    }

    /// Random trees always induce true partitions: rectangles are disjoint
    /// and cover the whole pair space.
    #[test]
    fn random_tree_rectangles_partition_the_domain(seed in any::<u64>(), depth in 1u32..=5) {
        let shape = PairShape::ps(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = ProtocolTree::random(shape, depth, &mut rng).unwrap();
        let partition = extract_rectangles(&tree).unwrap();
        let covered: u128 = partition
            .rectangles
            .iter()
            .map(|r| r.alice.len() as u128 * r.bob.len() as u128)
            .sum();
        prop_assert_eq!(covered, shape.pair_count());
        let mut keys: Vec<&str> = partition
            .rectangles
            .iter()
            .map(|r| r.transcript.as_str())
            .collect();
        keys.sort_unstable();
        keys.dedup();
        prop_assert_eq!(keys.len(), partition.rectangles.len());
    }

    /// The padding wrapper's verdict contract: a refusing solver never
    /// produces `zero`, and the perfect solver on disjoint inputs always
    /// does (every output lands in the shared tail).
    #[test]
    fn padding_verdicts_respect_the_solver(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xp, yp) = sample_overlap_pair(62, 2, 6, 0, &mut rng).unwrap();
        let zero = reduce_iip_padding(8, 2, 2, &xp, &yp, &PerfectPiipSolver, seed).unwrap();
        prop_assert_eq!(zero, Verdict::Zero);
        let refuse = reduce_iip_padding(8, 2, 2, &xp, &yp, &RefusePiipSolver, seed).unwrap();
        prop_assert_eq!(refuse, Verdict::Refuse);
    }

    /// Overlap sampling honors its requested sizes exactly.
    #[test]
    fn overlap_pairs_have_the_requested_shape(seed in any::<u64>(), overlap in 0u32..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = sample_overlap_pair(62, 4, 8, overlap, &mut rng).unwrap();
        prop_assert_eq!(x.len(), 4);
        prop_assert_eq!(y.len(), 8);
        let shared = x.iter().filter(|e| y.contains(e)).count();
        prop_assert_eq!(shared as u32, overlap);
    }
}
