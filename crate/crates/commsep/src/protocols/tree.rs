//! Protocol trees: each internal node is owned by one party, who computes a
//! single bit from her input (and optionally from shared coins) and sends it;
//! leaves optionally emit an answer set. Transcript bits are accounted
//! against a declared cost.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::problems::{intersect_sorted, Instance};

use super::{PairShape, ProtocolError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Alice,
    Bob,
}

/// How a node's owner computes the bit she sends.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BitRule {
    Constant { value: bool },
    /// Bit `bit` (LSB = 0) of the lexicographic rank of the owner's set.
    RankBit { bit: u8 },
    /// Parity of the smallest element (1-based) of the owner's set.
    MinElementParity,
    /// Arbitrary function of the owner's input, tabulated by rank.
    Table { values: Vec<bool> },
    /// Bit `bit` of the shared coin string.
    CoinBit { bit: u8 },
}

/// What a leaf outputs once the conversation ends there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerRule {
    /// Relation-style protocols that only partition inputs.
    None,
    EmptySet,
    /// Reassemble Alice's rank from the bits she sent (in transcript order,
    /// LSB first) and output the intersection with Bob's set. Intended for
    /// trees whose Alice nodes send `RankBit {0}, {1}, ...` down every path.
    IntersectDecodedAlice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Decision {
        owner: Owner,
        rule: BitRule,
        on_zero: usize,
        on_one: usize,
    },
    Leaf {
        answer: AnswerRule,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolTree {
    pub shape: PairShape,
    pub declared_cost: u32,
    pub coin_bits: u8,
    /// Node 0 is the root; children must have strictly larger indices.
    pub nodes: Vec<TreeNode>,
}

/// Conversation record. Consecutive bits from the same party are merged
/// into one message, so `bits` is the total channel usage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub messages: Vec<(Owner, Vec<bool>)>,
    pub bits: u32,
}

impl Transcript {
    fn new() -> Self {
        Transcript {
            messages: Vec::new(),
            bits: 0,
        }
    }

    fn push(&mut self, owner: Owner, bit: bool) {
        match self.messages.last_mut() {
            Some((o, msg)) if *o == owner => msg.push(bit),
            _ => self.messages.push((owner, vec![bit])),
        }
        self.bits += 1;
    }

    /// All bits one party sent, in conversation order.
    pub fn bits_from(&self, owner: Owner) -> Vec<bool> {
        self.messages
            .iter()
            .filter(|(o, _)| *o == owner)
            .flat_map(|(_, msg)| msg.iter().copied())
            .collect()
    }

    /// Leaves reached by equal transcripts coincide, so this string keys
    /// the transcript partition.
    pub fn key(&self) -> String {
        let mut s = String::new();
        for (owner, msg) in &self.messages {
            s.push(match owner {
                Owner::Alice => 'a',
                Owner::Bob => 'b',
            });
            for &bit in msg {
                s.push(if bit { '1' } else { '0' });
            }
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub leaf: usize,
    pub transcript: Transcript,
    pub answer: Option<Vec<u32>>,
}

impl ProtocolTree {
    pub fn new(
        shape: PairShape,
        declared_cost: u32,
        coin_bits: u8,
        nodes: Vec<TreeNode>,
    ) -> Result<Self, ProtocolError> {
        let tree = ProtocolTree {
            shape,
            declared_cost,
            coin_bits,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Structural checks; call after deserializing untrusted trees.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.nodes.is_empty() {
            return Err(ProtocolError::BadTree("empty node list".into()));
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            let TreeNode::Decision {
                owner,
                rule,
                on_zero,
                on_one,
            } = node
            else {
                continue;
            };
            for child in [on_zero, on_one] {
                if *child <= idx || *child >= self.nodes.len() {
                    return Err(ProtocolError::BadTree(format!(
                        "node {idx} has child {child} out of order"
                    )));
                }
            }
            match rule {
                BitRule::Table { values } => {
                    let want = self.shape.side_count(*owner);
                    if values.len() as u128 != want {
                        return Err(ProtocolError::BadTree(format!(
                            "table at node {idx} has {} entries, domain has {want}",
                            values.len()
                        )));
                    }
                }
                BitRule::RankBit { bit } => {
                    if *bit >= 64 {
                        return Err(ProtocolError::BadTree(format!(
                            "rank bit {bit} out of range at node {idx}"
                        )));
                    }
                }
                BitRule::CoinBit { bit } if *bit >= self.coin_bits => {
                    return Err(ProtocolError::BadTree(format!(
                        "coin bit {bit} out of range at node {idx}"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn eval_bit(&self, owner: Owner, rule: &BitRule, rank: u64, coins: &[bool]) -> bool {
        match rule {
            BitRule::Constant { value } => *value,
            BitRule::RankBit { bit } => (rank >> bit) & 1 == 1,
            BitRule::MinElementParity => {
                let set = self.shape.side_set(owner, rank);
                set[0] % 2 == 1
            }
            BitRule::Table { values } => values[rank as usize],
            BitRule::CoinBit { bit } => coins[*bit as usize],
        }
    }

    /// Walk the tree without building a transcript; used by exhaustive
    /// enumeration.
    pub fn leaf_of(
        &self,
        alice_rank: u64,
        bob_rank: u64,
        coins: &[bool],
    ) -> Result<usize, ProtocolError> {
        let mut idx = 0;
        let mut used = 0u32;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { .. } => return Ok(idx),
                TreeNode::Decision {
                    owner,
                    rule,
                    on_zero,
                    on_one,
                } => {
                    used += 1;
                    if used > self.declared_cost {
                        return Err(ProtocolError::CostViolation {
                            declared: self.declared_cost,
                            used,
                        });
                    }
                    let rank = match owner {
                        Owner::Alice => alice_rank,
                        Owner::Bob => bob_rank,
                    };
                    idx = if self.eval_bit(*owner, rule, rank, coins) {
                        *on_one
                    } else {
                        *on_zero
                    };
                }
            }
        }
    }

    pub fn run_ranks(
        &self,
        alice_rank: u64,
        bob_rank: u64,
        coins: &[bool],
    ) -> Result<RunRecord, ProtocolError> {
        if coins.len() != self.coin_bits as usize {
            return Err(ProtocolError::BadTree(format!(
                "expected {} coin bits, got {}",
                self.coin_bits,
                coins.len()
            )));
        }
        let mut idx = 0;
        let mut transcript = Transcript::new();
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { answer } => {
                    let answer = self.eval_answer(answer, bob_rank, &transcript)?;
                    return Ok(RunRecord {
                        leaf: idx,
                        transcript,
                        answer,
                    });
                }
                TreeNode::Decision {
                    owner,
                    rule,
                    on_zero,
                    on_one,
                } => {
                    if transcript.bits >= self.declared_cost {
                        return Err(ProtocolError::CostViolation {
                            declared: self.declared_cost,
                            used: transcript.bits + 1,
                        });
                    }
                    let rank = match owner {
                        Owner::Alice => alice_rank,
                        Owner::Bob => bob_rank,
                    };
                    let bit = self.eval_bit(*owner, rule, rank, coins);
                    transcript.push(*owner, bit);
                    idx = if bit { *on_one } else { *on_zero };
                }
            }
        }
    }

    fn eval_answer(
        &self,
        rule: &AnswerRule,
        bob_rank: u64,
        transcript: &Transcript,
    ) -> Result<Option<Vec<u32>>, ProtocolError> {
        match rule {
            AnswerRule::None => Ok(None),
            AnswerRule::EmptySet => Ok(Some(Vec::new())),
            AnswerRule::IntersectDecodedAlice => {
                let alice_bits = transcript.bits_from(Owner::Alice);
                let mut rank = 0u64;
                for (i, &bit) in alice_bits.iter().enumerate() {
                    if bit {
                        if i >= 64 {
                            return Err(ProtocolError::BadTree(
                                "decoded rank exceeds 64 bits".into(),
                            ));
                        }
                        rank |= 1 << i;
                    }
                }
                if rank as u128 >= self.shape.alice_count() {
                    return Err(ProtocolError::BadTree(format!(
                        "decoded alice rank {rank} out of range"
                    )));
                }
                let x = self.shape.side_set(Owner::Alice, rank);
                let y = self.shape.side_set(Owner::Bob, bob_rank);
                Ok(Some(intersect_sorted(&x, &y)))
            }
        }
    }

    /// Run on a concrete `PS`-shaped instance, drawing coins from `seed`.
    pub fn run_instance(&self, inst: &Instance, seed: u64) -> Result<RunRecord, ProtocolError> {
        let want = PairShape::ps(inst.n())?;
        if self.shape != want {
            return Err(ProtocolError::ShapeMismatch);
        }
        let alice_rank = self.shape.side_rank(Owner::Alice, inst.x())?;
        let bob_rank = self.shape.side_rank(Owner::Bob, inst.y())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coins: Vec<bool> = (0..self.coin_bits).map(|_| rng.random::<bool>()).collect();
        self.run_ranks(alice_rank, bob_rank, &coins)
    }

    /// Replace every coin lookup with the given fixed values, yielding a
    /// deterministic tree suitable for rectangle extraction.
    pub fn fix_coins(&self, coins: &[bool]) -> Result<ProtocolTree, ProtocolError> {
        if coins.len() != self.coin_bits as usize {
            return Err(ProtocolError::BadTree(format!(
                "expected {} coin bits, got {}",
                self.coin_bits,
                coins.len()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .map(|node| match node {
                TreeNode::Decision {
                    owner,
                    rule: BitRule::CoinBit { bit },
                    on_zero,
                    on_one,
                } => TreeNode::Decision {
                    owner: *owner,
                    rule: BitRule::Constant {
                        value: coins[*bit as usize],
                    },
                    on_zero: *on_zero,
                    on_one: *on_one,
                },
                other => other.clone(),
            })
            .collect();
        ProtocolTree::new(self.shape, self.declared_cost, 0, nodes)
    }

    /// Single leaf answering nothing; zero communication.
    pub fn trivial(shape: PairShape) -> ProtocolTree {
        ProtocolTree {
            shape,
            declared_cost: 0,
            coin_bits: 0,
            nodes: vec![TreeNode::Leaf {
                answer: AnswerRule::None,
            }],
        }
    }

    /// Single leaf always answering the empty set.
    pub fn constant_empty(shape: PairShape) -> ProtocolTree {
        ProtocolTree {
            shape,
            declared_cost: 0,
            coin_bits: 0,
            nodes: vec![TreeNode::Leaf {
                answer: AnswerRule::EmptySet,
            }],
        }
    }

    /// Alice sends her rank verbatim; the leaf outputs `x ∩ y` exactly.
    pub fn alice_verbatim(shape: PairShape) -> ProtocolTree {
        let bits = {
            let count = shape.alice_count();
            let mut b = 0u8;
            while (1u128 << b) < count {
                b += 1;
            }
            b
        };
        let mut nodes = Vec::new();
        // A path of decision nodes: node i sends rank bit i and both
        // branches continue to node i + 1; the final node is the leaf.
        for bit in 0..bits {
            nodes.push(TreeNode::Decision {
                owner: Owner::Alice,
                rule: BitRule::RankBit { bit },
                on_zero: bit as usize + 1,
                on_one: bit as usize + 1,
            });
        }
        nodes.push(TreeNode::Leaf {
            answer: AnswerRule::IntersectDecodedAlice,
        });
        ProtocolTree {
            shape,
            declared_cost: bits as u32,
            coin_bits: 0,
            nodes,
        }
    }

    /// One Alice bit (parity of her minimum element), two leaves.
    pub fn min_parity(shape: PairShape) -> ProtocolTree {
        ProtocolTree {
            shape,
            declared_cost: 1,
            coin_bits: 0,
            nodes: vec![
                TreeNode::Decision {
                    owner: Owner::Alice,
                    rule: BitRule::MinElementParity,
                    on_zero: 1,
                    on_one: 2,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
            ],
        }
    }

    /// Complete deterministic tree of the given depth with random table
    /// rules and alternating-at-random owners; leaves answer nothing.
    pub fn random(
        shape: PairShape,
        depth: u32,
        rng: &mut impl Rng,
    ) -> Result<ProtocolTree, ProtocolError> {
        if depth == 0 || depth > 8 {
            return Err(ProtocolError::BadTree(format!("bad random depth {depth}")));
        }
        let decisions = (1usize << depth) - 1;
        let leaves = 1usize << depth;
        let mut nodes = Vec::with_capacity(decisions + leaves);
        // Heap layout: node i has children 2i+1 and 2i+2, so child indices
        // always exceed the parent's.
        for i in 0..decisions {
            let owner = if rng.random::<bool>() {
                Owner::Alice
            } else {
                Owner::Bob
            };
            let count = shape.side_count(owner) as usize;
            let values = (0..count).map(|_| rng.random::<bool>()).collect();
            nodes.push(TreeNode::Decision {
                owner,
                rule: BitRule::Table { values },
                on_zero: 2 * i + 1,
                on_one: 2 * i + 2,
            });
        }
        for _ in 0..leaves {
            nodes.push(TreeNode::Leaf {
                answer: AnswerRule::None,
            });
        }
        ProtocolTree::new(shape, depth, 0, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::DistributionSpec;

    fn ps4() -> PairShape {
        PairShape::ps(4).unwrap()
    }

    #[test]
    fn trivial_tree_has_empty_transcript() {
        let tree = ProtocolTree::trivial(ps4());
        let rec = tree.run_ranks(0, 0, &[]).unwrap();
        assert_eq!(rec.leaf, 0);
        assert_eq!(rec.transcript.bits, 0);
        assert!(rec.transcript.messages.is_empty());
        assert_eq!(rec.answer, None);
    }

    #[test]
    fn constant_empty_is_correct_exactly_on_disjoint_or_small_overlap() {
        // Answering the empty set is correct iff |x ∩ y| = 0, which has
        // probability 11/20 under uniform inputs at n = 4.
        let shape = ps4();
        let tree = ProtocolTree::constant_empty(shape);
        let alice = shape.side_masks(Owner::Alice).unwrap();
        let bob = shape.side_masks(Owner::Bob).unwrap();
        let mut correct = 0u64;
        for (ar, am) in alice.iter().enumerate() {
            for bm in &bob {
                let rec = tree.run_ranks(ar as u64, 0, &[]).unwrap();
                let ok = rec.answer.as_deref() == Some(&[][..]);
                assert!(ok);
                if am & bm == 0 {
                    correct += 1;
                }
            }
        }
        // 11/20 of 218400.
        assert_eq!(correct, 218_400 * 11 / 20);
    }

    #[test]
    fn alice_verbatim_computes_intersection() {
        let shape = ps4();
        let tree = ProtocolTree::alice_verbatim(shape);
        assert_eq!(tree.declared_cost, 7); // C(16,2) = 120 <= 2^7
        let spec = DistributionSpec::uniform(4).unwrap();
        for seed in 0..200 {
            let inst = spec.sample(seed).unwrap();
            let rec = tree.run_instance(&inst, seed).unwrap();
            assert_eq!(rec.answer.as_deref(), Some(&inst.intersection()[..]));
            assert_eq!(rec.transcript.bits, 7);
            assert_eq!(rec.transcript.messages.len(), 1);
        }
    }

    #[test]
    fn transcript_merges_consecutive_same_owner_bits() {
        let shape = ps4();
        let tree = ProtocolTree::new(
            shape,
            3,
            0,
            vec![
                TreeNode::Decision {
                    owner: Owner::Alice,
                    rule: BitRule::Constant { value: true },
                    on_zero: 1,
                    on_one: 1,
                },
                TreeNode::Decision {
                    owner: Owner::Alice,
                    rule: BitRule::Constant { value: false },
                    on_zero: 2,
                    on_one: 2,
                },
                TreeNode::Decision {
                    owner: Owner::Bob,
                    rule: BitRule::Constant { value: true },
                    on_zero: 3,
                    on_one: 3,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
            ],
        )
        .unwrap();
        let rec = tree.run_ranks(0, 0, &[]).unwrap();
        assert_eq!(rec.transcript.bits, 3);
        assert_eq!(
            rec.transcript.messages,
            vec![
                (Owner::Alice, vec![true, false]),
                (Owner::Bob, vec![true])
            ]
        );
        assert_eq!(rec.transcript.key(), "a10b1");
    }

    #[test]
    fn cost_violation_is_reported() {
        let shape = ps4();
        let mut tree = ProtocolTree::min_parity(shape);
        tree.declared_cost = 0;
        let err = tree.run_ranks(0, 0, &[]).unwrap_err();
        assert!(matches!(
            err,
            ProtocolError::CostViolation {
                declared: 0,
                used: 1
            }
        ));
    }

    #[test]
    fn validation_rejects_backward_edges_and_bad_tables() {
        let shape = ps4();
        let bad = ProtocolTree::new(
            shape,
            1,
            0,
            vec![TreeNode::Decision {
                owner: Owner::Alice,
                rule: BitRule::Constant { value: false },
                on_zero: 0,
                on_one: 0,
            }],
        );
        assert!(matches!(bad, Err(ProtocolError::BadTree(_))));

        let bad = ProtocolTree::new(
            shape,
            1,
            0,
            vec![
                TreeNode::Decision {
                    owner: Owner::Alice,
                    rule: BitRule::Table {
                        values: vec![true; 7],
                    },
                    on_zero: 1,
                    on_one: 1,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
            ],
        );
        assert!(matches!(bad, Err(ProtocolError::BadTree(_))));
    }

    #[test]
    fn coin_fixing_yields_matching_deterministic_runs() {
        let shape = ps4();
        let tree = ProtocolTree::new(
            shape,
            2,
            2,
            vec![
                TreeNode::Decision {
                    owner: Owner::Alice,
                    rule: BitRule::CoinBit { bit: 0 },
                    on_zero: 1,
                    on_one: 2,
                },
                TreeNode::Decision {
                    owner: Owner::Bob,
                    rule: BitRule::CoinBit { bit: 1 },
                    on_zero: 3,
                    on_one: 4,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
                TreeNode::Leaf {
                    answer: AnswerRule::None,
                },
            ],
        )
        .unwrap();
        for coins in [[false, false], [false, true], [true, false], [true, true]] {
            let fixed = tree.fix_coins(&coins).unwrap();
            assert_eq!(fixed.coin_bits, 0);
            for (a, b) in [(0, 0), (5, 17), (119, 1819)] {
                assert_eq!(
                    tree.run_ranks(a, b, &coins).unwrap().leaf,
                    fixed.run_ranks(a, b, &[]).unwrap().leaf
                );
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let shape = ps4();
        let tree = ProtocolTree::alice_verbatim(shape);
        let text = serde_json::to_string(&tree).unwrap();
        let back: ProtocolTree = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn leaf_of_matches_full_run() {
        let shape = ps4();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tree = ProtocolTree::random(shape, 3, &mut rng).unwrap();
        for (a, b) in [(0u64, 0u64), (3, 100), (119, 1819), (60, 910)] {
            assert_eq!(
                tree.leaf_of(a, b, &[]).unwrap(),
                tree.run_ranks(a, b, &[]).unwrap().leaf
            );
        }
    }
}
