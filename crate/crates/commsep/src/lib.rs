//! A desk-scale laboratory for the communication problems separating one-way
//! quantum protocols from interactive classical ones.
//!
//! The library is organized around three relational problems over subsets of
//! `[n^2]` (or `[2n^2]`): the inner-product witness relation `PS`, its block
//! version `Pin`, and the "find the intersection" relation `Piip`. On top of
//! those it provides
//!
//! * exact simulation of the one-way quantum protocol for `Pin`
//!   ([`quantum`]),
//! * a classical two-way protocol harness with transcript-rectangle
//!   extraction and rectangle analytics ([`protocols`]),
//! * the randomized reductions connecting the three problems
//!   ([`reductions`]),
//! * exact validators and Monte Carlo machinery with Wilson intervals
//!   ([`analysis`]).
//!
//! Everything exact is computed in arbitrary-precision rational arithmetic;
//! sampling paths take explicit seeds and are reproducible.

pub mod analysis;
pub mod cli;
pub mod gf2;
pub mod problems;
pub mod protocols;
pub mod quantum;
pub mod reductions;

pub use gf2::{BitString, SigmaEncoding};
pub use problems::{DistributionSpec, Instance, PinInstance};
pub use quantum::{OutcomeDistribution, QuantumOutcome};
