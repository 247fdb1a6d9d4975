//! Truthful knapsack mechanisms with an investor who learns to invest.
//!
//! The crate is organised bottom-up:
//!
//! - [`alloc`]: allocation instances, welfare and the exhaustive oracle.
//! - [`knapsack`]: Greedy, SmartGreedy and the exact knapsack oracle.
//! - [`mechanism`]: threshold payments and bidder utilities.
//! - [`properties`]: grid checkers for weak monotonicity and XCONE.
//! - [`investment`]: the one-shot investment environment and its verifier.
//! - [`learners`]: EXP3 and baseline bandit learners.
//! - [`dynamic`]: the repeated environment, regret and welfare accounting,
//!   benchmark verifiers and instance generators.

pub mod algorithms;
pub mod alloc;
pub mod dynamic;
pub mod error;
pub mod investment;
pub mod knapsack;
pub mod learners;
pub mod mechanism;
pub mod properties;
pub mod rng;

pub use alloc::{
    optimal_welfare, welfare, Allocation, AllocationAlgorithm, AllocationInstance, OptimalAllocation, OutcomeSpace,
    ValueProfile, WELFARE_TOL,
};
pub use error::{Error, Result};
pub use knapsack::{Greedy, KnapsackInstance, PackedSet, SmartGreedy};
pub use mechanism::{run_mechanism, threshold_price, MechanismOutcome};
