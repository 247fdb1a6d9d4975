//! Algorithm lookup by identifier.

use crate::alloc::{AllocationAlgorithm, EmptyAllocation, OptimalAllocation};
use crate::error::{Error, Result};
use crate::knapsack::{BrokenGreedy, Greedy, GreedyRule, SmartGreedy};

pub const ALGORITHM_IDS: &[&str] = &[
    "greedy",
    "greedy_skip",
    "smart_greedy",
    "smart_greedy_skip",
    "optimal",
    "empty",
    "broken_greedy",
];

pub fn by_id(id: &str) -> Result<Box<dyn AllocationAlgorithm>> {
    Ok(match id {
        "greedy" => Box::new(Greedy::default()),
        "greedy_skip" => Box::new(Greedy {
            rule: GreedyRule::SkipMisses,
        }),
        "smart_greedy" => Box::new(SmartGreedy::default()),
        "smart_greedy_skip" => Box::new(SmartGreedy {
            rule: GreedyRule::SkipMisses,
        }),
        "optimal" => Box::new(OptimalAllocation),
        "empty" => Box::new(EmptyAllocation),
        "broken_greedy" => Box::new(BrokenGreedy::default()),
        other => return Err(Error::UnknownId(format!("algorithm {other}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_id_resolves_to_itself() {
        for id in ALGORITHM_IDS {
            assert_eq!(by_id(id).unwrap().id(), *id);
        }
        assert!(by_id("vcg").is_err());
    }
}
