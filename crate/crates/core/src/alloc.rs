//! Allocation instances, welfare, and the exhaustive welfare oracle.
//!
//! An [`AllocationInstance`] pairs a [`ValueProfile`] with an explicit list of
//! feasible allocations. Structured families such as knapsack additionally
//! attach a [`Packing`] description so that algorithms which need item sizes
//! can read them; the explicit list stays the source of truth for
//! feasibility.

use std::collections::HashSet;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Absolute tolerance for every welfare comparison.
pub const WELFARE_TOL: f64 = 1e-9;

/// Largest feasible set the exhaustive oracle will scan.
pub const MAX_FEASIBLE: usize = 1 << 20;

/// Index of the "not packed" outcome in the binary outcome space.
pub const NOT_PACKED: usize = 0;
/// Index of the "packed" outcome in the binary outcome space.
pub const PACKED: usize = 1;

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Ordered, finite set of outcome labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(domain("outcome space must be non-empty"));
        }
        let distinct: HashSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(domain("outcome labels must be distinct"));
        }
        Ok(Self { labels })
    }

    /// `{0, 1}`: not packed / packed.
    pub fn binary() -> Self {
        Self {
            labels: vec!["0".to_string(), "1".to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.labels.len() == 2
    }

    pub fn label(&self, outcome: usize) -> &str {
        &self.labels[outcome]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One outcome per bidder, by bidder index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation(Vec<usize>);

impl Allocation {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self(assignment)
    }

    /// Binary allocation packing exactly the listed bidders.
    pub fn packing(bidders: usize, packed: &[usize]) -> Self {
        let mut a = vec![NOT_PACKED; bidders];
        for &n in packed {
            a[n] = PACKED;
        }
        Self(a)
    }

    pub fn outcome(&self, bidder: usize) -> usize {
        self.0[bidder]
    }

    pub fn is_packed(&self, bidder: usize) -> bool {
        self.0[bidder] == PACKED
    }

    /// Bidders assigned the packed outcome, ascending.
    pub fn packed_bidders(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == PACKED)
            .map(|(n, _)| n)
            .collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Nonnegative values `values[bidder][outcome]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueProfile {
    bidders: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ValueProfile {
    pub fn new(bidders: Vec<String>, values: Vec<Vec<f64>>, outcomes: &OutcomeSpace) -> Result<Self> {
        if bidders.len() != values.len() {
            return Err(domain(format!(
                "{} bidders but {} value rows",
                bidders.len(),
                values.len()
            )));
        }
        let distinct: HashSet<&String> = bidders.iter().collect();
        if distinct.len() != bidders.len() {
            return Err(domain("bidder names must be distinct"));
        }
        for (name, row) in bidders.iter().zip(&values) {
            if row.len() != outcomes.len() {
                return Err(domain(format!("bidder {name} lacks a value for every outcome")));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(domain(format!("bidder {name} has a negative or non-finite value")));
            }
            if outcomes.is_binary() && row[NOT_PACKED] != 0.0 {
                return Err(domain(format!("bidder {name} has a nonzero not-packed value")));
            }
        }
        Ok(Self { bidders, values })
    }

    /// Binary profile from packed values.
    pub fn binary(bidders: Vec<String>, packed_values: &[f64]) -> Result<Self> {
        let rows = packed_values.iter().map(|&v| vec![0.0, v]).collect();
        Self::new(bidders, rows, &OutcomeSpace::binary())
    }

    pub fn bidders(&self) -> &[String] {
        &self.bidders
    }

    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    pub fn value(&self, bidder: usize, outcome: usize) -> f64 {
        self.values[bidder][outcome]
    }

    pub fn packed_value(&self, bidder: usize) -> f64 {
        self.values[bidder][PACKED]
    }

    pub fn packed_values(&self) -> Vec<f64> {
        self.values.iter().map(|row| row[PACKED]).collect()
    }

    pub fn row(&self, bidder: usize) -> &[f64] {
        &self.values[bidder]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn set(&mut self, bidder: usize, outcome: usize, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(domain(format!("value {value} must be finite and nonnegative")));
        }
        self.values[bidder][outcome] = value;
        Ok(())
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(domain("scale factor must be finite and nonnegative"));
        }
        let values = self
            .values
            .iter()
            .map(|row| row.iter().map(|v| v * factor).collect())
            .collect();
        Ok(Self {
            bidders: self.bidders.clone(),
            values,
        })
    }
}

/// Sizes and capacity of a knapsack-structured instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub sizes: Vec<f64>,
    pub capacity: f64,
}

#[derive(Debug)]
struct FeasibleSet {
    allocations: Vec<Allocation>,
    index: HashSet<Allocation>,
}

/// A value profile with an explicit list of feasible allocations.
///
/// Cloning is cheap: the feasible set is shared.
#[derive(Debug, Clone)]
pub struct AllocationInstance {
    outcomes: Arc<OutcomeSpace>,
    profile: ValueProfile,
    feasible: Arc<FeasibleSet>,
    packing: Option<Arc<Packing>>,
}

impl PartialEq for AllocationInstance {
    fn eq(&self, other: &Self) -> bool {
        self.outcomes == other.outcomes
            && self.profile == other.profile
            && self.feasible.allocations == other.feasible.allocations
            && self.packing == other.packing
    }
}

impl AllocationInstance {
    pub fn new(outcomes: OutcomeSpace, profile: ValueProfile, feasible: Vec<Allocation>) -> Result<Self> {
        if feasible.is_empty() {
            return Err(domain("feasible set must be non-empty"));
        }
        if profile.values.iter().any(|row| row.len() != outcomes.len()) {
            return Err(domain("value profile does not match the outcome space"));
        }
        let mut index = HashSet::with_capacity(feasible.len());
        for a in &feasible {
            if a.len() != profile.len() {
                return Err(domain(format!(
                    "allocation {:?} does not assign every bidder",
                    a.as_slice()
                )));
            }
            if a.as_slice().iter().any(|&o| o >= outcomes.len()) {
                return Err(domain(format!("allocation {:?} uses an unknown outcome", a.as_slice())));
            }
            if !index.insert(a.clone()) {
                return Err(domain(format!("duplicate feasible allocation {:?}", a.as_slice())));
            }
        }
        Ok(Self {
            outcomes: Arc::new(outcomes),
            profile,
            feasible: Arc::new(FeasibleSet {
                allocations: feasible,
                index,
            }),
            packing: None,
        })
    }

    /// Attaches item sizes so size-aware algorithms can run on this instance.
    pub fn with_packing(mut self, packing: Packing) -> Result<Self> {
        if packing.sizes.len() != self.profile.len() {
            return Err(domain("packing sizes must match the bidder count"));
        }
        if !positive(packing.capacity) || !packing.sizes.iter().all(|s| positive(*s)) {
            return Err(domain("packing sizes and capacity must be positive"));
        }
        self.packing = Some(Arc::new(packing));
        Ok(self)
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn profile(&self) -> &ValueProfile {
        &self.profile
    }

    pub fn bidder_count(&self) -> usize {
        self.profile.len()
    }

    pub fn feasible(&self) -> &[Allocation] {
        &self.feasible.allocations
    }

    pub fn packing(&self) -> Option<&Packing> {
        self.packing.as_deref()
    }

    pub fn is_binary(&self) -> bool {
        self.outcomes.is_binary()
    }

    pub fn is_feasible(&self, alloc: &Allocation) -> bool {
        self.feasible.index.contains(alloc)
    }

    /// Same instance with one bidder's value for one outcome replaced.
    pub fn with_value(&self, bidder: usize, outcome: usize, value: f64) -> Result<Self> {
        if bidder >= self.bidder_count() || outcome >= self.outcomes.len() {
            return Err(domain("bidder or outcome out of range"));
        }
        if self.is_binary() && outcome == NOT_PACKED && value != 0.0 {
            return Err(domain("binary instances fix the not-packed value at 0"));
        }
        let mut next = self.clone();
        next.profile.set(bidder, outcome, value)?;
        Ok(next)
    }

    /// Same binary instance with one bidder's packed value replaced.
    pub fn with_packed_value(&self, bidder: usize, value: f64) -> Result<Self> {
        self.with_value(bidder, PACKED, value)
    }

    /// Same binary instance with every packed value replaced.
    pub fn with_packed_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.bidder_count() {
            return Err(domain("one packed value per bidder required"));
        }
        let mut next = self.clone();
        for (n, &v) in values.iter().enumerate() {
            next.profile.set(n, PACKED, v)?;
        }
        Ok(next)
    }

    /// Same feasible set under a different value profile.
    pub fn with_profile(&self, profile: ValueProfile) -> Result<Self> {
        if profile.len() != self.bidder_count() {
            return Err(domain("profile does not match the bidder count"));
        }
        let mut next = self.clone();
        next.profile = profile;
        Ok(next)
    }

    /// Welfare of `alloc` without the feasibility check.
    pub(crate) fn raw_welfare(&self, alloc: &Allocation) -> f64 {
        alloc
            .as_slice()
            .iter()
            .enumerate()
            .map(|(n, &o)| self.profile.value(n, o))
            .sum()
    }

    pub fn welfare(&self, alloc: &Allocation) -> Result<f64> {
        welfare(self, alloc)
    }

    pub fn optimal_welfare(&self) -> Result<(f64, Allocation)> {
        optimal_welfare(self)
    }
}

/// `Σ_n v[n][alloc(n)]` for a feasible allocation.
pub fn welfare(instance: &AllocationInstance, alloc: &Allocation) -> Result<f64> {
    if !instance.is_feasible(alloc) {
        return Err(domain(format!("allocation {:?} is not feasible", alloc.as_slice())));
    }
    Ok(instance.raw_welfare(alloc))
}

/// Maximum welfare over the feasible set and the first allocation attaining it.
pub fn optimal_welfare(instance: &AllocationInstance) -> Result<(f64, Allocation)> {
    let feasible = instance.feasible();
    if feasible.len() > MAX_FEASIBLE {
        return Err(Error::Capacity {
            what: "feasible-set enumeration",
            requested: feasible.len() as u128,
            limit: MAX_FEASIBLE as u128,
        });
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, a) in feasible.iter().enumerate() {
        let w = instance.raw_welfare(a);
        if w > best.0 {
            best = (w, i);
        }
    }
    Ok((best.0, feasible[best.1].clone()))
}

/// A deterministic map from instances to feasible allocations.
pub trait AllocationAlgorithm: Send + Sync {
    /// Stable identifier, e.g. `"smart_greedy"`.
    fn id(&self) -> &str;

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation>;

    /// Welfare of this algorithm's allocation.
    fn welfare(&self, instance: &AllocationInstance) -> Result<f64> {
        let a = self.allocate(instance)?;
        welfare(instance, &a)
    }
}

impl<T: AllocationAlgorithm + ?Sized> AllocationAlgorithm for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        (**self).allocate(instance)
    }
}

impl<T: AllocationAlgorithm + ?Sized> AllocationAlgorithm for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        (**self).allocate(instance)
    }
}

/// Exhaustive welfare maximizer (the VCG allocation rule).
#[derive(Debug, Clone, Copy, Default)]
pub struct OptimalAllocation;

impl AllocationAlgorithm for OptimalAllocation {
    fn id(&self) -> &str {
        "optimal"
    }

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        Ok(optimal_welfare(instance)?.1)
    }
}

/// Always assigns outcome 0 to everybody.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyAllocation;

impl AllocationAlgorithm for EmptyAllocation {
    fn id(&self) -> &str {
        "empty"
    }

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        let a = Allocation::new(vec![NOT_PACKED; instance.bidder_count()]);
        if !instance.is_feasible(&a) {
            return Err(domain("the empty allocation is not feasible here"));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaViolation {
    pub instance: usize,
    pub welfare: f64,
    pub optimal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    pub algorithm: String,
    pub beta: f64,
    pub checked: usize,
    pub violations: Vec<BetaViolation>,
}

impl BetaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every instance where `W_x < β·W* − tol`.
pub fn check_beta_allocation<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instances: &[AllocationInstance],
    beta: f64,
) -> Result<BetaReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain("beta must lie in [0, 1]"));
    }
    let mut violations = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let optimal = optimal_welfare(inst)?.0;
        let w = x.welfare(inst)?;
        if w < beta * optimal - WELFARE_TOL {
            violations.push(BetaViolation {
                instance: i,
                welfare: w,
                optimal,
            });
        }
    }
    Ok(BetaReport {
        algorithm: x.id().to_string(),
        beta,
        checked: instances.len(),
        violations,
    })
}

/// Wire form of [`AllocationInstance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationInstanceDoc {
    bidders: Vec<String>,
    outcomes: Vec<String>,
    values: IndexMap<String, IndexMap<String, f64>>,
    feasible: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    packing: Option<Packing>,
}

impl From<&AllocationInstance> for AllocationInstanceDoc {
    fn from(inst: &AllocationInstance) -> Self {
        let outcomes = inst.outcomes.labels().to_vec();
        let values = inst
            .profile
            .bidders()
            .iter()
            .enumerate()
            .map(|(n, b)| {
                let row = outcomes
                    .iter()
                    .enumerate()
                    .map(|(o, l)| (l.clone(), inst.profile.value(n, o)))
                    .collect();
                (b.clone(), row)
            })
            .collect();
        let feasible = inst
            .feasible()
            .iter()
            .map(|a| a.as_slice().iter().map(|&o| outcomes[o].clone()).collect())
            .collect();
        Self {
            bidders: inst.profile.bidders().to_vec(),
            outcomes,
            values,
            feasible,
            packing: inst.packing().cloned(),
        }
    }
}

impl TryFrom<AllocationInstanceDoc> for AllocationInstance {
    type Error = Error;

    fn try_from(doc: AllocationInstanceDoc) -> Result<Self> {
        let outcomes = OutcomeSpace::new(doc.outcomes)?;
        let mut rows = Vec::with_capacity(doc.bidders.len());
        for b in &doc.bidders {
            let vals = doc
                .values
                .get(b)
                .ok_or_else(|| domain(format!("no values for bidder {b}")))?;
            let row = outcomes
                .labels()
                .iter()
                .map(|l| {
                    vals.get(l)
                        .copied()
                        .ok_or_else(|| domain(format!("bidder {b} has no value for outcome {l}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if doc.values.len() != doc.bidders.len() {
            return Err(domain("values mention a bidder not in the bidder list"));
        }
        let profile = ValueProfile::new(doc.bidders, rows, &outcomes)?;
        let feasible = doc
            .feasible
            .iter()
            .map(|labels| {
                labels
                    .iter()
                    .map(|l| {
                        outcomes
                            .index_of(l)
                            .ok_or_else(|| domain(format!("unknown outcome label {l}")))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Allocation::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = AllocationInstance::new(outcomes, profile, feasible)?;
        match doc.packing {
            Some(p) => inst.with_packing(p),
            None => Ok(inst),
        }
    }
}

impl Serialize for AllocationInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AllocationInstanceDoc::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AllocationInstance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = AllocationInstanceDoc::deserialize(deserializer)?;
        AllocationInstance::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("b{i}")).collect()
    }

    fn two_bidder() -> AllocationInstance {
        let profile = ValueProfile::binary(names(2), &[1.0, 3.0]).unwrap();
        let feasible = vec![
            Allocation::packing(2, &[]),
            Allocation::packing(2, &[0]),
            Allocation::packing(2, &[1]),
        ];
        AllocationInstance::new(OutcomeSpace::binary(), profile, feasible).unwrap()
    }

    #[test]
    fn welfare_of_empty_allocation_is_zero() {
        let inst = two_bidder();
        assert_eq!(welfare(&inst, &Allocation::packing(2, &[])).unwrap(), 0.0);
    }

    #[test]
    fn infeasible_allocation_is_rejected() {
        let inst = two_bidder();
        let err = welfare(&inst, &Allocation::packing(2, &[0, 1])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn optimum_and_singleton_feasibility() {
        let inst = two_bidder();
        let (w, a) = optimal_welfare(&inst).unwrap();
        assert_eq!(w, 3.0);
        assert_eq!(a, Allocation::packing(2, &[1]));

        let profile = ValueProfile::binary(names(2), &[1.0, 3.0]).unwrap();
        let single =
            AllocationInstance::new(OutcomeSpace::binary(), profile, vec![Allocation::packing(2, &[0])]).unwrap();
        assert_eq!(optimal_welfare(&single).unwrap().0, 1.0);
    }

    #[test]
    fn ties_go_to_first_feasible() {
        let profile = ValueProfile::binary(names(2), &[2.0, 2.0]).unwrap();
        let feasible = vec![Allocation::packing(2, &[1]), Allocation::packing(2, &[0])];
        let inst = AllocationInstance::new(OutcomeSpace::binary(), profile, feasible).unwrap();
        assert_eq!(optimal_welfare(&inst).unwrap().1, Allocation::packing(2, &[1]));
    }

    #[test]
    fn invalid_instances_are_rejected() {
        assert!(OutcomeSpace::new(vec![]).is_err());
        assert!(OutcomeSpace::new(vec!["a".into(), "a".into()]).is_err());
        assert!(ValueProfile::binary(names(1), &[-1.0]).is_err());
        let bad = ValueProfile::new(names(1), vec![vec![0.5, 1.0]], &OutcomeSpace::binary());
        assert!(bad.is_err());
        let profile = ValueProfile::binary(names(2), &[1.0, 1.0]).unwrap();
        assert!(AllocationInstance::new(OutcomeSpace::binary(), profile.clone(), vec![]).is_err());
        let short = vec![Allocation::new(vec![0])];
        assert!(AllocationInstance::new(OutcomeSpace::binary(), profile, short).is_err());
    }

    #[test]
    fn beta_zero_always_passes() {
        let report = check_beta_allocation(&EmptyAllocation, &[two_bidder()], 0.0).unwrap();
        assert!(report.passed());
        let report = check_beta_allocation(&EmptyAllocation, &[two_bidder()], 0.5).unwrap();
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn json_field_order_and_round_trip() {
        let inst = two_bidder();
        let text = serde_json::to_string(&inst).unwrap();
        assert!(text.starts_with(r#"{"bidders":["b0","b1"],"outcomes":["0","1"],"values":{"b0":{"0":0.0,"1":1.0}"#));
        let back: AllocationInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_rejects_unknown_outcome() {
        let text = r#"{"bidders":["a"],"outcomes":["0","1"],"values":{"a":{"0":0,"1":1}},"feasible":[["2"]]}"#;
        assert!(serde_json::from_str::<AllocationInstance>(text).is_err());
    }
}
