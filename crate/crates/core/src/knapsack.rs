//! Knapsack allocation family: Greedy, SmartGreedy, an exact oracle, and the
//! conversion to explicit [`AllocationInstance`]s.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{Allocation, AllocationAlgorithm, AllocationInstance, OutcomeSpace, Packing, ValueProfile};
use crate::error::{domain, Error, Result};

/// Slack allowed when comparing a total size against the capacity.
pub const FIT_TOL: f64 = 1e-12;
/// Item limit for [`exact_knapsack`].
pub const MAX_EXACT_ITEMS: usize = 24;
/// Item limit for [`to_allocation_instance`].
pub const MAX_CONVERT_ITEMS: usize = 20;
/// Default ε of the bundled three-bidder scenario.
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub value: f64,
    pub size: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KnapsackDoc {
    capacity: f64,
    items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnapsackDoc", into = "KnapsackDoc")]
pub struct KnapsackInstance {
    capacity: f64,
    items: Vec<Item>,
}

impl TryFrom<KnapsackDoc> for KnapsackInstance {
    type Error = Error;
    fn try_from(doc: KnapsackDoc) -> Result<Self> {
        Self::new(doc.capacity, doc.items)
    }
}

impl From<KnapsackInstance> for KnapsackDoc {
    fn from(k: KnapsackInstance) -> Self {
        Self {
            capacity: k.capacity,
            items: k.items,
        }
    }
}

impl KnapsackInstance {
    pub fn new(capacity: f64, items: Vec<Item>) -> Result<Self> {
        if !capacity.is_finite() || capacity <= 0.0 {
            return Err(domain("capacity must be positive"));
        }
        for (i, it) in items.iter().enumerate() {
            if !it.size.is_finite() || it.size <= 0.0 {
                return Err(domain(format!("item {i} must have a positive size")));
            }
            if !it.value.is_finite() || it.value < 0.0 {
                return Err(domain(format!("item {i} must have a nonnegative value")));
            }
        }
        Ok(Self { capacity, items })
    }

    pub fn from_pairs(capacity: f64, pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            capacity,
            pairs.iter().map(|&(value, size)| Item { value, size }).collect(),
        )
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn fits(&self, total_size: f64) -> bool {
        total_size <= self.capacity + FIT_TOL
    }

    pub fn value_of(&self, set: &PackedSet) -> f64 {
        set.chosen.iter().map(|&i| self.items[i].value).sum()
    }

    pub fn size_of(&self, set: &PackedSet) -> f64 {
        set.chosen.iter().map(|&i| self.items[i].size).sum()
    }

    pub fn is_feasible(&self, set: &PackedSet) -> bool {
        set.chosen.iter().all(|&i| i < self.items.len()) && self.fits(self.size_of(set))
    }

    pub fn with_value(&self, item: usize, value: f64) -> Result<Self> {
        let mut items = self.items.clone();
        items
            .get_mut(item)
            .ok_or_else(|| domain("item index out of range"))?
            .value = value;
        Self::new(self.capacity, items)
    }
}

/// Indices of the packed items, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PackedSet {
    chosen: Vec<usize>,
}

impl PackedSet {
    pub fn new(mut chosen: Vec<usize>) -> Self {
        chosen.sort_unstable();
        chosen.dedup();
        Self { chosen }
    }

    pub fn indices(&self) -> &[usize] {
        &self.chosen
    }

    pub fn contains(&self, item: usize) -> bool {
        self.chosen.binary_search(&item).is_ok()
    }

    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }
}

/// What Greedy does when the next item in ratio order does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GreedyRule {
    /// Stop scanning (canonical).
    #[default]
    StopAtFirstMiss,
    /// Skip the item and keep scanning smaller ones.
    SkipMisses,
}

/// Items by value/size, descending; equal ratios keep index order.
pub fn ratio_order(instance: &KnapsackInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.len()).collect();
    let ratio = |i: usize| instance.items[i].value / instance.items[i].size;
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
    order
}

fn greedy_in_order(instance: &KnapsackInstance, rule: GreedyRule) -> Vec<usize> {
    let mut used = 0.0;
    let mut packed = Vec::new();
    for i in ratio_order(instance) {
        let size = instance.items[i].size;
        if instance.fits(used + size) {
            used += size;
            packed.push(i);
        } else if rule == GreedyRule::StopAtFirstMiss {
            break;
        }
    }
    packed
}

pub fn greedy(instance: &KnapsackInstance) -> PackedSet {
    greedy_with(instance, GreedyRule::default())
}

pub fn greedy_with(instance: &KnapsackInstance, rule: GreedyRule) -> PackedSet {
    PackedSet::new(greedy_in_order(instance, rule))
}

pub fn smart_greedy(instance: &KnapsackInstance) -> PackedSet {
    smart_greedy_with(instance, GreedyRule::default())
}

/// Greedy bundle, or the most valuable item that fits alone if it is worth
/// strictly more.
pub fn smart_greedy_with(instance: &KnapsackInstance, rule: GreedyRule) -> PackedSet {
    let bundle = greedy_with(instance, rule);
    let bundle_value = instance.value_of(&bundle);
    let mut best: Option<usize> = None;
    for (i, it) in instance.items.iter().enumerate() {
        if !instance.fits(it.size) {
            continue;
        }
        if best.is_none_or(|b| it.value > instance.items[b].value) {
            best = Some(i);
        }
    }
    match best {
        Some(i) if instance.items[i].value > bundle_value => PackedSet::new(vec![i]),
        _ => bundle,
    }
}

/// Value-maximal feasible subset by enumeration; ties go to the
/// lexicographically smallest index list.
pub fn exact_knapsack(instance: &KnapsackInstance) -> Result<PackedSet> {
    let n = instance.len();
    if n > MAX_EXACT_ITEMS {
        return Err(Error::Capacity {
            what: "knapsack subset enumeration",
            requested: n as u128,
            limit: MAX_EXACT_ITEMS as u128,
        });
    }
    let mut best_value = 0.0;
    let mut best: Vec<usize> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let (mut value, mut size) = (0.0, 0.0);
        for i in 0..n {
            if mask & (1 << i) != 0 {
                value += instance.items[i].value;
                size += instance.items[i].size;
            }
        }
        if !instance.fits(size) || value < best_value {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if value > best_value || set < best {
            best_value = value;
            best = set;
        }
    }
    Ok(PackedSet::new(best))
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("item{i}")).collect()
}

/// Explicit binary instance: every capacity-respecting subset, in bitmask order.
pub fn to_allocation_instance(instance: &KnapsackInstance) -> Result<AllocationInstance> {
    to_allocation_instance_named(instance, default_names(instance.len()))
}

pub fn to_allocation_instance_named(instance: &KnapsackInstance, names: Vec<String>) -> Result<AllocationInstance> {
    let n = instance.len();
    if n > MAX_CONVERT_ITEMS {
        return Err(Error::Capacity {
            what: "knapsack to allocation conversion",
            requested: n as u128,
            limit: MAX_CONVERT_ITEMS as u128,
        });
    }
    if names.len() != n {
        return Err(domain("one name per item required"));
    }
    let mut feasible = Vec::new();
    for mask in 0u32..(1u32 << n) {
        let size: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| instance.items[i].size)
            .sum();
        if instance.fits(size) {
            let packed: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            feasible.push(Allocation::packing(n, &packed));
        }
    }
    let values: Vec<f64> = instance.items.iter().map(|it| it.value).collect();
    let profile = ValueProfile::binary(names, &values)?;
    AllocationInstance::new(OutcomeSpace::binary(), profile, feasible)?.with_packing(Packing {
        sizes: instance.items.iter().map(|it| it.size).collect(),
        capacity: instance.capacity,
    })
}

/// Reads the knapsack structure back out of a binary allocation instance.
pub fn knapsack_view(instance: &AllocationInstance) -> Result<KnapsackInstance> {
    if !instance.is_binary() {
        return Err(domain("knapsack algorithms need binary outcomes"));
    }
    let packing = instance
        .packing()
        .ok_or_else(|| domain("instance carries no item sizes"))?;
    let items = packing
        .sizes
        .iter()
        .enumerate()
        .map(|(n, &size)| Item {
            value: instance.profile().packed_value(n),
            size,
        })
        .collect();
    KnapsackInstance::new(packing.capacity, items)
}

fn to_feasible(instance: &AllocationInstance, set: &PackedSet, who: &str) -> Result<Allocation> {
    let a = Allocation::packing(instance.bidder_count(), set.indices());
    if !instance.is_feasible(&a) {
        return Err(domain(format!(
            "{who} produced {:?}, which is outside the feasible set",
            set.indices()
        )));
    }
    Ok(a)
}

/// Greedy as an [`AllocationAlgorithm`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy {
    pub rule: GreedyRule,
}

impl AllocationAlgorithm for Greedy {
    fn id(&self) -> &str {
        match self.rule {
            GreedyRule::StopAtFirstMiss => "greedy",
            GreedyRule::SkipMisses => "greedy_skip",
        }
    }

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        let k = knapsack_view(instance)?;
        to_feasible(instance, &greedy_with(&k, self.rule), self.id())
    }
}

/// SmartGreedy as an [`AllocationAlgorithm`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SmartGreedy {
    pub rule: GreedyRule,
}

impl AllocationAlgorithm for SmartGreedy {
    fn id(&self) -> &str {
        match self.rule {
            GreedyRule::StopAtFirstMiss => "smart_greedy",
            GreedyRule::SkipMisses => "smart_greedy_skip",
        }
    }

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        let k = knapsack_view(instance)?;
        to_feasible(instance, &smart_greedy_with(&k, self.rule), self.id())
    }
}

/// Greedy that throws away the second item it packed whenever some bidder's
/// value exceeds `threshold`. Neither monotone nor XCONE; used to show the
/// property checkers can fail.
#[derive(Debug, Clone, Copy)]
pub struct BrokenGreedy {
    pub threshold: f64,
}

impl Default for BrokenGreedy {
    fn default() -> Self {
        Self { threshold: 1.0 }
    }
}

impl AllocationAlgorithm for BrokenGreedy {
    fn id(&self) -> &str {
        "broken_greedy"
    }

    fn allocate(&self, instance: &AllocationInstance) -> Result<Allocation> {
        let k = knapsack_view(instance)?;
        let mut packed = greedy_in_order(&k, GreedyRule::StopAtFirstMiss);
        if packed.len() >= 2 && k.items().iter().any(|it| it.value > self.threshold) {
            packed.remove(1);
        }
        to_feasible(instance, &PackedSet::new(packed), self.id())
    }
}

/// The three-bidder example: A = (1, 0.5+ε), B = C = (1, 0.5), capacity 1.
pub fn table1(epsilon: f64) -> Result<KnapsackInstance> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(domain("epsilon must lie in (0, 0.25)"));
    }
    KnapsackInstance::from_pairs(1.0, &[(1.0, 0.5 + epsilon), (1.0, 0.5), (1.0, 0.5)])
}

pub fn table1_names() -> Vec<String> {
    vec!["A".into(), "B".into(), "C".into()]
}

/// Ranges for [`random_instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnapsackParams {
    pub min_items: usize,
    pub max_items: usize,
    pub value_range: (f64, f64),
    pub size_range: (f64, f64),
    pub capacity: f64,
}

impl Default for KnapsackParams {
    fn default() -> Self {
        Self {
            min_items: 1,
            max_items: 12,
            value_range: (0.05, 2.0),
            size_range: (0.05, 1.0),
            capacity: 1.0,
        }
    }
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, params: &KnapsackParams) -> KnapsackInstance {
    let n = rng.random_range(params.min_items..=params.max_items);
    let items = (0..n)
        .map(|_| Item {
            value: rng.random_range(params.value_range.0..=params.value_range.1),
            size: rng.random_range(params.size_range.0..=params.size_range.1),
        })
        .collect();
    KnapsackInstance::new(params.capacity, items).expect("generator ranges are valid")
}
