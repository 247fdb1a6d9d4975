//! Grid checkers for weak monotonicity and XCONE on binary-outcome problems.
//!
//! Each checker evaluates the algorithm once per grid profile and then
//! compares every profile with every single-bidder deviation on the grid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{Allocation, AllocationAlgorithm, AllocationInstance, WELFARE_TOL};
use crate::error::{domain, Error, Result};
use crate::knapsack::{to_allocation_instance, Item, KnapsackInstance};
use crate::rng::seeded;

/// Largest number of grid profiles a checker will enumerate.
pub const MAX_GRID_PROFILES: u128 = 1_000_000;
/// Counterexamples kept per report; the total count is always exact.
pub const MAX_STORED_COUNTEREXAMPLES: usize = 100;

/// Candidate packed-values, per bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ValueGrid {
    per_bidder: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for ValueGrid {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ValueGrid> for Vec<Vec<f64>> {
    fn from(g: ValueGrid) -> Self {
        g.per_bidder
    }
}

impl ValueGrid {
    pub fn new(per_bidder: Vec<Vec<f64>>) -> Result<Self> {
        for (n, pts) in per_bidder.iter().enumerate() {
            if pts.is_empty() {
                return Err(domain(format!("grid for bidder {n} is empty")));
            }
            if pts.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(domain(format!("grid for bidder {n} has a negative value")));
            }
            if pts.windows(2).any(|w| w[0] > w[1]) {
                return Err(domain(format!("grid for bidder {n} is not sorted")));
            }
        }
        Ok(Self { per_bidder })
    }

    /// Same points for every bidder.
    pub fn uniform(bidders: usize, points: &[f64]) -> Result<Self> {
        Self::new(vec![points.to_vec(); bidders])
    }

    pub fn bidders(&self) -> usize {
        self.per_bidder.len()
    }

    pub fn points(&self, bidder: usize) -> &[f64] {
        &self.per_bidder[bidder]
    }

    pub fn profile_count(&self) -> u128 {
        self.per_bidder.iter().map(|p| p.len() as u128).product()
    }

    fn decode(&self, mut index: usize, digits: &mut [usize]) {
        for (n, pts) in self.per_bidder.iter().enumerate() {
            digits[n] = index % pts.len();
            index /= pts.len();
        }
    }

    fn stride(&self, bidder: usize) -> usize {
        self.per_bidder[..bidder].iter().map(Vec::len).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Position of the template within the checked corpus.
    pub instance: usize,
    pub bidder: usize,
    /// Packed values of the base profile.
    pub profile: Vec<f64>,
    pub from: f64,
    pub to: f64,
    pub packed_before: bool,
    pub packed_after: bool,
    /// Left-hand side of the violated inequality (negative).
    pub witness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub algorithm: String,
    pub passed: bool,
    pub checked: u64,
    pub violations: u64,
    pub counterexamples: Vec<Counterexample>,
}

impl PropertyReport {
    fn empty(property: &str, algorithm: &str) -> Self {
        Self {
            property: property.to_string(),
            algorithm: algorithm.to_string(),
            passed: true,
            checked: 0,
            violations: 0,
            counterexamples: Vec::new(),
        }
    }

    fn record(&mut self, cx: Counterexample) {
        self.violations += 1;
        self.passed = false;
        if self.counterexamples.len() < MAX_STORED_COUNTEREXAMPLES {
            self.counterexamples.push(cx);
        }
    }

    /// Concatenates reports in the given order.
    pub fn merge(property: &str, algorithm: &str, reports: impl IntoIterator<Item = PropertyReport>) -> Self {
        let mut out = Self::empty(property, algorithm);
        for r in reports {
            out.checked += r.checked;
            out.violations += r.violations;
            out.passed &= r.passed;
            let room = MAX_STORED_COUNTEREXAMPLES - out.counterexamples.len();
            out.counterexamples.extend(r.counterexamples.into_iter().take(room));
        }
        out
    }

    /// Counterexample with the smallest value change.
    pub fn minimal(&self) -> Option<&Counterexample> {
        self.counterexamples
            .iter()
            .min_by(|a, b| (a.to - a.from).abs().total_cmp(&(b.to - b.from).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Property {
    WeakMonotone,
    Xcone,
}

impl Property {
    fn name(self) -> &'static str {
        match self {
            Property::WeakMonotone => "weak_monotone",
            Property::Xcone => "xcone",
        }
    }
}

fn grid_allocations<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    template: &AllocationInstance,
    grid: &ValueGrid,
) -> Result<Vec<Allocation>> {
    if !template.is_binary() {
        return Err(domain("grid checkers need binary outcomes"));
    }
    if grid.bidders() != template.bidder_count() {
        return Err(domain("grid must list points for every bidder"));
    }
    let count = grid.profile_count();
    if count > MAX_GRID_PROFILES {
        return Err(Error::Capacity {
            what: "grid profile enumeration",
            requested: count,
            limit: MAX_GRID_PROFILES,
        });
    }
    let n = grid.bidders();
    let mut digits = vec![0; n];
    let mut values = vec![0.0; n];
    (0..count as usize)
        .map(|p| {
            grid.decode(p, &mut digits);
            for b in 0..n {
                values[b] = grid.points(b)[digits[b]];
            }
            x.allocate(&template.with_packed_values(&values)?)
        })
        .collect()
}

fn check<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    template: &AllocationInstance,
    grid: &ValueGrid,
    property: Property,
    instance: usize,
) -> Result<PropertyReport> {
    let allocs = grid_allocations(x, template, grid)?;
    let n = grid.bidders();
    let mut report = PropertyReport::empty(property.name(), x.id());
    let mut digits = vec![0; n];
    for (p, before) in allocs.iter().enumerate() {
        grid.decode(p, &mut digits);
        let values: Vec<f64> = (0..n).map(|b| grid.points(b)[digits[b]]).collect();
        for bidder in 0..n {
            let from = values[bidder];
            let packed_before = before.is_packed(bidder);
            let base = p - digits[bidder] * grid.stride(bidder);
            for (k, &to) in grid.points(bidder).iter().enumerate() {
                if k == digits[bidder] {
                    continue;
                }
                let after = &allocs[base + k * grid.stride(bidder)];
                let packed_after = after.is_packed(bidder);
                let lhs = match property {
                    Property::WeakMonotone => (to - from) * (packed_after as i32 - packed_before as i32) as f64,
                    Property::Xcone => {
                        let confirms = if packed_before { to >= from } else { to <= from };
                        if !confirms {
                            continue;
                        }
                        (0..n)
                            .map(|m| values[m] * (after.is_packed(m) as i32 - before.is_packed(m) as i32) as f64)
                            .sum()
                    }
                };
                report.checked += 1;
                if lhs < -WELFARE_TOL {
                    report.record(Counterexample {
                        instance,
                        bidder,
                        profile: values.clone(),
                        from,
                        to,
                        packed_before,
                        packed_after,
                        witness: lhs,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// `[v'_n − v_n]·[x_n(v'_n, v_−n) − x_n(v)] ≥ 0` over every grid profile and
/// single-bidder deviation.
pub fn check_weak_monotone<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    template: &AllocationInstance,
    grid: &ValueGrid,
) -> Result<PropertyReport> {
    check(x, template, grid, Property::WeakMonotone, 0)
}

/// `Σ_m v_m·[x_m(v'_n, v_−n) − x_m(v)] ≥ 0` for every change that confirms
/// the bidder's outcome: a raise if packed, a cut if not.
pub fn check_xcone<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    template: &AllocationInstance,
    grid: &ValueGrid,
) -> Result<PropertyReport> {
    check(x, template, grid, Property::Xcone, 0)
}

/// Knapsack sizes plus a value grid: one unit of work for the checkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTemplate {
    pub capacity: f64,
    pub sizes: Vec<f64>,
    pub grid: ValueGrid,
}

impl PropertyTemplate {
    pub fn instance(&self) -> Result<AllocationInstance> {
        if self.grid.bidders() != self.sizes.len() {
            return Err(domain("template grid must cover every item"));
        }
        let items = self
            .sizes
            .iter()
            .enumerate()
            .map(|(n, &size)| Item {
                value: self.grid.points(n)[0],
                size,
            })
            .collect();
        to_allocation_instance(&KnapsackInstance::new(self.capacity, items)?)
    }
}

fn check_all<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    templates: &[PropertyTemplate],
    property: Property,
) -> Result<PropertyReport> {
    let reports = templates
        .par_iter()
        .enumerate()
        .map(|(i, t)| check(x, &t.instance()?, &t.grid, property, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(PropertyReport::merge(property.name(), x.id(), reports))
}

pub fn check_weak_monotone_corpus<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    templates: &[PropertyTemplate],
) -> Result<PropertyReport> {
    check_all(x, templates, Property::WeakMonotone)
}

pub fn check_xcone_corpus<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    templates: &[PropertyTemplate],
) -> Result<PropertyReport> {
    check_all(x, templates, Property::Xcone)
}

/// Seeded knapsack templates: sizes in [0.1, 0.9], capacity 1, sorted
/// distinct grid values in [0.05, 2].
pub fn random_templates(count: usize, items: usize, points: usize, seed: u64) -> Vec<PropertyTemplate> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| {
            let sizes = (0..items).map(|_| rng.random_range(0.1..=0.9)).collect();
            let grid = (0..items)
                .map(|_| {
                    let mut pts: Vec<f64> = (0..points).map(|_| rng.random_range(0.05..=2.0)).collect();
                    pts.sort_by(f64::total_cmp);
                    pts
                })
                .collect();
            PropertyTemplate {
                capacity: 1.0,
                sizes,
                grid: ValueGrid::new(grid).expect("sorted nonnegative grid"),
            }
        })
        .collect()
}

/// `min W_x / W*` over instances with positive optimum; 1 if there are none.
pub fn estimate_allocation_ratio<A: AllocationAlgorithm + ?Sized>(x: &A, corpus: &[AllocationInstance]) -> Result<f64> {
    let ratios = corpus
        .par_iter()
        .map(|inst| {
            let opt = inst.optimal_welfare()?.0;
            if opt <= 0.0 {
                return Ok(None);
            }
            Ok(Some(x.welfare(inst)? / opt))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ratios.into_iter().flatten().fold(1.0, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{EmptyAllocation, OutcomeSpace, ValueProfile};
    use crate::knapsack::{table1, BrokenGreedy, Greedy, KnapsackInstance, SmartGreedy};

    fn table1_template() -> AllocationInstance {
        to_allocation_instance(&table1(0.05).unwrap()).unwrap()
    }

    struct Spite;
    impl AllocationAlgorithm for Spite {
        fn id(&self) -> &str {
            "spite"
        }
        fn allocate(&self, inst: &AllocationInstance) -> Result<Allocation> {
            let vals = inst.profile().packed_values();
            let pick = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
            Ok(Allocation::packing(inst.bidder_count(), &[pick]))
        }
    }

    #[test]
    fn smart_greedy_monotone_on_table1_grid() {
        let grid = ValueGrid::uniform(3, &[0.5, 1.0, 1.1, 2.05]).unwrap();
        let r = check_weak_monotone(&SmartGreedy::default(), &table1_template(), &grid).unwrap();
        assert!(r.passed, "{:?}", r.counterexamples);
        assert!(r.checked > 0);
        let r = check_xcone(&SmartGreedy::default(), &table1_template(), &grid).unwrap();
        assert!(r.passed, "{:?}", r.counterexamples);
    }

    #[test]
    fn constant_algorithm_is_monotone() {
        let grid = ValueGrid::uniform(3, &[0.5, 1.0, 2.0]).unwrap();
        let r = check_weak_monotone(&EmptyAllocation, &table1_template(), &grid).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn spite_is_caught() {
        let profile = ValueProfile::binary(vec!["a".into(), "b".into()], &[1.0, 1.0]).unwrap();
        let feasible = vec![Allocation::packing(2, &[0]), Allocation::packing(2, &[1])];
        let inst = AllocationInstance::new(OutcomeSpace::binary(), profile, feasible).unwrap();
        let grid = ValueGrid::uniform(2, &[0.5, 1.5]).unwrap();
        let r = check_weak_monotone(&Spite, &inst, &grid).unwrap();
        assert!(!r.passed);
        let cx = r.minimal().unwrap();
        assert!(cx.packed_before && !cx.packed_after && cx.to > cx.from);
        assert!(cx.witness < 0.0);
    }

    #[test]
    fn greedy_variants_xcone_on_random_templates() {
        let templates = random_templates(500, 4, 3, 99);
        for x in [&Greedy::default() as &dyn AllocationAlgorithm, &SmartGreedy::default()] {
            let r = check_xcone_corpus(x, &templates).unwrap();
            assert!(r.passed, "{}: {:?}", x.id(), r.minimal());
        }
    }

    #[test]
    fn broken_greedy_is_caught() {
        let templates = random_templates(100, 4, 4, 7);
        let x = BrokenGreedy::default();
        let mono = check_weak_monotone_corpus(&x, &templates).unwrap();
        let xcone = check_xcone_corpus(&x, &templates).unwrap();
        assert!(!mono.passed && !xcone.passed);
        assert!(mono.violations as usize >= mono.counterexamples.len());
    }

    #[test]
    fn grid_guard() {
        let inst = to_allocation_instance(&KnapsackInstance::from_pairs(1.0, &[(1.0, 0.1); 7]).unwrap()).unwrap();
        let grid = ValueGrid::uniform(7, &(0..8).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            check_weak_monotone(&Greedy::default(), &inst, &grid),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(ValueGrid::new(vec![vec![]]).is_err());
        assert!(ValueGrid::new(vec![vec![2.0, 1.0]]).is_err());
        assert!(ValueGrid::new(vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn ratio_on_singletons_is_one() {
        let corpus: Vec<_> = [0.3, 1.0, 1.7]
            .iter()
            .map(|&v| to_allocation_instance(&KnapsackInstance::from_pairs(1.0, &[(v, 0.5)]).unwrap()).unwrap())
            .collect();
        assert_eq!(
            estimate_allocation_ratio(&SmartGreedy::default(), &corpus).unwrap(),
            1.0
        );
    }

    #[test]
    fn greedy_ratio_degrades_on_adversarial_family() {
        // Item 0 has the best ratio but blocks item 1, worth M.
        let mut last = 1.0;
        for m in [2.0, 10.0, 100.0] {
            let delta = 0.5 / m;
            let k = KnapsackInstance::from_pairs(1.0, &[(1.0, delta), (m, 1.0)]).unwrap();
            let inst = to_allocation_instance(&k).unwrap();
            let r = estimate_allocation_ratio(&Greedy::default(), std::slice::from_ref(&inst)).unwrap();
            assert!((r - 1.0 / m).abs() < 1e-12);
            assert!(r < last);
            last = r;
            assert_eq!(
                estimate_allocation_ratio(&SmartGreedy::default(), &[inst]).unwrap(),
                1.0
            );
        }
    }
}
