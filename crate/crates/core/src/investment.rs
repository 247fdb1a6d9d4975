//! One-shot investment environment.
//!
//! Before the mechanism runs, the investor picks an investment: a packed
//! value for every state plus a cost. A state is then drawn, the investor's
//! value is plugged into that state's allocation instance, and the
//! mechanism allocates and charges threshold prices. Expectations over the
//! state distribution are computed exactly.

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{welfare, Allocation, AllocationAlgorithm, AllocationInstance, WELFARE_TOL};
use crate::error::{domain, Error, Result};
use crate::knapsack::{to_allocation_instance_named, Item, KnapsackInstance};
use crate::mechanism::payment;

/// Tolerance on the state distribution summing to one.
pub const DIST_TOL: f64 = 1e-12;

/// Packed value per state index, and a cost (negative for a disinvestment).
#[derive(Debug, Clone, PartialEq)]
pub struct Investment {
    pub values: Vec<f64>,
    pub cost: f64,
}

impl Investment {
    pub fn new(values: Vec<f64>, cost: f64) -> Self {
        Self { values, cost }
    }

    /// Same value in every state.
    pub fn constant(states: usize, value: f64, cost: f64) -> Self {
        Self::new(vec![value; states], cost)
    }

    pub fn with_cost(&self, cost: f64) -> Self {
        Self::new(self.values.clone(), cost)
    }
}

/// Everything but the investor's value at one state: the other bidders'
/// values and the feasible allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnvironment {
    instance: AllocationInstance,
    investor: usize,
}

impl StateEnvironment {
    pub fn new(instance: AllocationInstance, investor: usize) -> Result<Self> {
        if !instance.is_binary() {
            return Err(domain("investment environments need binary outcomes"));
        }
        if investor >= instance.bidder_count() {
            return Err(domain("investor index out of range"));
        }
        Ok(Self { instance, investor })
    }

    /// Knapsack shorthand: the investor is bidder 0 with size `investor_size`,
    /// followed by the other items.
    pub fn knapsack(others: &KnapsackInstance, investor_size: f64, names: Option<Vec<String>>) -> Result<Self> {
        let mut items = vec![Item {
            value: 0.0,
            size: investor_size,
        }];
        items.extend_from_slice(others.items());
        let k = KnapsackInstance::new(others.capacity(), items)?;
        let names = match names {
            Some(n) => n,
            None => std::iter::once("investor".to_string())
                .chain((1..k.len()).map(|i| format!("item{i}")))
                .collect(),
        };
        Self::new(to_allocation_instance_named(&k, names)?, 0)
    }

    pub fn instance(&self) -> &AllocationInstance {
        &self.instance
    }

    pub fn investor(&self) -> usize {
        self.investor
    }

    /// The allocation instance once the investor reports `value`.
    pub fn with_investor_value(&self, value: f64) -> Result<AllocationInstance> {
        self.instance.with_packed_value(self.investor, value)
    }
}

/// What happens at one (state, investment) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmOutcome {
    pub packed: bool,
    pub payment: f64,
    /// `ν(s)·x − p − c`.
    pub utility: f64,
    /// `W_x − c`.
    pub welfare_alg: f64,
    /// `W* − c`.
    pub welfare_opt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticInvestmentInstance {
    states: Vec<String>,
    dist: Vec<f64>,
    investments: Vec<Investment>,
    environments: Vec<StateEnvironment>,
}

impl StaticInvestmentInstance {
    pub fn new(
        states: Vec<String>,
        dist: Vec<f64>,
        investments: Vec<Investment>,
        environments: Vec<StateEnvironment>,
    ) -> Result<Self> {
        let inst = Self::new_allowing_any_costs(states, dist, investments, environments)?;
        if !inst.investments.iter().any(|i| i.cost == 0.0) {
            return Err(domain("the investment set needs a zero-cost option"));
        }
        Ok(inst)
    }

    /// As [`new`](Self::new) but without requiring a zero-cost option. The
    /// proof-side instance transformers produce such sets.
    pub fn new_allowing_any_costs(
        states: Vec<String>,
        dist: Vec<f64>,
        investments: Vec<Investment>,
        environments: Vec<StateEnvironment>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(domain("at least one state required"));
        }
        if dist.len() != states.len() || environments.len() != states.len() {
            return Err(domain("dist and environments must cover every state"));
        }
        if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain("probabilities must be nonnegative"));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(domain(format!("state distribution sums to {total}")));
        }
        if investments.is_empty() {
            return Err(domain("investment set must be non-empty"));
        }
        for (i, inv) in investments.iter().enumerate() {
            if inv.values.len() != states.len() {
                return Err(domain(format!("investment {i} lacks a value for every state")));
            }
            if inv.values.iter().any(|v| !v.is_finite() || *v < 0.0) || !inv.cost.is_finite() {
                return Err(domain(format!("investment {i} has an invalid value or cost")));
            }
        }
        Ok(Self {
            states,
            dist,
            investments,
            environments,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn investments(&self) -> &[Investment] {
        &self.investments
    }

    pub fn environments(&self) -> &[StateEnvironment] {
        &self.environments
    }

    pub fn arm_count(&self) -> usize {
        self.investments.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn with_dist(&self, dist: Vec<f64>) -> Result<Self> {
        Self::new_allowing_any_costs(
            self.states.clone(),
            dist,
            self.investments.clone(),
            self.environments.clone(),
        )
    }

    pub fn with_investments(&self, investments: Vec<Investment>) -> Result<Self> {
        Self::new_allowing_any_costs(
            self.states.clone(),
            self.dist.clone(),
            investments,
            self.environments.clone(),
        )
    }

    /// Degenerate distribution on `state`.
    pub fn degenerate(&self, state: usize) -> Result<Self> {
        let mut dist = vec![0.0; self.state_count()];
        *dist.get_mut(state).ok_or_else(|| domain("state out of range"))? = 1.0;
        self.with_dist(dist)
    }
}

/// Runs the mechanism at `state` with the investor choosing `inv`.
pub fn evaluate<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    state: usize,
    inv: &Investment,
    x: &A,
) -> Result<(ArmOutcome, Allocation)> {
    let env = inst
        .environments
        .get(state)
        .ok_or_else(|| domain("state out of range"))?;
    let value = *inv
        .values
        .get(state)
        .ok_or_else(|| domain("investment has no value for this state"))?;
    let ai = env.with_investor_value(value)?;
    let allocation = x.allocate(&ai)?;
    let packed = allocation.is_packed(env.investor);
    let pay = payment(x, &ai, &allocation, env.investor)?;
    let w = welfare(&ai, &allocation)?;
    let opt = ai.optimal_welfare()?.0;
    let outcome = ArmOutcome {
        packed,
        payment: pay,
        utility: if packed { value } else { 0.0 } - pay - inv.cost,
        welfare_alg: w - inv.cost,
        welfare_opt: opt - inv.cost,
    };
    Ok((outcome, allocation))
}

pub fn realized_utility<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    state: usize,
    inv: &Investment,
    x: &A,
) -> Result<f64> {
    Ok(evaluate(inst, state, inv, x)?.0.utility)
}

fn expectation<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    inv: &Investment,
    x: &A,
    pick: impl Fn(&ArmOutcome) -> f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (s, &p) in inst.dist.iter().enumerate() {
        if p > 0.0 {
            total += p * pick(&evaluate(inst, s, inv, x)?.0);
        }
    }
    Ok(total)
}

pub fn expected_utility<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    inv: &Investment,
    x: &A,
) -> Result<f64> {
    expectation(inst, inv, x, |o| o.utility)
}

pub fn expected_welfare_alg<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    inv: &Investment,
    x: &A,
) -> Result<f64> {
    expectation(inst, inv, x, |o| o.welfare_alg)
}

/// `E_s[W*(ν(s), 𝒜(s))] − c`; the cost is charged under the optimal
/// benchmark too.
pub fn expected_optimal_welfare(inst: &StaticInvestmentInstance, inv: &Investment) -> Result<f64> {
    let mut total = 0.0;
    for (s, &p) in inst.dist.iter().enumerate() {
        if p > 0.0 {
            let ai = inst.environments[s].with_investor_value(inv.values[s])?;
            total += p * (ai.optimal_welfare()?.0 - inv.cost);
        }
    }
    Ok(total)
}

/// Every (state, arm) outcome, evaluated once.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    dist: Vec<f64>,
    cells: Vec<Vec<ArmOutcome>>,
}

impl OutcomeTable {
    pub fn build<A: AllocationAlgorithm + ?Sized>(inst: &StaticInvestmentInstance, x: &A) -> Result<Self> {
        let cells = (0..inst.state_count())
            .map(|s| {
                inst.investments
                    .iter()
                    .map(|inv| Ok(evaluate(inst, s, inv, x)?.0))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dist: inst.dist.clone(),
            cells,
        })
    }

    pub fn cell(&self, state: usize, arm: usize) -> &ArmOutcome {
        &self.cells[state][arm]
    }

    pub fn state_count(&self) -> usize {
        self.cells.len()
    }

    pub fn arm_count(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }

    pub fn expected(&self, arm: usize, pick: impl Fn(&ArmOutcome) -> f64) -> f64 {
        self.dist
            .iter()
            .zip(&self.cells)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, row)| p * pick(&row[arm]))
            .sum()
    }

    pub fn expected_utility(&self, arm: usize) -> f64 {
        self.expected(arm, |o| o.utility)
    }

    pub fn expected_welfare_alg(&self, arm: usize) -> f64 {
        self.expected(arm, |o| o.welfare_alg)
    }

    pub fn expected_welfare_opt(&self, arm: usize) -> f64 {
        self.expected(arm, |o| o.welfare_opt)
    }

    /// Arms whose expected utility is within tolerance of the best.
    pub fn best_responses(&self) -> Vec<usize> {
        let utils: Vec<f64> = (0..self.arm_count()).map(|a| self.expected_utility(a)).collect();
        let best = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..utils.len()).filter(|&a| utils[a] >= best - WELFARE_TOL).collect()
    }
}

/// Argmax of expected utility over the investment set, with all options
/// within 1e-9 of the best included.
pub fn best_response_set<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    x: &A,
) -> Result<Vec<usize>> {
    Ok(OutcomeTable::build(inst, x)?.best_responses())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticApproxReport {
    pub beta: f64,
    pub best_responses: Vec<usize>,
    /// Worst algorithm welfare among best responses.
    pub min_br_welfare: f64,
    /// Best optimal welfare over all investments.
    pub max_optimal_welfare: f64,
    /// `min_br_welfare − β·max_optimal_welfare`.
    pub margin: f64,
    pub passed: bool,
}

pub fn verify_static_approx<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    x: &A,
    beta: f64,
) -> Result<StaticApproxReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain("beta must lie in [0, 1]"));
    }
    let table = OutcomeTable::build(inst, x)?;
    Ok(static_report(&table, beta))
}

pub(crate) fn static_report(table: &OutcomeTable, beta: f64) -> StaticApproxReport {
    let best_responses = table.best_responses();
    let min_br_welfare = best_responses
        .iter()
        .map(|&a| table.expected_welfare_alg(a))
        .fold(f64::INFINITY, f64::min);
    let max_optimal_welfare = (0..table.arm_count())
        .map(|a| table.expected_welfare_opt(a))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = min_br_welfare - beta * max_optimal_welfare;
    StaticApproxReport {
        beta,
        best_responses,
        min_br_welfare,
        max_optimal_welfare,
        margin,
        passed: margin >= -WELFARE_TOL,
    }
}

/// Replaces investment `arm`'s cost `c` by `c − δ`.
pub fn shift_cost(inst: &StaticInvestmentInstance, arm: usize, delta: f64) -> Result<StaticInvestmentInstance> {
    let mut investments = inst.investments.clone();
    let inv = investments.get_mut(arm).ok_or_else(|| domain("arm out of range"))?;
    inv.cost -= delta;
    inst.with_investments(investments)
}

/// The three-bidder example as a one-state instance: A may stay at value 1
/// for free or pay 1 to reach `2 + ε`.
pub fn table1_static(epsilon: f64) -> Result<StaticInvestmentInstance> {
    let k = crate::knapsack::table1(epsilon)?;
    let others = KnapsackInstance::new(k.capacity(), k.items()[1..].to_vec())?;
    let env = StateEnvironment::knapsack(&others, k.items()[0].size, Some(crate::knapsack::table1_names()))?;
    StaticInvestmentInstance::new(
        vec!["s0".into()],
        vec![1.0],
        vec![
            Investment::constant(1, 1.0, 0.0),
            Investment::constant(1, 2.0 + epsilon, 1.0),
        ],
        vec![env],
    )
}

/// Ranges for [`random_static`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticParams {
    pub states: (usize, usize),
    pub arms: (usize, usize),
    pub others: (usize, usize),
    pub value_range: (f64, f64),
    pub size_range: (f64, f64),
    pub investor_size_range: (f64, f64),
    /// Probability that a non-default arm is a disinvestment.
    pub disinvest_prob: f64,
}

impl Default for StaticParams {
    fn default() -> Self {
        Self {
            states: (1, 3),
            arms: (2, 4),
            others: (1, 5),
            value_range: (0.05, 2.0),
            size_range: (0.05, 0.9),
            investor_size_range: (0.1, 0.9),
            disinvest_prob: 0.2,
        }
    }
}

impl StaticParams {
    /// Fixed arm count, everything else default.
    pub fn with_arms(arms: usize) -> Self {
        Self {
            arms: (arms, arms),
            ..Self::default()
        }
    }
}

fn random_env<R: Rng + ?Sized>(rng: &mut R, p: &StaticParams) -> Result<StateEnvironment> {
    let m = rng.random_range(p.others.0..=p.others.1);
    let items = (0..m)
        .map(|_| Item {
            value: rng.random_range(p.value_range.0..=p.value_range.1),
            size: rng.random_range(p.size_range.0..=p.size_range.1),
        })
        .collect();
    let others = KnapsackInstance::new(1.0, items)?;
    let size = rng.random_range(p.investor_size_range.0..=p.investor_size_range.1);
    StateEnvironment::knapsack(&others, size, None)
}

fn random_dist<R: Rng + ?Sized>(rng: &mut R, states: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.1..=1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut dist: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = dist[..states - 1].iter().sum();
    dist[states - 1] = 1.0 - head;
    dist
}

/// Random investment set over `states` states. Arm 0 is free; every other
/// arm's cost stays below its smallest value, so `W* − c ≥ 0` in every
/// state (the investor always fits alone).
pub fn random_investments<R: Rng + ?Sized>(rng: &mut R, states: usize, p: &StaticParams) -> Vec<Investment> {
    let arms = rng.random_range(p.arms.0..=p.arms.1);
    let base: Vec<f64> = (0..states)
        .map(|_| rng.random_range(p.value_range.0..=p.value_range.1))
        .collect();
    let mut out = vec![Investment::new(base.clone(), 0.0)];
    for _ in 1..arms {
        if rng.random_bool(p.disinvest_prob) {
            let values: Vec<f64> = base.iter().map(|v| v * rng.random_range(0.3..=1.0)).collect();
            out.push(Investment::new(values, -rng.random_range(0.0..=0.3)));
        } else {
            let values: Vec<f64> = base.iter().map(|v| v + rng.random_range(0.0..=1.5)).collect();
            let floor = values.iter().copied().fold(f64::INFINITY, f64::min);
            out.push(Investment::new(values, rng.random_range(0.0..=1.0) * floor));
        }
    }
    out
}

/// Random knapsack-backed static instance.
pub fn random_static<R: Rng + ?Sized>(rng: &mut R, p: &StaticParams) -> Result<StaticInvestmentInstance> {
    let states = rng.random_range(p.states.0..=p.states.1);
    let environments = (0..states).map(|_| random_env(rng, p)).collect::<Result<Vec<_>>>()?;
    let dist = random_dist(rng, states);
    let investments = random_investments(rng, states, p);
    StaticInvestmentInstance::new(
        (0..states).map(|s| format!("s{s}")).collect(),
        dist,
        investments,
        environments,
    )
}

/// Fresh per-state environments and distribution over a fixed investment set.
pub(crate) fn random_stage<R: Rng + ?Sized>(
    rng: &mut R,
    investments: &[Investment],
    p: &StaticParams,
) -> Result<StaticInvestmentInstance> {
    let states = investments[0].values.len();
    let environments = (0..states).map(|_| random_env(rng, p)).collect::<Result<Vec<_>>>()?;
    let dist = random_dist(rng, states);
    StaticInvestmentInstance::new(
        (0..states).map(|s| format!("s{s}")).collect(),
        dist,
        investments.to_vec(),
        environments,
    )
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct InvestmentDoc {
    values: IndexMap<String, f64>,
    cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum EnvironmentDoc {
    Knapsack {
        knapsack: KnapsackInstance,
        investor_size: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        names: Option<Vec<String>>,
    },
    Explicit {
        allocation: AllocationInstance,
        investor: String,
    },
}

impl EnvironmentDoc {
    pub(crate) fn build(self) -> Result<StateEnvironment> {
        match self {
            EnvironmentDoc::Knapsack {
                knapsack,
                investor_size,
                names,
            } => StateEnvironment::knapsack(&knapsack, investor_size, names),
            EnvironmentDoc::Explicit { allocation, investor } => {
                let idx = allocation
                    .profile()
                    .bidders()
                    .iter()
                    .position(|b| *b == investor)
                    .ok_or_else(|| domain(format!("investor {investor} is not a bidder")))?;
                StateEnvironment::new(allocation, idx)
            }
        }
    }

    pub(crate) fn from_env(env: &StateEnvironment) -> Self {
        EnvironmentDoc::Explicit {
            allocation: env.instance.clone(),
            investor: env.instance.profile().bidders()[env.investor].clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct StaticDoc {
    pub(crate) states: Vec<String>,
    pub(crate) dist: Vec<f64>,
    pub(crate) investments: Vec<InvestmentDoc>,
    pub(crate) environments: IndexMap<String, EnvironmentDoc>,
}

pub(crate) fn investments_to_doc(states: &[String], investments: &[Investment]) -> Vec<InvestmentDoc> {
    investments
        .iter()
        .map(|inv| InvestmentDoc {
            values: states.iter().cloned().zip(inv.values.iter().copied()).collect(),
            cost: inv.cost,
        })
        .collect()
}

pub(crate) fn investments_from_doc(states: &[String], docs: Vec<InvestmentDoc>) -> Result<Vec<Investment>> {
    docs.into_iter()
        .enumerate()
        .map(|(i, d)| {
            let values = states
                .iter()
                .map(|s| {
                    d.values
                        .get(s)
                        .copied()
                        .ok_or_else(|| domain(format!("investment {i} has no value for state {s}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if d.values.len() != states.len() {
                return Err(domain(format!("investment {i} names an unknown state")));
            }
            Ok(Investment::new(values, d.cost))
        })
        .collect()
}

impl From<&StaticInvestmentInstance> for StaticDoc {
    fn from(inst: &StaticInvestmentInstance) -> Self {
        Self {
            states: inst.states.clone(),
            dist: inst.dist.clone(),
            investments: investments_to_doc(&inst.states, &inst.investments),
            environments: inst
                .states
                .iter()
                .cloned()
                .zip(inst.environments.iter().map(EnvironmentDoc::from_env))
                .collect(),
        }
    }
}

impl TryFrom<StaticDoc> for StaticInvestmentInstance {
    type Error = Error;
    fn try_from(mut doc: StaticDoc) -> Result<Self> {
        let investments = investments_from_doc(&doc.states, doc.investments)?;
        let environments = doc
            .states
            .iter()
            .map(|s| {
                doc.environments
                    .shift_remove(s)
                    .ok_or_else(|| domain(format!("no environment for state {s}")))?
                    .build()
            })
            .collect::<Result<Vec<_>>>()?;
        if !doc.environments.is_empty() {
            return Err(domain("environments name an unknown state"));
        }
        StaticInvestmentInstance::new(doc.states, doc.dist, investments, environments)
    }
}

impl Serialize for StaticInvestmentInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StaticDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StaticInvestmentInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        StaticDoc::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}
