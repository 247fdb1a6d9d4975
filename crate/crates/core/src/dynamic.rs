//! Repeated investment against an oblivious environment.
//!
//! Each round has its own state distribution and per-state allocation
//! instance; the investment set is shared. Rounds are grouped into stages
//! (a static instance each) and a schedule maps rounds to stages, so a
//! stationary horizon is one stage repeated `T` times.
//!
//! An [`Environment`] binds an instance to an allocation algorithm and
//! evaluates every (stage, state, arm) cell once. A run is then a table
//! lookup per round plus the learner's step.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::{Allocation, AllocationAlgorithm, WELFARE_TOL};
use crate::error::{domain, Error, Result};
use crate::investment::{
    evaluate, random_investments, random_stage, shift_cost, table1_static, ArmOutcome, Investment, OutcomeTable,
    StateEnvironment, StaticInvestmentInstance, StaticParams,
};
use crate::knapsack::KnapsackInstance;
use crate::learners::{Learner, LearnerSpec};
use crate::rng::{mix64, run_seed, seeded, SimRng};

/// Monte-Carlo margin in standard errors.
pub const SIGMA_MARGIN: f64 = 3.0;
pub const DEFAULT_RUNS: usize = 50;

const ENV_STREAM: u64 = 0x454e_5649_524f_4e00;
const LEARNER_STREAM: u64 = 0x4c45_4152_4e45_5200;

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicInvestmentInstance {
    horizon: usize,
    stages: Vec<StaticInvestmentInstance>,
    schedule: Vec<usize>,
    bounds: Option<(f64, f64)>,
}

impl DynamicInvestmentInstance {
    /// `schedule[t]` is the stage of round `t + 1`. `bounds` fixes the
    /// utility normalization; when absent it is derived per algorithm.
    pub fn new(
        stages: Vec<StaticInvestmentInstance>,
        schedule: Vec<usize>,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        if schedule.is_empty() {
            return Err(domain("horizon must be at least one round"));
        }
        let first = stages.first().ok_or_else(|| domain("at least one stage required"))?;
        for (i, st) in stages.iter().enumerate().skip(1) {
            if st.investments() != first.investments() {
                return Err(domain(format!("stage {i} uses a different investment set")));
            }
        }
        if let Some(&bad) = schedule.iter().find(|&&s| s >= stages.len()) {
            return Err(domain(format!(
                "schedule names stage {bad}, only {} exist",
                stages.len()
            )));
        }
        if let Some((lo, hi)) = bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(domain(format!("utility bounds ({lo}, {hi}) must satisfy lo < hi")));
            }
        }
        Ok(Self {
            horizon: schedule.len(),
            stages,
            schedule,
            bounds,
        })
    }

    pub fn stationary(stage: StaticInvestmentInstance, horizon: usize) -> Result<Self> {
        Self::new(vec![stage], vec![0; horizon], None)
    }

    /// Stage `i` lasts `lengths[i]` consecutive rounds.
    pub fn piecewise(stages: Vec<StaticInvestmentInstance>, lengths: &[usize]) -> Result<Self> {
        if lengths.len() != stages.len() {
            return Err(domain("one segment length per stage"));
        }
        let schedule = lengths
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
            .collect();
        Self::new(stages, schedule, None)
    }

    pub fn with_bounds(mut self, bounds: (f64, f64)) -> Result<Self> {
        self.bounds = Some(bounds);
        Self::new(self.stages, self.schedule, self.bounds)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn stages(&self) -> &[StaticInvestmentInstance] {
        &self.stages
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn investments(&self) -> &[Investment] {
        self.stages[0].investments()
    }

    pub fn arm_count(&self) -> usize {
        self.investments().len()
    }

    /// Static instance governing round `t` (1-based).
    pub fn round(&self, t: usize) -> &StaticInvestmentInstance {
        &self.stages[self.schedule[t - 1]]
    }

    /// Rounds spent in each stage.
    pub fn stage_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.stages.len()];
        for &s in &self.schedule {
            counts[s] += 1;
        }
        counts
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instance serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicDoc {
    horizon: usize,
    stages: Vec<StaticInvestmentInstance>,
    /// Run-length encoded `[stage, rounds]` pairs.
    schedule: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<(f64, f64)>,
}

impl Serialize for DynamicInvestmentInstance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut runs: Vec<(usize, usize)> = vec![];
        for &st in &self.schedule {
            match runs.last_mut() {
                Some((prev, n)) if *prev == st => *n += 1,
                _ => runs.push((st, 1)),
            }
        }
        DynamicDoc {
            horizon: self.horizon,
            stages: self.stages.clone(),
            schedule: runs,
            bounds: self.bounds,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DynamicInvestmentInstance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = DynamicDoc::deserialize(d)?;
        let schedule: Vec<usize> = doc
            .schedule
            .iter()
            .flat_map(|&(st, n)| std::iter::repeat_n(st, n))
            .collect();
        if schedule.len() != doc.horizon {
            return Err(D::Error::custom(format!(
                "schedule covers {} rounds but horizon is {}",
                schedule.len(),
                doc.horizon
            )));
        }
        Self::new(doc.stages, schedule, doc.bounds).map_err(D::Error::custom)
    }
}

/// An instance bound to an allocation algorithm, with every outcome
/// precomputed.
#[derive(Debug, Clone)]
pub struct Environment {
    instance: DynamicInvestmentInstance,
    algorithm: String,
    tables: Vec<OutcomeTable>,
    cdfs: Vec<Vec<f64>>,
    bounds: (f64, f64),
    digest: String,
}

impl Environment {
    /// Errors with [`Error::Config`] when explicit bounds do not contain
    /// every realizable utility.
    pub fn new<A: AllocationAlgorithm + ?Sized>(instance: &DynamicInvestmentInstance, x: &A) -> Result<Self> {
        let tables = instance
            .stages
            .par_iter()
            .map(|st| OutcomeTable::build(st, x))
            .collect::<Result<Vec<_>>>()?;
        let (lo, hi) = utility_range(&tables);
        let bounds = match instance.bounds {
            Some((blo, bhi)) => {
                if lo < blo || hi > bhi {
                    return Err(Error::Config(format!(
                        "realizable utilities span [{lo}, {hi}], outside the declared bounds [{blo}, {bhi}]"
                    )));
                }
                (blo, bhi)
            }
            None if hi > lo => (lo, hi),
            None => (lo, lo + 1.0),
        };
        let cdfs = instance
            .stages
            .iter()
            .map(|st| {
                st.dist()
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            digest: instance.digest(),
            instance: instance.clone(),
            algorithm: x.id().to_string(),
            tables,
            cdfs,
            bounds,
        })
    }

    pub fn instance(&self) -> &DynamicInvestmentInstance {
        &self.instance
    }

    pub fn algorithm(&self) -> &str {
        &self.algorithm
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn horizon(&self) -> usize {
        self.instance.horizon
    }

    pub fn arm_count(&self) -> usize {
        self.instance.arm_count()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn table(&self, stage: usize) -> &OutcomeTable {
        &self.tables[stage]
    }

    pub fn normalize(&self, utility: f64) -> f64 {
        let (lo, hi) = self.bounds;
        (utility - lo) / (hi - lo)
    }

    fn sample_state(&self, stage: usize, rng: &mut SimRng) -> usize {
        let cdf = &self.cdfs[stage];
        let u: f64 = rng.random();
        cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
            let dist = self.instance.stages[stage].dist();
            dist.iter().rposition(|&p| p > 0.0).unwrap_or(dist.len() - 1)
        })
    }
}

fn utility_range(tables: &[OutcomeTable]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for tab in tables {
        for s in 0..tab.state_count() {
            for a in 0..tab.arm_count() {
                let u = tab.cell(s, a).utility;
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: usize,
    pub stage: usize,
    pub state: usize,
    pub arm: usize,
    /// Counterfactual utility of every arm at the drawn state, raw units.
    pub utilities: Vec<f64>,
    pub utility_norm: f64,
    pub welfare_alg: f64,
    pub welfare_opt: f64,
    pub payment: f64,
}

impl RoundRecord {
    pub fn utility(&self) -> f64 {
        self.utilities[self.arm]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: usize,
    pub algorithm: String,
    pub learner: String,
    pub total_welfare_alg: f64,
    pub total_welfare_opt: f64,
    pub total_utility: f64,
    pub regret: f64,
    pub per_arm_utility: Vec<f64>,
    pub pulls: Vec<u64>,
    pub bounds: (f64, f64),
    pub instance_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    state_labels: Vec<Vec<String>>,
}

impl RunTrace {
    pub fn state_label(&self, r: &RoundRecord) -> &str {
        &self.state_labels[r.stage][r.state]
    }

    /// `t,state,arm,utility_raw,utility_norm,welfare_alg,welfare_opt,payment`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,state,arm,utility_raw,utility_norm,welfare_alg,welfare_opt,payment\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.t,
                self.state_label(r),
                r.arm,
                r.utility(),
                r.utility_norm,
                r.welfare_alg,
                r.welfare_opt,
                r.payment
            )
            .expect("write to string");
        }
        out
    }
}

struct Totals {
    welfare_alg: f64,
    welfare_opt: f64,
    utility: f64,
    per_arm: Vec<f64>,
    pulls: Vec<u64>,
}

struct RoundView<'a> {
    t: usize,
    stage: usize,
    state: usize,
    arm: usize,
    row: &'a [ArmOutcome],
    norm: f64,
}

fn drive(
    env: &Environment,
    learner: &mut dyn Learner,
    seed: u64,
    mut sink: impl FnMut(&RoundView<'_>),
) -> Result<Totals> {
    let k = env.arm_count();
    if learner.arms() != k {
        return Err(domain(format!("learner has {} arms, instance has {k}", learner.arms())));
    }
    let mut env_rng = seeded(mix64(seed ^ ENV_STREAM));
    let mut learner_rng = seeded(mix64(seed ^ LEARNER_STREAM));
    let mut totals = Totals {
        welfare_alg: 0.0,
        welfare_opt: 0.0,
        utility: 0.0,
        per_arm: vec![0.0; k],
        pulls: vec![0; k],
    };
    let mut row: Vec<ArmOutcome> = Vec::with_capacity(k);
    for t in 1..=env.horizon() {
        let stage = env.instance.schedule[t - 1];
        let state = env.sample_state(stage, &mut env_rng);
        let arm = learner.choose(t, &mut learner_rng);
        if arm >= k {
            return Err(Error::Contract(format!("learner chose arm {arm} of {k}")));
        }
        let table = &env.tables[stage];
        row.clear();
        row.extend((0..k).map(|a| *table.cell(state, a)));
        let cell = row[arm];
        let norm = env.normalize(cell.utility);
        if !(0.0..=1.0).contains(&norm) {
            return Err(Error::Config(format!(
                "utility {} at round {t} falls outside the normalization bounds",
                cell.utility
            )));
        }
        learner.observe(t, arm, norm)?;
        totals.welfare_alg += cell.welfare_alg;
        totals.welfare_opt += cell.welfare_opt;
        totals.utility += cell.utility;
        totals.pulls[arm] += 1;
        for (acc, o) in totals.per_arm.iter_mut().zip(&row) {
            *acc += o.utility;
        }
        sink(&RoundView {
            t,
            stage,
            state,
            arm,
            row: &row,
            norm,
        });
    }
    Ok(totals)
}

fn summarize(env: &Environment, learner: &dyn Learner, seed: u64, totals: Totals) -> RunSummary {
    let best = totals.per_arm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    RunSummary {
        seed,
        horizon: env.horizon(),
        algorithm: env.algorithm.clone(),
        learner: learner.id(),
        total_welfare_alg: totals.welfare_alg,
        total_welfare_opt: totals.welfare_opt,
        total_utility: totals.utility,
        regret: best - totals.utility,
        per_arm_utility: totals.per_arm,
        pulls: totals.pulls,
        bounds: env.bounds,
        instance_digest: env.digest.clone(),
    }
}

/// Plays `T` rounds. The environment and the learner draw from separate
/// streams derived from `seed`.
pub fn simulate_run(env: &Environment, learner: &mut dyn Learner, seed: u64) -> Result<RunTrace> {
    let mut records = Vec::with_capacity(env.horizon());
    let totals = drive(env, learner, seed, |v| {
        let c = &v.row[v.arm];
        records.push(RoundRecord {
            t: v.t,
            stage: v.stage,
            state: v.state,
            arm: v.arm,
            utilities: v.row.iter().map(|o| o.utility).collect(),
            utility_norm: v.norm,
            welfare_alg: c.welfare_alg,
            welfare_opt: c.welfare_opt,
            payment: c.payment,
        })
    })?;
    let summary = summarize(env, learner, seed, totals);
    let state_labels = env.instance.stages.iter().map(|s| s.states().to_vec()).collect();
    Ok(RunTrace {
        records,
        summary,
        state_labels,
    })
}

/// As [`simulate_run`] without keeping per-round records.
pub fn simulate_summary(env: &Environment, learner: &mut dyn Learner, seed: u64) -> Result<RunSummary> {
    let totals = drive(env, learner, seed, |_| {})?;
    Ok(summarize(env, learner, seed, totals))
}

/// Best arm's cumulative counterfactual utility minus the realized total.
pub fn realized_regret(trace: &[RoundRecord]) -> f64 {
    let Some(first) = trace.first() else {
        return 0.0;
    };
    let mut per_arm = vec![0.0; first.utilities.len()];
    let mut got = 0.0;
    for r in trace {
        for (acc, u) in per_arm.iter_mut().zip(&r.utilities) {
            *acc += u;
        }
        got += r.utility();
    }
    per_arm.iter().copied().fold(f64::NEG_INFINITY, f64::max) - got
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, std_err: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimates {
    pub runs: usize,
    pub base_seed: u64,
    pub welfare: Estimate,
    pub regret: Estimate,
    pub utility: Estimate,
}

/// Monte-Carlo estimates over `runs` independent runs; run `r` uses seed
/// `mix64(base_seed ^ r)`.
pub fn expected_quantities(env: &Environment, learner: &LearnerSpec, runs: usize, base_seed: u64) -> Result<Estimates> {
    expected_quantities_with(env, || learner.build(env.arm_count(), env.horizon()), runs, base_seed)
}

pub fn expected_quantities_with<F>(env: &Environment, factory: F, runs: usize, base_seed: u64) -> Result<Estimates>
where
    F: Fn() -> Result<Box<dyn Learner>> + Sync,
{
    if runs < 2 {
        return Err(domain("at least two runs are needed for a standard error"));
    }
    let summaries = (0..runs as u64)
        .into_par_iter()
        .map(|r| simulate_summary(env, factory()?.as_mut(), run_seed(base_seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&RunSummary) -> f64| Estimate::from_samples(&summaries.iter().map(f).collect::<Vec<_>>());
    Ok(Estimates {
        runs,
        base_seed,
        welfare: pick(|s| s.total_welfare_alg),
        regret: pick(|s| s.regret),
        utility: pick(|s| s.total_utility),
    })
}

/// `Σ_t E[W* − c]` for every arm, exact.
pub fn arm_optimal_welfare(env: &Environment) -> Vec<f64> {
    let counts = env.instance.stage_counts();
    (0..env.arm_count())
        .map(|a| {
            counts
                .iter()
                .zip(&env.tables)
                .map(|(&n, tab)| n as f64 * tab.expected_welfare_opt(a))
                .sum()
        })
        .collect()
}

/// Best fixed investment's optimal welfare over the horizon.
pub fn best_fixed_welfare(env: &Environment) -> f64 {
    arm_optimal_welfare(env).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `Σ_t max_arm E[W* − c]`: the benchmark that may switch investment every round.
pub fn strongly_dynamic_welfare(env: &Environment) -> f64 {
    env.instance
        .stage_counts()
        .iter()
        .zip(&env.tables)
        .map(|(&n, tab)| {
            let best = (0..tab.arm_count())
                .map(|a| tab.expected_welfare_opt(a))
                .fold(f64::NEG_INFINITY, f64::max);
            n as f64 * best
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicApproxReport {
    pub beta: f64,
    pub welfare: Estimate,
    pub regret: Estimate,
    pub benchmark: f64,
    /// `√(se_W² + se_R²)`.
    pub sigma: f64,
    /// `Ŵ − (β·benchmark − R̂eg − kσ)`.
    pub margin: f64,
    pub passed: bool,
}

impl DynamicApproxReport {
    /// Compares estimates against `β·benchmark` with a margin of
    /// `sigmas` combined standard errors.
    pub fn from_estimates(beta: f64, est: &Estimates, benchmark: f64, sigmas: f64) -> Self {
        let sigma = est.welfare.std_err.hypot(est.regret.std_err);
        let margin = est.welfare.mean - (beta * benchmark - est.regret.mean - sigmas * sigma);
        Self {
            beta,
            welfare: est.welfare,
            regret: est.regret,
            benchmark,
            sigma,
            margin,
            passed: margin >= -WELFARE_TOL,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(domain("beta must lie in [0, 1]"));
    }
    Ok(())
}

/// Checks `Ŵ_x ≥ β·W̃* − R̂eg − 3σ` against the best fixed investment.
pub fn verify_dynamic_approx(
    env: &Environment,
    learner: &LearnerSpec,
    beta: f64,
    runs: usize,
    base_seed: u64,
) -> Result<DynamicApproxReport> {
    check_beta(beta)?;
    let est = expected_quantities(env, learner, runs, base_seed)?;
    Ok(DynamicApproxReport::from_estimates(
        beta,
        &est,
        best_fixed_welfare(env),
        SIGMA_MARGIN,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    /// `β·W̃*`
    pub best_fixed: f64,
    /// `(β/K)·Σ_arms Σ_t W̄*`
    pub arm_sum: f64,
    /// `(β/K)·W̃*_dyn`
    pub strongly_dynamic: f64,
    /// Slack of `best_fixed ≥ arm_sum`, `arm_sum ≥ strongly_dynamic` and
    /// the end-to-end `best_fixed ≥ strongly_dynamic`.
    pub links: [f64; 3],
    pub passed: bool,
}

/// Exact evaluation of `β·W̃* ≥ (β/K)·Σ_arms Σ_t W̄* ≥ (β/K)·W̃*_dyn`.
pub fn strong_chain(env: &Environment, beta: f64) -> ChainReport {
    let k = env.arm_count() as f64;
    let per_arm = arm_optimal_welfare(env);
    let best_fixed = beta * per_arm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let arm_sum = beta / k * per_arm.iter().sum::<f64>();
    let strongly_dynamic = beta / k * strongly_dynamic_welfare(env);
    let links = [
        best_fixed - arm_sum,
        arm_sum - strongly_dynamic,
        best_fixed - strongly_dynamic,
    ];
    let scale = best_fixed.abs().max(1.0);
    ChainReport {
        best_fixed,
        arm_sum,
        strongly_dynamic,
        links,
        passed: links.iter().all(|&l| l >= -WELFARE_TOL * scale),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongApproxReport {
    pub beta: f64,
    pub arms: usize,
    /// Monte-Carlo check at `β/K` against `W̃*_dyn`.
    pub monte_carlo: DynamicApproxReport,
    pub chain: ChainReport,
    pub passed: bool,
}

pub fn verify_strong_approx(
    env: &Environment,
    learner: &LearnerSpec,
    beta: f64,
    runs: usize,
    base_seed: u64,
) -> Result<StrongApproxReport> {
    check_beta(beta)?;
    let est = expected_quantities(env, learner, runs, base_seed)?;
    let k = env.arm_count();
    let monte_carlo =
        DynamicApproxReport::from_estimates(beta / k as f64, &est, strongly_dynamic_welfare(env), SIGMA_MARGIN);
    let chain = strong_chain(env, beta);
    Ok(StrongApproxReport {
        beta,
        arms: k,
        passed: monte_carlo.passed && chain.passed,
        monte_carlo,
        chain,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostShiftCheck {
    pub delta: f64,
    pub d_utility: f64,
    pub d_welfare: f64,
    pub d_optimal: f64,
    pub allocation_unchanged: bool,
    pub passed: bool,
}

/// Evaluates `(state, arm)` before and after replacing the arm's cost `c`
/// by `c − δ`.
pub fn check_cost_shift<A: AllocationAlgorithm + ?Sized>(
    inst: &StaticInvestmentInstance,
    x: &A,
    state: usize,
    arm: usize,
    delta: f64,
) -> Result<CostShiftCheck> {
    let inv = inst.investments().get(arm).ok_or_else(|| domain("arm out of range"))?;
    let shifted = shift_cost(inst, arm, delta)?;
    let (before, alloc_before): (ArmOutcome, Allocation) = evaluate(inst, state, inv, x)?;
    let (after, alloc_after) = evaluate(&shifted, state, &shifted.investments()[arm], x)?;
    let d_utility = after.utility - before.utility;
    let d_welfare = after.welfare_alg - before.welfare_alg;
    let d_optimal = after.welfare_opt - before.welfare_opt;
    let allocation_unchanged = alloc_before == alloc_after;
    let ok = |d: f64| (d - delta).abs() <= WELFARE_TOL;
    Ok(CostShiftCheck {
        delta,
        d_utility,
        d_welfare,
        d_optimal,
        allocation_unchanged,
        passed: allocation_unchanged && ok(d_utility) && ok(d_welfare) && ok(d_optimal),
    })
}

/// Two-arm instance on the degenerate distribution at `state`: the
/// benchmark arm `best` as is and `arm` with cost `c − δ`.
pub fn shifted_pair_instance(
    inst: &StaticInvestmentInstance,
    state: usize,
    best: usize,
    arm: usize,
    delta: f64,
) -> Result<StaticInvestmentInstance> {
    let invs = inst.investments();
    let b = invs.get(best).ok_or_else(|| domain("arm out of range"))?.clone();
    let chosen = invs.get(arm).ok_or_else(|| domain("arm out of range"))?;
    let pair = vec![b, chosen.with_cost(chosen.cost - delta)];
    let mut dist = vec![0.0; inst.state_count()];
    *dist.get_mut(state).ok_or_else(|| domain("state out of range"))? = 1.0;
    StaticInvestmentInstance::new_allowing_any_costs(inst.states().to_vec(), dist, pair, inst.environments().to_vec())
}

/// `K` indicator investments over `K` states, a lone investor who always
/// fits, and a degenerate state each round. The schedule visits every
/// state equally often (up to one round) in a seeded random order.
pub fn gen_prop1_instance(arms: usize, horizon: usize, seed: u64) -> Result<DynamicInvestmentInstance> {
    if arms < 2 {
        return Err(domain("the lower-bound family needs at least two investments"));
    }
    let states: Vec<String> = (0..arms).map(|i| format!("s{i}")).collect();
    let solo = StateEnvironment::knapsack(&KnapsackInstance::new(1.0, vec![])?, 0.5, None)?;
    let investments: Vec<Investment> = (0..arms)
        .map(|i| Investment::new((0..arms).map(|j| (i == j) as u8 as f64).collect(), 0.0))
        .collect();
    let stages = (0..arms)
        .map(|i| {
            let mut dist = vec![0.0; arms];
            dist[i] = 1.0;
            StaticInvestmentInstance::new(states.clone(), dist, investments.clone(), vec![solo.clone(); arms])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut schedule: Vec<usize> = (0..horizon).map(|t| t % arms).collect();
    schedule.shuffle(&mut seeded(seed));
    DynamicInvestmentInstance::new(stages, schedule, Some((0.0, 1.0)))
}

/// The three-bidder example repeated for `T` rounds.
pub fn gen_table1_dynamic(horizon: usize, epsilon: f64) -> Result<DynamicInvestmentInstance> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(domain("epsilon must lie in (0, 0.25)"));
    }
    DynamicInvestmentInstance::stationary(table1_static(epsilon)?, horizon)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicParams {
    pub horizon: usize,
    /// Number of stationary segments.
    pub stages: (usize, usize),
    pub stage: StaticParams,
}

impl Default for DynamicParams {
    fn default() -> Self {
        Self {
            horizon: 2000,
            stages: (1, 4),
            stage: StaticParams::default(),
        }
    }
}

/// Piecewise-stationary knapsack instance: a shared investment set and a
/// few segments, each with fresh environments and state distribution.
pub fn gen_random_instance(params: &DynamicParams, seed: u64) -> Result<DynamicInvestmentInstance> {
    if params.horizon == 0 {
        return Err(domain("horizon must be at least one round"));
    }
    let mut rng = seeded(seed);
    let p = &params.stage;
    let states = rng.random_range(p.states.0..=p.states.1);
    let investments = random_investments(&mut rng, states, p);
    let n = rng
        .random_range(params.stages.0..=params.stages.1)
        .clamp(1, params.horizon);
    let stages = (0..n)
        .map(|_| random_stage(&mut rng, &investments, p))
        .collect::<Result<Vec<_>>>()?;
    let mut cuts: Vec<usize> = (1..params.horizon).collect();
    cuts.shuffle(&mut rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(n - 1).collect();
    cuts.sort_unstable();
    cuts.push(params.horizon);
    let mut prev = 0;
    let lengths: Vec<usize> = cuts
        .into_iter()
        .map(|c| {
            let len = c - prev;
            prev = c;
            len
        })
        .collect();
    DynamicInvestmentInstance::piecewise(stages, &lengths)
}

/// A single investment where SmartGreedy packs the investor alone, worth
/// 1, while the optimum packs the other two for 1.94.
pub fn gen_greedy_gap_instance(horizon: usize) -> Result<DynamicInvestmentInstance> {
    let others = KnapsackInstance::from_pairs(1.0, &[(0.97, 0.5), (0.97, 0.5)])?;
    let env = StateEnvironment::knapsack(&others, 0.51, None)?;
    let stage = StaticInvestmentInstance::new(
        vec!["s0".into()],
        vec![1.0],
        vec![Investment::constant(1, 1.0, 0.0)],
        vec![env],
    )?;
    DynamicInvestmentInstance::stationary(stage, horizon)
}
