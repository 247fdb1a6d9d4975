use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use investsim::alloc::OptimalAllocation;
use investsim::dynamic::{
    best_fixed_welfare, expected_quantities, gen_prop1_instance, gen_random_instance, gen_table1_dynamic, simulate_run,
    strong_chain, strongly_dynamic_welfare, verify_dynamic_approx, verify_strong_approx, ChainReport,
    DynamicApproxReport, DynamicParams, Environment, Estimates,
};
use investsim::investment::{evaluate, table1_static};
use investsim::knapsack::{table1, table1_names, to_allocation_instance_named};
use investsim::learners::LearnerSpec;
use investsim::mechanism::threshold_price;
use investsim::rng::run_seed;
use investsim::{AllocationAlgorithm, SmartGreedy, WELFARE_TOL};

use crate::args::{ReproduceArgs, Scenario};
use crate::output::{Check, OutDir, Verdict};

const MC_STREAM: u64 = 0x4d43;

#[derive(Debug, Serialize)]
struct Parameters {
    seed: u64,
    epsilon: f64,
    arms: usize,
    #[serde(rename = "T")]
    horizon: usize,
    runs: usize,
    instances: usize,
    beta: f64,
}

pub fn reproduce(args: &ReproduceArgs) -> Result<bool> {
    let seed = args.common.seed.unwrap_or(0);
    let (horizon, runs, instances, beta) = match args.scenario {
        Scenario::Table1 => (5_000, 50, 1, 0.5),
        Scenario::Prop1 => (20_000, 100, 1, 1.0),
        Scenario::Theorem3 | Scenario::Prop2 => (2_000, 50, 100, 0.5),
    };
    let p = Parameters {
        seed,
        epsilon: args.epsilon,
        arms: args.arms,
        horizon: args.horizon.unwrap_or(horizon),
        runs: args.runs.unwrap_or(runs),
        instances: args.instances.unwrap_or(instances),
        beta: args.beta.unwrap_or(beta),
    };
    if p.horizon == 0 {
        bail!("--T must be at least 1");
    }
    if p.runs < 2 {
        bail!("--runs must be at least 2");
    }
    if p.instances == 0 {
        bail!("--instances must be at least 1");
    }
    if !(0.0..=1.0).contains(&p.beta) {
        bail!("--beta must lie in [0, 1]");
    }
    let out = OutDir::create(
        &args
            .common
            .out
            .clone()
            .unwrap_or_else(|| format!("out/{}", args.scenario.name()).into()),
    )?;
    let checks = match args.scenario {
        Scenario::Table1 => table1_checks(&p, &out)?,
        Scenario::Prop1 => prop1_checks(&p, &out)?,
        Scenario::Theorem3 => random_checks(&p, &out, false)?,
        Scenario::Prop2 => random_checks(&p, &out, true)?,
    };
    let verdict = Verdict::new(args.scenario.name(), p, checks);
    out.write_json("verdict.json", &verdict)?;
    verdict.print();
    Ok(verdict.passed)
}

fn write_run(out: &OutDir, env: &Environment, learner: LearnerSpec, seed: u64) -> Result<()> {
    let mut l = learner.build(env.arm_count(), env.horizon())?;
    let trace = simulate_run(env, l.as_mut(), seed)?;
    out.write("trace.csv", trace.to_csv().as_bytes())?;
    out.write_json("summary.json", &trace.summary)?;
    Ok(())
}

fn table1_checks(p: &Parameters, out: &OutDir) -> Result<Vec<Check>> {
    let sg = SmartGreedy::default();
    let inst = to_allocation_instance_named(&table1(p.epsilon)?, table1_names())?;
    let stat = table1_static(p.epsilon)?;
    let (stay, _) = evaluate(&stat, 0, &stat.investments()[0], &sg)?;
    let (invest, _) = evaluate(&stat, 0, &stat.investments()[1], &sg)?;
    let e = p.epsilon;
    let mut checks = vec![
        Check::near("optimal welfare", inst.optimal_welfare()?.0, 2.0, WELFARE_TOL),
        Check::near("smart_greedy welfare", sg.welfare(&inst)?, 2.0, WELFARE_TOL),
        Check::near(
            "threshold price of A",
            threshold_price(&sg, &inst, 0)?,
            1.0 + 2.0 * e,
            WELFARE_TOL,
        ),
        Check::near("utility without investing", stay.utility, 0.0, WELFARE_TOL),
        Check::near("welfare after investing", invest.welfare_alg, 1.0 + e, WELFARE_TOL),
        Check::near("utility after investing", invest.utility, -e, WELFARE_TOL),
    ];
    let env = Environment::new(&gen_table1_dynamic(p.horizon, e)?, &sg)?;
    let est = expected_quantities(&env, &LearnerSpec::Exp3, p.runs, run_seed(p.seed, MC_STREAM))?;
    let per_round = est.welfare.mean / p.horizon as f64;
    checks.push(Check::at_least("exp3 welfare per round", per_round, 2.0 - 2.0 * e));
    write_run(out, &env, LearnerSpec::Exp3, p.seed)?;
    Ok(checks)
}

#[derive(Serialize)]
struct Prop1Report {
    strongly_dynamic_welfare: f64,
    best_fixed_welfare: f64,
    estimates: Vec<(String, Estimates)>,
}

fn prop1_checks(p: &Parameters, out: &OutDir) -> Result<Vec<Check>> {
    if p.arms < 2 {
        bail!("--arms must be at least 2");
    }
    let env = Environment::new(&gen_prop1_instance(p.arms, p.horizon, p.seed)?, &OptimalAllocation)?;
    let dyn_opt = strongly_dynamic_welfare(&env);
    let fixed = best_fixed_welfare(&env);
    let t = p.horizon as f64;
    let k = p.arms as f64;
    let mut checks = vec![
        Check::near("strongly dynamic welfare", dyn_opt, t, WELFARE_TOL * t),
        Check::near("best fixed welfare", fixed, (t / k).ceil(), WELFARE_TOL * t),
    ];
    let mut estimates = vec![];
    for spec in [LearnerSpec::Exp3, LearnerSpec::Uniform] {
        let est = expected_quantities(&env, &spec, p.runs, run_seed(p.seed, MC_STREAM))?;
        let ratio = est.welfare.mean / dyn_opt;
        let (lo, hi) = (1.0 / k - 0.02, 1.0 / k + 0.05);
        checks.push(Check::within(&format!("{spec} welfare ratio"), ratio, lo, hi));
        estimates.push((spec.to_string(), est));
    }
    out.write_json(
        "report.json",
        &Prop1Report {
            strongly_dynamic_welfare: dyn_opt,
            best_fixed_welfare: fixed,
            estimates,
        },
    )?;
    write_run(out, &env, LearnerSpec::Exp3, p.seed)?;
    Ok(checks)
}

#[derive(Serialize)]
struct InstanceReport {
    instance: usize,
    seed: u64,
    digest: String,
    dynamic: DynamicApproxReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    strong: Option<DynamicApproxReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<ChainReport>,
}

fn random_checks(p: &Parameters, out: &OutDir, strong: bool) -> Result<Vec<Check>> {
    let sg = SmartGreedy::default();
    let params = DynamicParams {
        horizon: p.horizon,
        ..Default::default()
    };
    let reports = (0..p.instances)
        .into_par_iter()
        .map(|i| {
            let seed = run_seed(p.seed, i as u64);
            let env = Environment::new(&gen_random_instance(&params, seed)?, &sg)?;
            let mc_seed = run_seed(p.seed ^ MC_STREAM, i as u64);
            let dynamic = verify_dynamic_approx(&env, &LearnerSpec::Exp3, p.beta, p.runs, mc_seed)?;
            let (strong_mc, chain) = if strong {
                let rep = verify_strong_approx(&env, &LearnerSpec::Exp3, p.beta, p.runs, mc_seed)?;
                debug_assert_eq!(rep.chain, strong_chain(&env, p.beta));
                (Some(rep.monte_carlo), Some(rep.chain))
            } else {
                (None, None)
            };
            Ok(InstanceReport {
                instance: i,
                seed,
                digest: env.digest().to_string(),
                dynamic,
                strong: strong_mc,
                chain,
            })
        })
        .collect::<investsim::Result<Vec<_>>>()?;
    out.write_json("report.json", &reports)?;
    let first = Environment::new(&gen_random_instance(&params, run_seed(p.seed, 0))?, &sg)?;
    write_run(out, &first, LearnerSpec::Exp3, p.seed)?;

    let min_margin = |f: &dyn Fn(&InstanceReport) -> f64| reports.iter().map(f).fold(f64::INFINITY, f64::min);
    let mut checks = vec![Check::at_least(
        "min dynamic margin",
        min_margin(&|r| r.dynamic.margin),
        -WELFARE_TOL,
    )];
    if strong {
        checks.push(Check::at_least(
            "min strongly dynamic margin",
            min_margin(&|r| r.strong.as_ref().map_or(f64::INFINITY, |s| s.margin)),
            -WELFARE_TOL,
        ));
        let broken = reports
            .iter()
            .filter(|r| r.chain.as_ref().is_some_and(|c| !c.passed))
            .count();
        checks.push(Check::near(
            "instances with a broken chain link",
            broken as f64,
            0.0,
            0.0,
        ));
    }
    Ok(checks)
}
