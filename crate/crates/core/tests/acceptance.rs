//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use investsim::alloc::OptimalAllocation;
use investsim::dynamic::{
    check_cost_shift, expected_quantities, gen_prop1_instance, gen_random_instance, simulate_run, strong_chain,
    strongly_dynamic_welfare, verify_dynamic_approx, verify_strong_approx, DynamicInvestmentInstance, DynamicParams,
    Environment,
};
use investsim::investment::{evaluate, random_static, table1_static, verify_static_approx, StaticParams};
use investsim::knapsack::{
    exact_knapsack, random_instance, smart_greedy, table1, table1_names, to_allocation_instance_named, BrokenGreedy,
    Greedy, KnapsackParams, SmartGreedy,
};
use investsim::learners::{Exp3, LearnerSpec};
use investsim::mechanism::threshold_price;
use investsim::properties::{check_weak_monotone_corpus, check_xcone_corpus, random_templates};
use investsim::rng::seeded;
use investsim::{AllocationAlgorithm, Result};

const TOL: f64 = 1e-9;
const SG: SmartGreedy = SmartGreedy {
    rule: investsim::knapsack::GreedyRule::StopAtFirstMiss,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn table1_exact() -> Result<Outcome> {
    let eps = 0.05;
    let inst = to_allocation_instance_named(&table1(eps)?, table1_names())?;
    let opt = inst.optimal_welfare()?.0;
    let sg = SG.welfare(&inst)?;
    let price = threshold_price(&SG, &inst, 0)?;
    let stat = table1_static(eps)?;
    let (invested, _) = evaluate(&stat, 0, &stat.investments()[1], &SG)?;
    let ok = (opt - 2.0).abs() <= TOL
        && (sg - 2.0).abs() <= TOL
        && (price - 1.10).abs() <= TOL
        && (invested.welfare_alg - 1.05).abs() <= TOL
        && (invested.utility + 0.05).abs() <= TOL;
    outcome(
        ok,
        format!(
            "W*={opt} W_sg={sg} p_A={price:.12} W_invest={:.12} u_invest={:.12}",
            invested.welfare_alg, invested.utility
        ),
    )
}

fn smart_greedy_half() -> Result<Outcome> {
    let mut rng = seeded(2);
    let params = KnapsackParams::default();
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for _ in 0..10_000 {
        let k = random_instance(&mut rng, &params);
        let opt = k.value_of(&exact_knapsack(&k)?);
        let got = k.value_of(&smart_greedy(&k));
        if got < 0.5 * opt - TOL {
            bad += 1;
        }
        if opt > 0.0 {
            worst = worst.min(got / opt);
        }
    }
    outcome(
        bad == 0,
        format!("10000 instances, {bad} below half, worst ratio {worst:.4}"),
    )
}

fn xcone_and_monotone() -> Result<Outcome> {
    let templates = random_templates(500, 4, 4, 3);
    let mut ok = true;
    let mut parts = vec![];
    for x in [&Greedy::default() as &dyn AllocationAlgorithm, &SG] {
        let m = check_weak_monotone_corpus(x, &templates)?;
        let c = check_xcone_corpus(x, &templates)?;
        ok &= m.passed && c.passed;
        parts.push(format!("{}: monotone {} xcone {}", x.id(), m.passed, c.passed));
    }
    let broken = BrokenGreedy::default();
    let m = check_weak_monotone_corpus(&broken, &templates)?;
    let c = check_xcone_corpus(&broken, &templates)?;
    let caught = !m.passed && !c.passed && !m.counterexamples.is_empty() && !c.counterexamples.is_empty();
    ok &= caught;
    parts.push(format!(
        "broken_greedy caught: {} + {} violations",
        m.violations, c.violations
    ));
    outcome(ok, parts.join("; "))
}

fn static_approx() -> Result<Outcome> {
    let mut rng = seeded(4);
    let mut worst = f64::INFINITY;
    let mut fails = 0;
    for _ in 0..200 {
        let inst = random_static(&mut rng, &StaticParams::default())?;
        let rep = verify_static_approx(&inst, &SG, 0.5)?;
        worst = worst.min(rep.margin);
        fails += (!rep.passed) as usize;
    }
    outcome(
        fails == 0,
        format!("200 instances, {fails} failures, min margin {worst:.4}"),
    )
}

fn exp3_regret() -> Result<Outcome> {
    let horizon = 10_000;
    let mut ok = true;
    let mut parts = vec![];
    for k in [2usize, 4, 8] {
        let mut envs = vec![];
        let mut rng = seeded(50 + k as u64);
        for _ in 0..3 {
            let stage = random_static(&mut rng, &StaticParams::with_arms(k))?;
            envs.push((
                "stationary",
                Environment::new(&DynamicInvestmentInstance::stationary(stage, horizon)?, &SG)?,
            ));
        }
        envs.push((
            "prop1",
            Environment::new(&gen_prop1_instance(k, horizon, k as u64)?, &OptimalAllocation)?,
        ));
        let kf = k as f64;
        let mut worst = 0.0f64;
        for (_, env) in &envs {
            let (lo, hi) = env.bounds();
            let bound = 2.7 * (horizon as f64 * kf * kf.ln()).sqrt() * (hi - lo);
            let est = expected_quantities(env, &LearnerSpec::Exp3, 50, 500 + k as u64)?;
            ok &= est.regret.mean <= bound;
            worst = worst.max(est.regret.mean / bound);
        }
        parts.push(format!("K={k} max regret/bound {worst:.3}"));
    }
    outcome(ok, parts.join(", "))
}

fn theorem3() -> Result<Outcome> {
    let params = DynamicParams::default();
    let mut fails = 0;
    let mut worst = f64::INFINITY;
    for i in 0..100 {
        let env = Environment::new(&gen_random_instance(&params, 6_000 + i)?, &SG)?;
        let rep = verify_dynamic_approx(&env, &LearnerSpec::Exp3, 0.5, 50, i)?;
        fails += (!rep.passed) as usize;
        worst = worst.min(rep.margin);
    }
    outcome(
        fails == 0,
        format!("100 instances, {fails} failures, min margin {worst:.2}"),
    )
}

fn prop1_ratio() -> Result<Outcome> {
    let env = Environment::new(&gen_prop1_instance(4, 20_000, 7)?, &OptimalAllocation)?;
    let dyn_opt = strongly_dynamic_welfare(&env);
    let mut ok = true;
    let mut parts = vec![];
    for spec in [LearnerSpec::Exp3, LearnerSpec::Uniform] {
        let est = expected_quantities(&env, &spec, 100, 70)?;
        let ratio = est.welfare.mean / dyn_opt;
        ok &= (0.23..=0.30).contains(&ratio);
        parts.push(format!("{spec} ratio {ratio:.4}"));
    }
    outcome(ok, parts.join(", "))
}

fn prop2_chain() -> Result<Outcome> {
    let params = DynamicParams::default();
    let (mut chain_fails, mut mc_fails) = (0, 0);
    for i in 0..100 {
        let env = Environment::new(&gen_random_instance(&params, 8_000 + i)?, &SG)?;
        chain_fails += (!strong_chain(&env, 0.5).passed) as usize;
        mc_fails += (!verify_strong_approx(&env, &LearnerSpec::Exp3, 0.5, 50, i)?
            .monte_carlo
            .passed) as usize;
    }
    outcome(
        chain_fails == 0 && mc_fails == 0,
        format!("100 instances, chain failures {chain_fails}, Monte-Carlo failures {mc_fails}"),
    )
}

fn cost_shift() -> Result<Outcome> {
    let mut rng = seeded(9);
    let mut fails = 0;
    for _ in 0..1000 {
        let inst = random_static(&mut rng, &StaticParams::default())?;
        let s = rng.random_range(0..inst.state_count());
        let a = rng.random_range(0..inst.arm_count());
        let delta = rng.random_range(-1.0..=1.0);
        fails += (!check_cost_shift(&inst, &SG, s, a, delta)?.passed) as usize;
    }
    outcome(fails == 0, format!("1000 tuples, {fails} failures"))
}

fn determinism() -> Result<Outcome> {
    let inst = gen_random_instance(&DynamicParams::default(), 10)?;
    let reparsed: DynamicInvestmentInstance =
        serde_json::from_str(&serde_json::to_string(&inst).expect("serializes")).expect("parses");
    let csv = |inst: &DynamicInvestmentInstance| -> Result<String> {
        let env = Environment::new(inst, &SG)?;
        let mut l = Exp3::new(env.arm_count(), env.horizon())?;
        Ok(simulate_run(&env, &mut l, 1234)?.to_csv())
    };
    let (a, b, c) = (csv(&inst)?, csv(&inst)?, csv(&reparsed)?);
    outcome(
        a == b && a == c,
        format!("{} bytes, identical: {}", a.len(), a == b && a == c),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 table1 exact values", table1_exact, Duration::from_secs(1)),
        (
            "2 smart_greedy half approximation",
            smart_greedy_half,
            Duration::from_secs(60),
        ),
        (
            "3 xcone and weak monotonicity",
            xcone_and_monotone,
            Duration::from_secs(300),
        ),
        (
            "4 static investment approximation",
            static_approx,
            Duration::from_secs(120),
        ),
        ("5 exp3 regret bound", exp3_regret, Duration::from_secs(300)),
        ("6 dynamic approximation", theorem3, Duration::from_secs(900)),
        ("7 lower-bound ratio", prop1_ratio, Duration::from_secs(300)),
        ("8 strongly dynamic chain", prop2_chain, Duration::from_secs(600)),
        ("9 cost shift identity", cost_shift, Duration::from_secs(60)),
        ("10 trace determinism", determinism, Duration::from_secs(60)),
    ];
    let mut all = true;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let res = run();
        let took = start.elapsed();
        let (passed, detail) = match res {
            Ok(o) => (o.passed && took <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!(
            "{} criterion {name}: {detail} [{:.2}s / {}s]",
            if passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
