use std::fs;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use investsim::algorithms::by_id;
use investsim::dynamic::{
    best_fixed_welfare, expected_quantities, gen_greedy_gap_instance, gen_prop1_instance, gen_random_instance,
    gen_table1_dynamic, simulate_run, strong_chain, strongly_dynamic_welfare, ChainReport, DynamicApproxReport,
    DynamicInvestmentInstance, DynamicParams, Environment, Estimates,
};
use investsim::knapsack::DEFAULT_EPSILON;
use investsim::rng::run_seed;

use crate::args::RunArgs;
use crate::config::ExperimentConfig;
use crate::output::OutDir;

#[derive(Serialize)]
struct RunReport {
    algorithm: String,
    learner: String,
    seed: u64,
    runs: usize,
    best_fixed_welfare: f64,
    strongly_dynamic_welfare: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimates: Option<Estimates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dynamic: Option<DynamicApproxReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strong: Option<DynamicApproxReport>,
    chain: ChainReport,
}

fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<DynamicInvestmentInstance> {
    if let Some(path) = &cfg.instance_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let inst: DynamicInvestmentInstance =
            serde_json::from_str(&text).with_context(|| format!("parsing instance {}", path.display()))?;
        if let Some(t) = cfg.horizon {
            if t != inst.horizon() {
                bail!("field `T`: {t} disagrees with the instance horizon {}", inst.horizon());
            }
        }
        return Ok(inst);
    }
    let scenario = cfg.scenario.as_deref().expect("validated");
    let t = cfg.horizon.unwrap_or(1_000);
    Ok(match scenario {
        "table1" => gen_table1_dynamic(t, cfg.epsilon.unwrap_or(DEFAULT_EPSILON))?,
        "prop1" => gen_prop1_instance(cfg.arms.unwrap_or(4), t, seed)?,
        "greedy_gap" => gen_greedy_gap_instance(t)?,
        "random" => {
            let mut params = DynamicParams {
                horizon: t,
                ..Default::default()
            };
            if let Some(k) = cfg.arms {
                params.stage.arms = (k, k);
            }
            gen_random_instance(&params, seed)?
        }
        other => unreachable!("scenario {other} passed validation"),
    })
}

pub fn run(args: &RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.common.seed {
        cfg.seed = Some(s);
    }
    if let Some(out) = &args.common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = Some(t);
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    cfg.validate()
        .with_context(|| format!("invalid config {}", args.config.display()))?;

    let seed = cfg.seed.unwrap_or(0);
    let x = by_id(&cfg.algorithm)?;
    let spec = cfg.learner_spec()?;
    let inst = build_instance(&cfg, seed)?;
    let env = Environment::new(&inst, x.as_ref())?;
    let out = OutDir::create(&cfg.out.clone().unwrap_or_else(|| "out/run".into()))?;
    out.write_json("instance.json", &inst)?;

    let mut learner = spec.build(env.arm_count(), env.horizon())?;
    let trace = simulate_run(&env, learner.as_mut(), run_seed(seed, 0))?;
    out.write("trace.csv", trace.to_csv().as_bytes())?;
    out.write_json("summary.json", &trace.summary)?;

    let fixed = best_fixed_welfare(&env);
    let dyn_opt = strongly_dynamic_welfare(&env);
    let k = env.arm_count() as f64;
    let (estimates, dynamic, strong) = if cfg.runs >= 2 {
        let est = expected_quantities(&env, &spec, cfg.runs, seed)?;
        let sigmas = cfg.tolerance.sigma;
        let d = DynamicApproxReport::from_estimates(cfg.beta, &est, fixed, sigmas);
        let s = DynamicApproxReport::from_estimates(cfg.beta / k, &est, dyn_opt, sigmas);
        (Some(est), Some(d), Some(s))
    } else {
        (None, None, None)
    };
    let passed = dynamic.as_ref().is_none_or(|d| d.passed);
    let report = RunReport {
        algorithm: cfg.algorithm.clone(),
        learner: spec.to_string(),
        seed,
        runs: cfg.runs,
        best_fixed_welfare: fixed,
        strongly_dynamic_welfare: dyn_opt,
        estimates,
        dynamic,
        strong,
        chain: strong_chain(&env, cfg.beta),
    };
    out.write_json("report.json", &report)?;
    println!(
        "run: {} + {} over T={}, welfare {} regret {} -> {}",
        report.algorithm,
        report.learner,
        env.horizon(),
        trace.summary.total_welfare_alg,
        trace.summary.regret,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}
