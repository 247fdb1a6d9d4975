use std::fs;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use investsim::algorithms::by_id;
use investsim::properties::{
    check_weak_monotone_corpus, check_xcone_corpus, random_templates, Counterexample, PropertyReport, PropertyTemplate,
};

use crate::args::CheckArgs;
use crate::output::OutDir;

#[derive(Serialize)]
struct Summary<'a> {
    property: &'a str,
    passed: bool,
    checked: u64,
    violations: u64,
}

#[derive(Serialize)]
struct Report<'a> {
    algorithm: &'a str,
    templates: usize,
    seed: Option<u64>,
    passed: bool,
    properties: Vec<Summary<'a>>,
}

#[derive(Serialize)]
struct Counterexamples<'a> {
    algorithm: &'a str,
    weak_monotone: &'a [Counterexample],
    xcone: &'a [Counterexample],
}

pub fn check_properties(args: &CheckArgs) -> Result<bool> {
    let x = by_id(&args.algo)?;
    let (templates, seed) = match &args.templates {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let t: Vec<PropertyTemplate> =
                serde_json::from_str(&text).with_context(|| format!("parsing templates {}", path.display()))?;
            (t, None)
        }
        None => {
            if args.instances == 0 || args.items == 0 || args.points == 0 {
                bail!("--instances, --items and --points must be positive");
            }
            let seed = args.common.seed.unwrap_or(0);
            (
                random_templates(args.instances, args.items, args.points, seed),
                Some(seed),
            )
        }
    };
    let mono = check_weak_monotone_corpus(x.as_ref(), &templates)?;
    let xcone = check_xcone_corpus(x.as_ref(), &templates)?;
    let passed = mono.passed && xcone.passed;
    let out = OutDir::create(&args.common.out.clone().unwrap_or_else(|| "out/properties".into()))?;
    let summary = |property, r: &PropertyReport| Summary {
        property,
        passed: r.passed,
        checked: r.checked,
        violations: r.violations,
    };
    let report = Report {
        algorithm: x.id(),
        templates: templates.len(),
        seed,
        passed,
        properties: vec![summary("weak_monotone", &mono), summary("xcone", &xcone)],
    };
    out.write_json("properties.json", &report)?;
    let cx_path = out.path("counterexamples.json");
    if passed {
        if cx_path.exists() {
            fs::remove_file(&cx_path).with_context(|| format!("removing stale {}", cx_path.display()))?;
        }
    } else {
        out.write_json(
            "counterexamples.json",
            &Counterexamples {
                algorithm: x.id(),
                weak_monotone: &mono.counterexamples,
                xcone: &xcone.counterexamples,
            },
        )?;
    }
    for s in &report.properties {
        println!(
            "{} {} {}: {} profiles checked, {} violations",
            if s.passed { "PASS" } else { "FAIL" },
            report.algorithm,
            s.property,
            s.checked,
            s.violations
        );
    }
    Ok(passed)
}
