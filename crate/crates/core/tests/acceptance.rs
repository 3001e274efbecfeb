//! Runs the ten acceptance criteria and prints one line per criterion.
//! Built with `harness = false`; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmalab::comparators::{lemma_reports, random_case, Background, RICCI_SECOND_FIRST_PAIR_ID};
use sigmalab::config::{RunConfig, Settings};
use sigmalab::experiments::{COMPARISON_TUPLES, DEFAULT_SEED};
use sigmalab::functional::sphere_proof_identities;
use sigmalab::models::{harmonic_library, sphere_quadrature, HarmonicPerturbation};
use sigmalab::report::{ReportRow, Verdict};
use sigmalab::suites::SuiteRegistry;
use sigmalab::symalg::{contraction_rule_check, sigma_via_delta, SymEndo};

type Outcome = Result<String, String>;

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    if took > limit {
        Err(format!("{detail}; took {took:.1?}, limit {limit:?}"))
    } else {
        Ok(format!("{detail}; {took:.1?}"))
    }
}

fn run_suite(command: &str, cfg: RunConfig) -> Result<Vec<ReportRow>, String> {
    let settings = Settings::resolve(RunConfig {
        command: Some(command.into()),
        ..cfg
    })
    .map_err(|e| e.to_string())?;
    SuiteRegistry::with_defaults().run(&settings).map_err(|e| e.to_string())
}

/// All rows with one of `ids` must pass; returns how many there were.
fn all_pass(rows: &[ReportRow], ids: &[&str]) -> Result<usize, String> {
    let sel: Vec<&ReportRow> = rows.iter().filter(|r| ids.contains(&r.id.as_str())).collect();
    if sel.is_empty() {
        return Err(format!("no rows for {ids:?}"));
    }
    if let Some(bad) = sel.iter().find(|r| r.verdict != Verdict::Pass) {
        return Err(format!(
            "{} {} residual {:e} > {:e} {}",
            bad.id, bad.case, bad.residual, bad.tolerance, bad.note
        ));
    }
    Ok(sel.len())
}

fn sigma_dual_route() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let n = 2 + i % 4;
        let mut e = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = rng.gen_range(-3.0..3.0);
                e[a * n + b] = v;
                e[b * n + a] = v;
            }
        }
        let s = SymEndo::new(n, e).map_err(|e| e.to_string())?;
        for k in 1..=n {
            let a = sigma_via_delta(&s, k).map_err(|e| e.to_string())?;
            let b = s.sigma(k).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    if worst > 1e-9 {
        return Err(format!("worst relative gap {worst:e}"));
    }
    within(Duration::from_secs(10), start, format!("1000 endomorphisms, worst gap {worst:.1e}"))
}

fn contraction_rule() -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    for n in 2..=4 {
        for k in 2..=n {
            for p in 1..k {
                if !contraction_rule_check(p, k, n).map_err(|e| e.to_string())? {
                    return Err(format!("fails at p={p}, k={k}, n={n}"));
                }
                count += 1;
            }
        }
    }
    within(Duration::from_secs(30), start, format!("{count} (p,k,n) triples"))
}

fn pointwise_lemmas() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (offset, bg) in [(0, Background::Sphere), (1000, Background::Flat)] {
        for i in 0..20 {
            let case = random_case(DEFAULT_SEED, offset + i, 3 + i % 2, bg).map_err(|e| e.to_string())?;
            for r in lemma_reports(&case, 1e-8).map_err(|e| e.to_string())? {
                if r.id == RICCI_SECOND_FIRST_PAIR_ID {
                    continue;
                }
                if !r.pass {
                    return Err(format!("{} {} residual {:e}", r.id, r.case, r.rel_residual));
                }
                checked += 1;
            }
        }
    }
    within(Duration::from_secs(120), start, format!("{checked} comparisons on 20 sphere + 20 flat cases"))
}

fn integrated_identities() -> Outcome {
    let start = Instant::now();
    let model = sphere_quadrature(3, 1.0, 10).map_err(|e| e.to_string())?;
    let mut lib = harmonic_library(3);
    lib.push(HarmonicPerturbation::constant_field(1.0, 4));
    let mut checked = 0;
    for u in &lib {
        for k in 1..=3 {
            for r in sphere_proof_identities(&model, u, k, 1e-6).map_err(|e| e.to_string())? {
                if !r.pass {
                    return Err(format!("{} {} residual {:e}", r.id, r.case, r.rel_residual));
                }
                checked += 1;
            }
        }
    }
    within(Duration::from_secs(120), start, format!("{checked} identities on S3"))
}

fn functional_rows() -> Result<Vec<ReportRow>, String> {
    run_suite(
        "verify-functional",
        RunConfig {
            model: Some("both".into()),
            ..Default::default()
        },
    )
}

fn critical_point(rows: &[ReportRow]) -> Outcome {
    let six: Vec<String> = COMPARISON_TUPLES.iter().map(|(n, k, l)| format!("n={n},k={k},l={l}")).collect();
    let sel: Vec<ReportRow> = rows
        .iter()
        .filter(|r| r.id.starts_with("critical_point") && r.case.starts_with('S'))
        .filter(|r| six.iter().any(|t| r.case.contains(&format!(":{t}:"))))
        .cloned()
        .collect();
    let n = all_pass(&sel, &["critical_point_assembled", "critical_point_fd"])?;
    Ok(format!("{n} rows over the six tuples"))
}

fn second_variation(rows: &[ReportRow]) -> Outcome {
    let s = all_pass(rows, &["second_variation_sphere"])?;
    let p = all_pass(rows, &["second_variation_product"])?;
    let c = all_pass(rows, &["scaling_invariance"])?;
    Ok(format!("{s} sphere, {p} product, {c} scaling rows"))
}

fn sign_predictions(rows: &[ReportRow]) -> Outcome {
    let s = all_pass(rows, &["sign_prediction"])?;
    let o = all_pass(rows, &["obata_gap", "j_term_nonnegative"])?;
    let e = all_pass(rows, &["obata_equality"])?;
    Ok(format!("{s} sign rows, {o} gap rows, {e} degree-1 equality rows"))
}

fn counterexample_rows() -> Result<Vec<ReportRow>, String> {
    run_suite(
        "counterexample",
        RunConfig {
            n: Some(vec![4]),
            lambda: Some(1.0),
            ..Default::default()
        },
    )
}

fn counterexample(rows: &[ReportRow], took: Duration) -> Outcome {
    let witness: Vec<ReportRow> = rows
        .iter()
        .filter(|r| r.id == "stability_witness")
        .filter(|r| {
            let t: f64 = r.case.split("t=").nth(1).and_then(|s| s.split(',').next()).unwrap().parse().unwrap();
            t != 0.0 && t.abs() <= 0.1
        })
        .cloned()
        .collect();
    let w = all_pass(&witness, &["stability_witness"])?;
    let v = all_pass(rows, &["volume_ratio_closed_form"])?;
    let c = all_pass(rows, &["instability_eigenvalue", "instability_eigenvalue_brute_force", "instability_verdict"])?;
    if took > Duration::from_secs(5) {
        return Err(format!("took {took:.1?}"));
    }
    Ok(format!("{w} witness t values, {v} volume rows, {c} certificate rows; {took:.1?}"))
}

fn expansion_audit(rows: &[ReportRow]) -> Outcome {
    all_pass(rows, &["expansion_sigma1", "expansion_fit"])?;
    let k2 = rows
        .iter()
        .find(|r| r.id == "expansion_vs_printed_bracket" && r.case.starts_with("n=4,k=2,"))
        .ok_or("no k=2 bracket row")?;
    if !matches!(k2.verdict, Verdict::Pass | Verdict::Finding) {
        return Err(format!("k=2 bracket row verdict {}", k2.verdict.label()));
    }
    Ok(format!(
        "sigma_1 coefficient 1/8; sigma_2 coefficient {:.6} vs bracket {:.6} ({})",
        k2.value,
        k2.reference,
        k2.verdict.label()
    ))
}

fn comparison_probe() -> Outcome {
    let start = Instant::now();
    let rows = run_suite("compare-sphere", RunConfig::default())?;
    let n = all_pass(&rows, &["comparison_violations"])?;
    let trials = rows.iter().filter(|r| r.id == "comparison_trial").count();
    if n != COMPARISON_TUPLES.len() || trials < 100 * n {
        return Err(format!("{n} tuples, {trials} trials"));
    }
    within(Duration::from_secs(600), start, format!("{trials} trials over {n} tuples, 0 violations"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "sigma_k dual-route equivalence", sigma_dual_route()));
    results.push((2, "generalized Kronecker contraction rule", contraction_rule()));
    results.push((3, "pointwise variational formulas", pointwise_lemmas()));
    results.push((4, "integrated second-variation identities", integrated_identities()));
    match functional_rows() {
        Ok(rows) => {
            results.push((5, "Einstein metric is critical", critical_point(&rows)));
            results.push((6, "second variation and scale invariance", second_variation(&rows)));
            results.push((7, "sign predictions and Obata gap", sign_predictions(&rows)));
        }
        Err(e) => {
            for (i, name) in [(5, "Einstein metric is critical"), (6, "second variation and scale invariance"), (7, "sign predictions and Obata gap")] {
                results.push((i, name, Err(e.clone())));
            }
        }
    }
    let start = Instant::now();
    match counterexample_rows() {
        Ok(rows) => {
            let took = start.elapsed();
            results.push((8, "product-family counterexample", counterexample(&rows, took)));
            results.push((9, "t^2 expansion audit", expansion_audit(&rows)));
        }
        Err(e) => {
            results.push((8, "product-family counterexample", Err(e.clone())));
            results.push((9, "t^2 expansion audit", Err(e)));
        }
    }
    results.push((10, "scaled conformal comparison trials", comparison_probe()));

    let mut failed = 0;
    for (i, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {i:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {i:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
