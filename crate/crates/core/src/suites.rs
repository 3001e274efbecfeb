//! Named verification suites behind a common trait, and the registry the CLI
//! dispatches through.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::comparators::{lemma_reports, random_case, Background, RICCI_SECOND_FIRST_PAIR_ID};
use crate::config::{ModelChoice, Settings};
use crate::error::{LabError, Result};
use crate::experiments::{
    counterexample_scan, expansion_coefficient_audit, instability_certificate, sphere_comparison_experiment,
    with_worker_pool, TrialVerdict,
};
use crate::functional::{
    coefficients, d2f_formula, d2f_numeric, df_at_reference, f_value, obata_gap, product_proof_identities,
    sign_analysis, sphere_proof_identities, BetaVariant, ConformalForm, FunctionalConfig, MetricPath, PredictedSign,
    ProductPath, ProductPathKind, SpectralInputs, SphereConformalPath, DEFAULT_FD_STEP,
};
use crate::jet::{shape, PolyJet};
use crate::models::{
    harmonic_library, product_volume_ratio, sphere_quadrature, unit_sphere_volume, EinsteinConvention, HarmonicKind,
    HarmonicPerturbation, ProductEinsteinModel, SphereModel, DEFAULT_QUAD_ORDER,
};
use crate::report::{Report, ReportRow, Verdict};
use crate::symalg::{contraction_rule_check, sigma_via_delta, SymEndo};

pub trait Suite: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, settings: &Settings) -> Result<Vec<ReportRow>>;
}

#[derive(Default)]
pub struct SuiteRegistry {
    suites: Vec<Box<dyn Suite>>,
}

impl SuiteRegistry {
    pub fn with_defaults() -> Self {
        let mut r = Self::default();
        r.register(Box::new(VerifyLemmas));
        r.register(Box::new(VerifyFunctional));
        r.register(Box::new(Counterexample));
        r.register(Box::new(CompareSphere));
        r.register(Box::new(SelfTest));
        r
    }

    /// Later registrations replace earlier ones with the same name.
    pub fn register(&mut self, suite: Box<dyn Suite>) {
        self.suites.retain(|s| s.name() != suite.name());
        self.suites.push(suite);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Suite> {
        self.suites.iter().find(|s| s.name() == name).map(|s| s.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.suites.iter().map(|s| s.name()).collect()
    }

    pub fn run(&self, settings: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.get(&settings.command).ok_or_else(|| {
            LabError::Config(format!(
                "unknown command `{}` (available: {})",
                settings.command,
                self.names().join(", ")
            ))
        })?;
        with_worker_pool(|| suite.run(settings))?
    }

    /// Runs the command named in `settings` and wraps the rows with the
    /// resolved settings for the report header and summary.
    pub fn report(&self, settings: &Settings) -> Result<Report> {
        let rows = self.run(settings)?;
        let json = serde_json::to_value(settings).map_err(|e| LabError::Io(e.to_string()))?;
        Ok(Report {
            command: settings.command.clone(),
            seed: settings.seed,
            settings: json,
            rows,
        })
    }
}

fn lemma_anchor(id: &str) -> &'static str {
    if id.starts_with("inverse_metric") {
        "inverse metric variation"
    } else if id.starts_with("volume") {
        "volume variation"
    } else if id.starts_with("ricci") {
        "Ricci curvature variation"
    } else if id.starts_with("scalar") {
        "scalar curvature variation"
    } else if id.starts_with("sigma_first") {
        "sigma_k first variation on Einstein background"
    } else if id.starts_with("sigma_second") {
        "sigma_k second variation on Einstein background"
    } else {
        "integrated second-variation identity"
    }
}

fn sphere_model(n: usize, lambda: f64, order: usize) -> Result<Arc<SphereModel>> {
    Ok(Arc::new(sphere_quadrature(n, lambda, order)?))
}

fn library_with_constant(n: usize) -> Vec<HarmonicPerturbation> {
    let mut lib = harmonic_library(n);
    lib.push(HarmonicPerturbation::constant_field(1.0, n + 1));
    lib
}

fn form_label(form: ConformalForm) -> &'static str {
    match form {
        ConformalForm::Linear => "linear",
        ConformalForm::Exponential => "exp",
    }
}

/// Pointwise variational formulas against jet oracles, plus the integrated
/// identities on quadrature and product backends.
pub struct VerifyLemmas;

impl Suite for VerifyLemmas {
    fn name(&self) -> &'static str {
        "verify-lemmas"
    }

    fn description(&self) -> &'static str {
        "variational formulas vs. exact jet derivatives; integrated identities"
    }

    fn run(&self, s: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let jobs: Vec<(usize, usize, Background)> = (0..s.cases)
            .map(|i| (i, 3 + i % 2, Background::Sphere))
            .chain((0..s.cases).map(|i| (s.cases + i, 3 + i % 2, Background::Flat)))
            .collect();
        let tol = s.tolerances.lemmas;
        let chunks: Vec<Vec<ReportRow>> = jobs
            .par_iter()
            .map(|&(idx, n, bg)| -> Result<Vec<ReportRow>> {
                let case = random_case(s.seed, idx, n, bg)?;
                Ok(lemma_reports(&case, tol)?
                    .iter()
                    .map(|v| {
                        let row = ReportRow::from_variation(suite, lemma_anchor(&v.id), v);
                        if v.id == RICCI_SECOND_FIRST_PAIR_ID {
                            row.as_finding()
                                .with_note(format!("display read with R_ijij = K; {}", v.fitted_coefficient.map_or(String::new(), |c| format!("fitted factor {c:.6}"))))
                        } else {
                            row
                        }
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut rows: Vec<ReportRow> = chunks.into_iter().flatten().collect();

        if s.lambda > 0.0 {
            let order = s.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
            for n in [3, 4] {
                let model = sphere_model(n, s.lambda, order)?;
                for u in library_with_constant(n) {
                    for k in 1..=n {
                        for v in sphere_proof_identities(&model, &u, k, s.tolerances.integrated)? {
                            rows.push(ReportRow::from_variation(suite, lemma_anchor(&v.id), &v));
                        }
                    }
                }
            }
            for m in [2, 3] {
                let pm = ProductEinsteinModel::new(m, s.lambda, EinsteinConvention::RicEqNm1LambdaG)?;
                for kind in [ProductPathKind::Family, ProductPathKind::Linear { s: 0.6, tau: 0.3 }] {
                    let path = ProductPath::new(pm.clone(), kind);
                    for k in 1..=2 * m {
                        for v in product_proof_identities(&path, k, s.tolerances.integrated)? {
                            rows.push(ReportRow::from_variation(suite, lemma_anchor(&v.id), &v));
                        }
                    }
                }
            }
        }
        Ok(rows)
    }
}

/// Coefficients, criticality, second variation, sign table and the
/// Lichnerowicz–Obata gap of the comparison functional.
pub struct VerifyFunctional;

const ANCHOR_CRITICAL: &str = "Einstein metric is critical for the functional";
const ANCHOR_SECOND: &str = "second variation of the functional";
const ANCHOR_SCALING: &str = "scale invariance of the functional";
const ANCHOR_SIGN: &str = "sign of the second variation";
const ANCHOR_OBATA: &str = "Lichnerowicz-Obata inequality";
const ANCHOR_COEFF: &str = "second-variation coefficients";

fn critical_rows(suite: &str, case: &str, cfg: &FunctionalConfig, path: &dyn MetricPath, tol: f64) -> Result<Vec<ReportRow>> {
    let d = df_at_reference(cfg, path)?;
    let scale = d.scale.max(f64::MIN_POSITIVE);
    Ok(vec![
        ReportRow::check(suite, "critical_point_assembled", ANCHOR_CRITICAL, case, d.assembled, 0.0, d.assembled.abs() / scale, tol),
        ReportRow::check(suite, "critical_point_fd", ANCHOR_CRITICAL, case, d.finite_difference, 0.0, d.finite_difference.abs() / scale, tol),
    ])
}

fn second_variation_row(
    suite: &str,
    id: &str,
    case: &str,
    cfg: &FunctionalConfig,
    path: &dyn MetricPath,
    tol: f64,
) -> Result<(ReportRow, f64, f64, f64)> {
    let formula = d2f_formula(cfg, &path.direction()?)?;
    let numeric = match d2f_numeric(cfg, path, DEFAULT_FD_STEP, formula.scale) {
        Ok(v) => v,
        Err(e) => {
            let mut r = ReportRow::check(suite, id, ANCHOR_SECOND, case, formula.total, f64::NAN, f64::INFINITY, tol);
            r.note = e.to_string();
            return Ok((r, formula.total, f64::NAN, formula.scale));
        }
    };
    let rel = (formula.total - numeric.value).abs() / numeric.value.abs().max(formula.scale);
    let note = format!(
        "route={}; I={:.6e}; J={:.6e}; beta variant {}",
        formula.route,
        formula.i_term,
        formula.j_term,
        cfg.beta_variant.label()
    );
    Ok((
        ReportRow::check(suite, id, ANCHOR_SECOND, case, formula.total, numeric.value, rel, tol).with_note(note),
        formula.total,
        numeric.value,
        formula.scale,
    ))
}

fn scaling_rows(suite: &str, case: &str, cfg: &FunctionalConfig, make: &dyn Fn(f64) -> Box<dyn MetricPath>, tol: f64) -> Result<Vec<ReportRow>> {
    let t = 0.05;
    let base = f_value(cfg, make(1.0).as_ref(), t)?.value;
    let mut rows = Vec::new();
    for c in [0.5, 1.3, 2.0] {
        let v = f_value(cfg, make(c).as_ref(), t)?.value;
        rows.push(ReportRow::check(
            suite,
            "scaling_invariance",
            ANCHOR_SCALING,
            &format!("{case},c={c}"),
            v,
            base,
            (v - base).abs() / base.abs(),
            tol,
        ));
    }
    Ok(rows)
}

impl VerifyFunctional {
    fn sphere_tuple(&self, s: &Settings, model: &Arc<SphereModel>, n: usize, k: usize, l: usize) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let cfg = FunctionalConfig::new(n, k, l, s.lambda, s.beta_variant, model.volume())?;
        let tuple = cfg.tuple_label();
        let mut rows = Vec::new();
        let co = coefficients(&cfg)?;
        rows.push(
            ReportRow::info(suite, "coefficients", ANCHOR_COEFF, &format!("S{n}:{tuple}"), co.a_coeff, co.beta).with_note(format!(
                "alpha={}; beta={}; mu={}; a={}; beta variant {}",
                co.alpha.map_or("n/a".into(), |v| format!("{v:.16e}")),
                co.beta,
                co.mu.map_or("n/a".into(), |v| format!("{v:.16e}")),
                co.a_coeff,
                cfg.beta_variant.label()
            )),
        );
        let sign = sign_analysis(&cfg, &SpectralInputs { k_max: s.lambda, k_min: s.lambda, lambda_e: None })?;
        for (i, u) in library_with_constant(n).into_iter().enumerate() {
            for form in [ConformalForm::Linear, ConformalForm::Exponential] {
                let path = SphereConformalPath::new(model.clone(), u.clone(), form);
                let case = format!("S{n}:{tuple}:{}:u{i}-{}", form_label(form), u.kind.label());
                rows.extend(critical_rows(suite, &case, &cfg, &path, s.tolerances.critical)?);
                let (row, measured, numeric, scale) =
                    second_variation_row(suite, "second_variation_sphere", &case, &cfg, &path, s.tolerances.second_sphere)?;
                let numeric_note = format!("{}; finite-difference value {numeric:.6e}", sign.reason);
                rows.push(row);
                let dir = path.direction()?;
                let j = d2f_formula(&cfg, &dir)?;
                rows.push(ReportRow::condition(
                    suite,
                    "j_term_nonnegative",
                    ANCHOR_OBATA,
                    &case,
                    j.j_term,
                    0.0,
                    j.j_term >= -s.tolerances.obata * dir.h_norm2.max(f64::MIN_POSITIVE) * s.lambda.abs(),
                ));
                match sign.predicted {
                    PredictedSign::NonPositive => rows.push(
                        ReportRow::check(suite, "sign_prediction", ANCHOR_SIGN, &case, measured, 0.0, measured.max(0.0) / scale, s.tolerances.sign)
                            .with_note(numeric_note),
                    ),
                    PredictedSign::NonNegative => rows.push(
                        ReportRow::check(suite, "sign_prediction", ANCHOR_SIGN, &case, measured, 0.0, (-measured).max(0.0) / scale, s.tolerances.sign)
                            .with_note(numeric_note),
                    ),
                    PredictedSign::NoPrediction => {
                        rows.push(ReportRow::info(suite, "sign_prediction", ANCHOR_SIGN, &case, measured, 0.0).with_note(numeric_note))
                    }
                }
            }
        }
        let lib = harmonic_library(n);
        let u = lib[lib.len() - 1].clone();
        let m2 = model.clone();
        rows.extend(scaling_rows(
            suite,
            &format!("S{n}:{tuple}"),
            &cfg,
            &move |c| Box::new(SphereConformalPath::new(m2.clone(), u.clone(), ConformalForm::Exponential).scaled(c)),
            s.tolerances.scaling,
        )?);
        rows.push(ReportRow::info(suite, "sign_analysis", ANCHOR_SIGN, &format!("S{n}:{tuple}"), sign.theta_bound, sign.lambda_e_lower).with_note(format!(
            "predicted={:?}; K_max <= (n/2)lambda: {}",
            sign.predicted, sign.kmax_condition
        )));
        Ok(rows)
    }

    fn product_tuple(&self, s: &Settings, n: usize, k: usize, l: usize) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let pm = ProductEinsteinModel::new(n / 2, s.lambda, EinsteinConvention::RicEqNm1LambdaG)?;
        let mut rows = Vec::new();
        for kind in [ProductPathKind::Family, ProductPathKind::Linear { s: 0.6, tau: 0.3 }] {
            let path = ProductPath::new(pm.clone(), kind);
            let cfg = FunctionalConfig::new(n, k, l, path.lambda(), s.beta_variant, path.reference_volume())?;
            let case = format!("{}:{}", path.label(), cfg.tuple_label());
            rows.extend(critical_rows(suite, &case, &cfg, &path, s.tolerances.critical)?);
            let (row, _, numeric, _) = second_variation_row(suite, "second_variation_product", &case, &cfg, &path, s.tolerances.second_product)?;
            rows.push(row);
            rows.push(
                ReportRow::info(suite, "product_second_variation_sign", ANCHOR_SIGN, &case, numeric, 0.0)
                    .with_note("background is not strictly stable; no sign is asserted"),
            );
            let p2 = path.clone();
            rows.extend(scaling_rows(suite, &case, &cfg, &move |c| Box::new(p2.scaled(c)), s.tolerances.scaling)?);
        }
        Ok(rows)
    }
}

impl Suite for VerifyFunctional {
    fn name(&self) -> &'static str {
        "verify-functional"
    }

    fn description(&self) -> &'static str {
        "criticality, second variation, sign table and scaling of the comparison functional"
    }

    fn run(&self, s: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let mut rows = Vec::new();
        let mut worst = f64::NEG_INFINITY;
        for n in 3..=10 {
            for k in 1..=n {
                for l in 0..k {
                    if let Ok(cfg) = FunctionalConfig::new(n, k, l, 1.0, BetaVariant::NMinus2L, 1.0) {
                        worst = worst.max(coefficients(&cfg)?.a_coeff);
                    }
                }
            }
        }
        rows.push(ReportRow::condition(suite, "a_coeff_negative", ANCHOR_COEFF, "n<=10", worst, 0.0, worst < 0.0));

        let use_sphere = s.model != ModelChoice::Product && s.lambda > 0.0;
        let use_product = s.model != ModelChoice::Sphere && s.lambda > 0.0;
        let order = s.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
        let mut models = std::collections::BTreeMap::new();
        if use_sphere {
            for &(n, _, _) in &s.tuples {
                if (3..=4).contains(&n) && !models.contains_key(&n) {
                    models.insert(n, sphere_model(n, s.lambda, order)?);
                }
            }
            for (&n, model) in &models {
                for (i, u) in library_with_constant(n).into_iter().enumerate() {
                    let (lhs, rhs, gap) = obata_gap(model, &u);
                    let scale = lhs.max(rhs).max(f64::MIN_POSITIVE);
                    let case = format!("S{n}:u{i}-{}", u.kind.label());
                    rows.push(ReportRow::condition(suite, "obata_gap", ANCHOR_OBATA, &case, lhs, rhs, gap >= -s.tolerances.obata * scale));
                    if u.kind == HarmonicKind::ConformalDeg1 {
                        rows.push(ReportRow::check(suite, "obata_equality", ANCHOR_OBATA, &case, lhs, rhs, gap.abs() / scale, s.tolerances.obata));
                    }
                }
            }
        }
        let chunks: Vec<Vec<ReportRow>> = s
            .tuples
            .par_iter()
            .map(|&(n, k, l)| -> Result<Vec<ReportRow>> {
                let mut out = Vec::new();
                if let Some(model) = models.get(&n) {
                    out.extend(self.sphere_tuple(s, model, n, k, l)?);
                }
                if use_product && n % 2 == 0 && n >= 4 {
                    out.extend(self.product_tuple(s, n, k, l)?);
                }
                if out.is_empty() {
                    out.push(
                        ReportRow::info(suite, "tuple_skipped", ANCHOR_SECOND, &format!("n={n},k={k},l={l}"), f64::NAN, f64::NAN)
                            .with_note("no backend for this dimension and lambda"),
                    );
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        rows.extend(chunks.into_iter().flatten());
        Ok(rows)
    }
}

/// Product-family scan, expansion audit and instability certificate.
pub struct Counterexample;

const ANCHOR_FAMILY: &str = "product family violating the comparison";
const ANCHOR_EXPANSION: &str = "t^2 expansion of sigma_k along the product family";
const ANCHOR_CERT: &str = "Einstein operator on the product trace-free tensor";

impl Suite for Counterexample {
    fn name(&self) -> &'static str {
        "counterexample"
    }

    fn description(&self) -> &'static str {
        "product-family scan, expansion audit and instability certificate"
    }

    fn run(&self, s: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let mut rows = Vec::new();
        for &n in &s.dims {
            let m = n / 2;
            let ks = s.k_range.clone().unwrap_or_else(|| (1..=n).collect());
            let ls = s.l_range.clone().unwrap_or_else(|| (0..n).collect());
            let scan = counterexample_scan(s.lambda, m, &s.t_grid, &ks, &ls)?;
            for r in &scan {
                let case = format!("n={n},t={},k={},l={}", r.t, r.k, r.l);
                if (r.k, r.l) == (1, 0) && r.t != 0.0 {
                    rows.push(
                        ReportRow::condition(
                            suite,
                            "stability_witness",
                            ANCHOR_FAMILY,
                            &case,
                            r.sigma_k_ratio,
                            r.total_sigma_l_ratio,
                            r.sigma_k_ratio > 1.0 && r.total_sigma_l_ratio > 1.0,
                        )
                        .with_note(format!("volume ratio {:.16e}; comparison_violated={}", r.volume_ratio, r.comparison_violated)),
                    );
                } else {
                    rows.push(
                        ReportRow::info(suite, "scan", ANCHOR_FAMILY, &case, r.sigma_k_ratio, r.total_sigma_l_ratio).with_note(format!(
                            "constraint_holds={}; comparison_violated={}",
                            r.constraint_holds, r.comparison_violated
                        )),
                    );
                }
            }
            let base = ProductEinsteinModel::new(m, s.lambda, EinsteinConvention::RicEqLambdaG)?;
            for &t in &s.t_grid {
                let case = format!("n={n},t={t}");
                match product_volume_ratio(&base, t) {
                    Ok((closed, exact)) => rows.push(ReportRow::check(
                        suite,
                        "volume_ratio_closed_form",
                        ANCHOR_FAMILY,
                        &case,
                        closed,
                        exact,
                        (closed - exact).abs() / exact,
                        1e-12,
                    )),
                    Err(e) => rows.push(
                        ReportRow::check(suite, "volume_ratio_closed_form", ANCHOR_FAMILY, &case, f64::NAN, f64::NAN, f64::INFINITY, 1e-12)
                            .with_note(e.to_string()),
                    ),
                }
            }
            for k in 1..=n {
                let case = format!("n={n},k={k},lambda={}", s.lambda);
                match expansion_coefficient_audit(s.lambda, m, k) {
                    Ok(a) => {
                        rows.push(ReportRow::check(
                            suite,
                            "expansion_fit",
                            ANCHOR_EXPANSION,
                            &case,
                            a.fitted_coefficient,
                            a.exact_coefficient,
                            (a.fitted_coefficient - a.exact_coefficient).abs() / a.exact_coefficient.abs().max(1.0),
                            1e-6,
                        ));
                        if k == 1 {
                            let want = 1.0 / (2.0 * n as f64);
                            rows.push(ReportRow::check(suite, "expansion_sigma1", ANCHOR_EXPANSION, &case, a.exact_coefficient, want, (a.exact_coefficient - want).abs(), 1e-10));
                        }
                        let mut row = ReportRow::check(
                            suite,
                            "expansion_vs_printed_bracket",
                            ANCHOR_EXPANSION,
                            &case,
                            a.exact_coefficient,
                            a.printed_bracket,
                            (a.exact_coefficient - a.printed_bracket).abs() / a.exact_coefficient.abs().max(1.0),
                            1e-8,
                        );
                        row.verdict = if a.agrees { Verdict::Pass } else { Verdict::Finding };
                        let mut note = String::from("printed bracket evaluated as displayed");
                        if s.lambda != 1.0 {
                            note.push_str("; bracket carries no lambda, compare at lambda = 1");
                        }
                        rows.push(row.with_note(note));
                    }
                    Err(e) => rows.push(
                        ReportRow::check(suite, "expansion_fit", ANCHOR_EXPANSION, &case, f64::NAN, f64::NAN, f64::INFINITY, 1e-6)
                            .with_note(e.to_string()),
                    ),
                }
            }
            for mm in std::iter::once(m).chain([2, 3, 4].into_iter().filter(|&x| x != m)) {
                let c = instability_certificate(s.lambda, mm)?;
                let case = format!("S{mm}xS{mm},lambda={}", s.lambda);
                let want = 2.0 * s.lambda;
                rows.push(ReportRow::check(suite, "instability_eigenvalue", ANCHOR_CERT, &case, c.eigenvalue, want, (c.eigenvalue - want).abs(), 1e-12));
                rows.push(ReportRow::check(suite, "instability_eigenvalue_brute_force", ANCHOR_CERT, &case, c.brute_force, want, (c.brute_force - want).abs(), 1e-12));
                rows.push(ReportRow::condition(suite, "instability_verdict", ANCHOR_CERT, &case, c.eigenvalue, 0.0, c.unstable));
            }
        }
        Ok(rows)
    }
}

/// Randomized scaled conformal trials on the round sphere.
pub struct CompareSphere;

const ANCHOR_COMPARE: &str = "total sigma_l comparison under the pointwise sigma_k constraint";

impl Suite for CompareSphere {
    fn name(&self) -> &'static str {
        "compare-sphere"
    }

    fn description(&self) -> &'static str {
        "randomized comparison trials on the stable round sphere"
    }

    fn run(&self, s: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let order = s.quad_order.unwrap_or(8);
        let mut rows = Vec::new();
        for &(n, k, l) in &s.tuples {
            let model = sphere_model(n, s.lambda, order)?;
            let cfg = FunctionalConfig::new(n, k, l, s.lambda, s.beta_variant, model.volume())?;
            let seed = s.seed.wrapping_add((n * 100 + k * 10 + l) as u64);
            let trials = sphere_comparison_experiment(&cfg, model, s.trials, s.epsilon, seed)?;
            let tuple = cfg.tuple_label();
            let mut violations = 0usize;
            let mut skipped = 0usize;
            for t in &trials {
                let case = format!("{tuple}#{}", t.index);
                match t.verdict {
                    TrialVerdict::Skipped => {
                        skipped += 1;
                        rows.push(
                            ReportRow::info(suite, "comparison_trial", ANCHOR_COMPARE, &case, t.min_sigma_ratio, f64::NAN)
                                .with_note(t.skip_reason.clone().unwrap_or_default()),
                        );
                    }
                    v => {
                        violations += usize::from(v == TrialVerdict::Violated);
                        rows.push(
                            ReportRow::condition(suite, "comparison_trial", ANCHOR_COMPARE, &case, t.total_sigma_l_diff, t.interior_diff, v == TrialVerdict::Holds)
                                .with_note(format!("c={:.16e}; min sigma ratio {:.16e}; C2 size {:.3e}", t.scale, t.min_sigma_ratio, t.c2_norm)),
                        );
                    }
                }
            }
            rows.push(
                ReportRow::condition(suite, "comparison_violations", ANCHOR_COMPARE, &tuple, violations as f64, 0.0, violations == 0)
                    .with_note(format!("{} trials, {skipped} skipped, seed {seed}", trials.len())),
            );
        }
        Ok(rows)
    }
}

/// Quadrature, jet, algebra and oracle self-consistency.
pub struct SelfTest;

impl Suite for SelfTest {
    fn name(&self) -> &'static str {
        "selftest"
    }

    fn description(&self) -> &'static str {
        "quadrature, jet and oracle self-consistency"
    }

    fn run(&self, s: &Settings) -> Result<Vec<ReportRow>> {
        let suite = self.name();
        let tol = s.tolerances.quadrature;
        let order = s.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
        let mut rows = Vec::new();
        for (n, exact) in [(3, 2.0 * PI * PI), (4, 8.0 * PI * PI / 3.0)] {
            let model = sphere_quadrature(n, 1.0, order)?;
            let vol = model.volume();
            rows.push(ReportRow::check(suite, "sphere_volume", "volume of the unit sphere", &format!("S{n}"), vol, exact, (vol - exact).abs() / exact, tol));
            let second = model.integrate(|nd| nd.point[0] * nd.point[0]);
            let want = exact / (n as f64 + 1.0);
            rows.push(ReportRow::check(suite, "sphere_second_moment", "quadrature moment", &format!("S{n}"), second, want, (second - want).abs() / want, tol));
            let quartic = model.integrate(|nd| nd.point[0].powi(2) * nd.point[1].powi(2));
            let want4 = exact / ((n as f64 + 1.0) * (n as f64 + 3.0));
            rows.push(ReportRow::check(suite, "sphere_fourth_moment", "quadrature moment", &format!("S{n}"), quartic, want4, (quartic - want4).abs() / want4, tol));
        }
        let m5 = unit_sphere_volume(5);
        rows.push(ReportRow::check(suite, "unit_sphere_volume", "volume of the unit sphere", "S5", m5, PI.powi(3), (m5 - PI.powi(3)).abs(), 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut worst = 0.0f64;
        for trial in 0..200 {
            let n = 2 + trial % 4;
            let mut e = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = rng.gen_range(-2.0..2.0);
                    e[i * n + j] = v;
                    e[j * n + i] = v;
                }
            }
            let endo = SymEndo::new(n, e)?;
            for k in 1..=n {
                let a = sigma_via_delta(&endo, k)?;
                let b = endo.sigma(k)?;
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        rows.push(ReportRow::check(suite, "sigma_dual_route", "sigma_k via generalized Kronecker delta", "200 random endomorphisms", worst, 0.0, worst, 1e-9));
        let mut all = true;
        for n in 2..=3 {
            for k in 2..=n {
                for p in 1..k {
                    all &= contraction_rule_check(p, k, n)?;
                }
            }
        }
        rows.push(ReportRow::condition(suite, "contraction_rule", "generalized Kronecker delta contraction", "n<=3", 1.0, 1.0, all));

        let sh = shape(2, 0, 6);
        let x = PolyJet::coordinate(&sh, 0).scale(0.3).add(&PolyJet::coordinate(&sh, 1).scale(-0.2));
        let round_trip = x.add_constant(1.0).ln()?.exp()?;
        let err = round_trip.max_abs_diff(&x.add_constant(1.0));
        rows.push(ReportRow::check(suite, "jet_exp_ln", "truncated jet arithmetic", "exp(ln(1+x))", err, 0.0, err, 1e-13));
        let inv = x.add_constant(2.0).recip()?.mul(&x.add_constant(2.0));
        let err = inv.max_abs_diff(&PolyJet::constant(&sh, 1.0));
        rows.push(ReportRow::check(suite, "jet_reciprocal", "truncated jet arithmetic", "(2+x)^-1 (2+x)", err, 0.0, err, 1e-13));

        for n in [3, 4] {
            let chart = crate::chartcurv::SphereChart::standard(n, 1.0);
            let g = chart.metric_jet(0, 2)?;
            let (_, sig) = crate::models::space_form_spectrum(n, 1.0);
            for k in 1..=n {
                let v = crate::chartcurv::sigma_k_at_base(&g, k)?.constant_term();
                rows.push(ReportRow::check(suite, "chart_sigma_k", "sigma_k of the round sphere", &format!("S{n},k={k}"), v, sig[k], (v - sig[k]).abs(), 1e-11));
            }
        }

        let model = sphere_model(4, 1.0, order)?;
        for (i, u) in harmonic_library(4).into_iter().enumerate() {
            let path = SphereConformalPath::new(model.clone(), u, ConformalForm::Exponential);
            let p = model.nodes[(97 * i + 13) % model.nodes.len()].point.clone();
            for k in 1..=4 {
                let (law, jet) = path.conformal_law_check(&p, 0.2, k)?;
                rows.push(ReportRow::check(suite, "conformal_schouten_law", "conformal change of the Schouten tensor", &format!("S4:{i},k={k}"), law, jet, (law - jet).abs() / jet.abs().max(1.0), 1e-10));
            }
        }

        let case = random_case(s.seed, 0, 3, Background::Flat)?;
        for v in lemma_reports(&case, s.tolerances.lemmas)? {
            if v.id.starts_with("ricci_first") || v.id.starts_with("scalar_first") {
                rows.push(ReportRow::from_variation(suite, "operator conventions on flat space", &v));
            }
        }

        let s3 = sphere_model(3, 1.0, order)?;
        let cfg = FunctionalConfig::new(3, 2, 0, 1.0, BetaVariant::NMinus2L, s3.volume())?;
        let path = SphereConformalPath::new(s3.clone(), harmonic_library(3)[0].clone(), ConformalForm::Linear);
        let f = f_value(&cfg, &path, 0.0)?.value;
        let vol = 2.0 * PI * PI;
        let want = vol.powi(4) * (0.75 * vol).powi(3);
        rows.push(ReportRow::check(suite, "functional_round_sphere", "functional on the round sphere", "S3:k=2,l=0", f, want, (f - want).abs() / want, tol));

        let base = ProductEinsteinModel::new(2, 1.0, EinsteinConvention::RicEqLambdaG)?;
        let path = ProductPath::new(base.clone(), ProductPathKind::Family);
        let pcfg = FunctionalConfig::new(4, 2, 0, path.lambda(), BetaVariant::NMinus2L, path.reference_volume())?;
        let f0 = f_value(&pcfg, &path, 0.0)?.value;
        let (ml, sig) = (path.reference_volume(), crate::models::sigma_of_product(&base, 2)?);
        let want = ml.powi(4) * (sig * ml).powi(4);
        rows.push(ReportRow::check(suite, "functional_product_baseline", "functional on the product", "S2xS2:k=2,l=0", f0, want, (f0 - want).abs() / want, 1e-12));
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_and_replaces() {
        let mut r = SuiteRegistry::with_defaults();
        assert_eq!(r.names(), vec!["verify-lemmas", "verify-functional", "counterexample", "compare-sphere", "selftest"]);
        r.register(Box::new(SelfTest));
        assert_eq!(r.names().len(), 5);
        assert!(r.get("nope").is_none());
    }

    #[test]
    fn selftest_passes() {
        let s = Settings::for_command("selftest").unwrap();
        let rows = SuiteRegistry::with_defaults().run(&s).unwrap();
        for r in &rows {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
    }

    #[test]
    fn counterexample_default_run() {
        let s = Settings::for_command("counterexample").unwrap();
        let rows = SuiteRegistry::with_defaults().run(&s).unwrap();
        assert!(rows.iter().all(|r| r.verdict != Verdict::Fail), "{:?}", rows.iter().find(|r| r.verdict == Verdict::Fail));
        assert_eq!(rows.iter().filter(|r| r.id == "stability_witness").count(), 10);
        assert!(rows.iter().any(|r| r.verdict == Verdict::Finding));
    }
}
