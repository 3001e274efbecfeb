//! End-to-end reproductions: the product-family counterexample scan, its
//! expansion audit, the instability certificate, and randomized comparison
//! trials on the round sphere.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::functional::{ConformalForm, FunctionalConfig, MetricPath, ProductPath, ProductPathKind, SphereConformalPath};
use crate::jet::{shape, PolyJet};
use crate::models::{
    product_volume_ratio, sigma_of_product, EinsteinConvention, HarmonicKind, HarmonicPerturbation,
    ProductEinsteinModel, SphereModel,
};
use crate::symalg::binomial;

pub const DEFAULT_SEED: u64 = 0x5EEDED;
pub const DEFAULT_T_GRID: [f64; 10] = [-0.2, -0.1, -0.05, -0.02, -0.01, 0.01, 0.02, 0.05, 0.1, 0.2];
pub const AUDIT_GRID: [f64; 7] = [-0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02];
pub const COMPARISON_TUPLES: [(usize, usize, usize); 6] = [(3, 2, 0), (3, 2, 1), (3, 3, 1), (4, 2, 0), (4, 2, 1), (4, 3, 1)];

/// Runs `f` on a rayon pool capped by `SIGMALAB_THREADS` when that is set.
pub fn with_worker_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("SIGMALAB_THREADS") {
        Ok(v) => {
            let threads: usize = v
                .trim()
                .parse()
                .map_err(|_| LabError::Config(format!("SIGMALAB_THREADS must be a positive integer, got `{v}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| LabError::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub t: f64,
    pub k: usize,
    pub l: usize,
    /// `σ_k(g_t)/σ_k(ḡ)`
    pub sigma_k_ratio: f64,
    /// `∫σ_l(g_t)dv_{g_t} / ∫σ_l(ḡ)dv_ḡ`
    pub total_sigma_l_ratio: f64,
    pub volume_ratio: f64,
    /// `σ_k(g_t) ≥ σ_k(ḡ)`
    pub constraint_holds: bool,
    /// Constraint holds and the total σ_l exceeds its reference value, where
    /// the stable case would force `≤` (`l < n/2`).
    pub comparison_violated: bool,
}

/// Product family `(1/(1+t)) g_1 + (1/(1−t+t²/n)) g_2` over `S^m × S^m` with
/// `Ric_{g_i} = λ g_i`, using exact homogeneous values.
pub fn counterexample_scan(
    lambda: f64,
    m: usize,
    t_grid: &[f64],
    k_range: &[usize],
    l_range: &[usize],
) -> Result<Vec<CounterexampleRow>> {
    let base = ProductEinsteinModel::new(m, lambda, EinsteinConvention::RicEqLambdaG)?;
    let n = base.dim();
    let mut rows = Vec::new();
    for &t in t_grid {
        let g = base.along_family(t)?;
        let (_, volume_ratio) = product_volume_ratio(&base, t)?;
        for &k in k_range {
            if k == 0 || k > n {
                return Err(LabError::Domain(format!("k = {k} outside 1..={n}")));
            }
            let sigma_k_ratio = if t == 0.0 {
                1.0
            } else {
                sigma_of_product(&g, k)? / sigma_of_product(&base, k)?
            };
            for &l in l_range {
                if l >= k {
                    continue;
                }
                let total_sigma_l_ratio = if t == 0.0 {
                    1.0
                } else {
                    sigma_of_product(&g, l)? * volume_ratio / sigma_of_product(&base, l)?
                };
                let constraint_holds = sigma_k_ratio >= 1.0;
                rows.push(CounterexampleRow {
                    t,
                    k,
                    l,
                    sigma_k_ratio,
                    total_sigma_l_ratio,
                    volume_ratio,
                    constraint_holds,
                    comparison_violated: constraint_holds && 2 * l < n && total_sigma_l_ratio > 1.0,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionAudit {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    /// t² coefficient of `σ_k(g_t)/σ_k(ḡ)` from a jet expansion (exact up to rounding).
    pub exact_coefficient: f64,
    /// Same coefficient from a least-squares fit over [`AUDIT_GRID`].
    pub fitted_coefficient: f64,
    pub fit_residual: f64,
    pub fit_degree: usize,
    /// Bracket of the published expansion, evaluated as printed.
    pub printed_bracket: f64,
    pub agrees: bool,
}

/// Published bracket `(k²/4 + k + 3k(n−k)/(4(n−1))) ((n−2)/(2(n−1)))^{−2} + k/(2n)`.
pub fn printed_expansion_bracket(n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    (kf * kf / 4.0 + kf + 3.0 * kf * (nf - kf) / (4.0 * (nf - 1.0))) * ((nf - 2.0) / (2.0 * (nf - 1.0))).powi(-2)
        + kf / (2.0 * nf)
}

/// Least squares by Householder QR; returns coefficients and the max residual.
fn lstsq(design: &[Vec<f64>], rhs: &[f64]) -> (Vec<f64>, f64) {
    let rows = design.len();
    let cols = design[0].len();
    let mut a: Vec<Vec<f64>> = design.to_vec();
    let mut b = rhs.to_vec();
    for j in 0..cols {
        let norm: f64 = (j..rows).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (0..rows).map(|i| if i < j { 0.0 } else { a[i][j] }).collect();
        v[j] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for c in j..cols {
            let d: f64 = (j..rows).map(|i| v[i] * a[i][c]).sum::<f64>() * 2.0 / vv;
            for i in j..rows {
                a[i][c] -= d * v[i];
            }
        }
        let d: f64 = (j..rows).map(|i| v[i] * b[i]).sum::<f64>() * 2.0 / vv;
        for i in j..rows {
            b[i] -= d * v[i];
        }
    }
    let mut x = vec![0.0; cols];
    for j in (0..cols).rev() {
        let s: f64 = (j + 1..cols).map(|c| a[j][c] * x[c]).sum();
        x[j] = (b[j] - s) / a[j][j];
    }
    let resid = design
        .iter()
        .zip(rhs)
        .map(|(row, y)| (row.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - y).abs())
        .fold(0.0, f64::max);
    (x, resid)
}

/// t² coefficient of the σ_k ratio along the product family, checked against
/// the published bracket.
pub fn expansion_coefficient_audit(lambda: f64, m: usize, k: usize) -> Result<ExpansionAudit> {
    let base = ProductEinsteinModel::new(m, lambda, EinsteinConvention::RicEqLambdaG)?;
    let n = base.dim();
    if k == 0 || k > n {
        return Err(LabError::Domain(format!("k = {k} outside 1..={n}")));
    }
    let nf = n as f64;
    // Ricci eigenvalues on the factors are λ(1+t) and λ(1 − t + t²/n): polynomial in t.
    let sh = shape(0, 2, 0);
    let ra = PolyJet::from_t_coeffs(&[lambda, lambda, 0.0]);
    let rb = PolyJet::from_t_coeffs(&[lambda, -lambda, lambda / nf]);
    let mf = m as f64;
    let shift = ra.add(&rb).scale(mf / (2.0 * (nf - 1.0)));
    let mu_a = ra.sub(&shift);
    let mu_b = rb.sub(&shift);
    let mut sigma = PolyJet::zero(&sh);
    for j in 0..=k.min(m) {
        if k - j > m {
            continue;
        }
        let mut term = PolyJet::constant(&sh, binomial(m, j) * binomial(m, k - j));
        for _ in 0..j {
            term = term.mul(&mu_a);
        }
        for _ in 0..k - j {
            term = term.mul(&mu_b);
        }
        sigma = sigma.add(&term);
    }
    let t_coeffs = sigma.t_coeffs();
    let exact_coefficient = t_coeffs[2] / t_coeffs[0];

    let reference = sigma_of_product(&base, k)?;
    let scale = AUDIT_GRID.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let fit_degree = 4;
    let mut design = Vec::new();
    let mut ys = Vec::new();
    for &t in &AUDIT_GRID {
        let s = t / scale;
        design.push((0..=fit_degree).map(|p| s.powi(p as i32)).collect::<Vec<_>>());
        ys.push(sigma_of_product(&base.along_family(t)?, k)? / reference);
    }
    let (coef, fit_residual) = lstsq(&design, &ys);
    if fit_residual > 1e-8 {
        return Err(LabError::Grid(format!(
            "degree-{fit_degree} fit of the σ_{k} ratio leaves residual {fit_residual:e}"
        )));
    }
    let fitted_coefficient = coef[2] / (scale * scale);
    let printed_bracket = printed_expansion_bracket(n, k);
    Ok(ExpansionAudit {
        n,
        k,
        lambda,
        exact_coefficient,
        fitted_coefficient,
        fit_residual,
        fit_degree,
        printed_bracket,
        agrees: (printed_bracket - exact_coefficient).abs() <= 1e-8 * exact_coefficient.abs().max(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstabilityCertificate {
    pub factor_dim: usize,
    pub lambda: f64,
    /// Eigenvalue of `Δ_E` on the trace-free parallel tensor, closed form.
    pub eigenvalue: f64,
    /// Same eigenvalue from assembling the Riemann tensor and contracting.
    pub brute_force: f64,
    pub unstable: bool,
}

/// `Δ_E` on `h = a g_1 ⊕ b g_2` over `S^m × S^m` with `Ric_{g_i} = λ g_i`.
/// `h` must be trace-free.
pub fn instability_certificate_for(lambda: f64, m: usize, coeffs: (f64, f64)) -> Result<InstabilityCertificate> {
    let model = ProductEinsteinModel::new(m, lambda, EinsteinConvention::RicEqLambdaG)?;
    let (a, b) = coeffs;
    if (a + b).abs() > 1e-14 * (a.abs() + b.abs()) || (a == 0.0 && b == 0.0) {
        return Err(LabError::Precondition(format!(
            "h = {a} g_1 + {b} g_2 is not a non-zero trace-free tensor"
        )));
    }
    let kappa = model.factor_kappa();
    let mf = m as f64;
    // per factor (Rm h)_ij = κ((tr h) g_ij − h_ij) = κ(m−1)·h_ij
    let eigenvalue = 2.0 * kappa * (mf - 1.0);
    let n = 2 * m;
    let h: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if i != j {
                0.0
            } else if i < m {
                a
            } else {
                b
            }
        })
        .collect();
    let path = ProductPath::new(model.clone(), ProductPathKind::Family);
    let base = path.tangent_fields();
    let fields = crate::varform::PerturbationFields::parallel(n, base.riem, base.ric, base.scal, h.clone());
    let de = fields.einstein_operator();
    let num: f64 = de.iter().zip(&h).map(|(x, y)| x * y).sum();
    let den: f64 = h.iter().map(|x| x * x).sum();
    let brute_force = num / den;
    let off: f64 = de.iter().zip(&h).map(|(x, y)| (x - brute_force * y).abs()).fold(0.0, f64::max);
    if off > 1e-12 * brute_force.abs().max(1.0) {
        return Err(LabError::InternalConsistency("trace-free tensor is not an eigentensor of Δ_E".into()));
    }
    Ok(InstabilityCertificate {
        factor_dim: m,
        lambda,
        eigenvalue,
        brute_force,
        unstable: eigenvalue > 0.0,
    })
}

pub fn instability_certificate(lambda: f64, m: usize) -> Result<InstabilityCertificate> {
    instability_certificate_for(lambda, m, (-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTrial {
    pub index: usize,
    pub perturbation: String,
    /// C² size proxy of φ at the quadrature nodes.
    pub c2_norm: f64,
    pub scale: f64,
    /// `min_p σ_k(c²g)/σ_k(ḡ)` after scaling.
    pub min_sigma_ratio: f64,
    /// `∫σ_l(c²g)dv − ∫σ_l(ḡ)dv̄`
    pub total_sigma_l_diff: f64,
    /// Same difference with `c/1.001` (constraint strictly satisfied).
    pub interior_diff: f64,
    pub verdict: TrialVerdict,
    pub skip_reason: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TrialVerdict {
    Holds,
    Violated,
    Skipped,
}

impl TrialVerdict {
    pub fn label(self) -> &'static str {
        match self {
            TrialVerdict::Holds => "holds",
            TrialVerdict::Violated => "violated",
            TrialVerdict::Skipped => "skipped",
        }
    }
}

fn random_phi(rng: &mut ChaCha8Rng, n: usize) -> HarmonicPerturbation {
    let d = n + 1;
    let linear: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut quadratic = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v = rng.gen_range(-1.0..1.0);
            quadratic[i * d + j] = v;
            quadratic[j * d + i] = v;
        }
    }
    let tr: f64 = (0..d).map(|i| quadratic[i * d + i]).sum::<f64>() / d as f64;
    for i in 0..d {
        quadratic[i * d + i] -= tr;
    }
    let mut p = HarmonicPerturbation::general(0.0, linear, quadratic);
    p.kind = HarmonicKind::GeneralConformal;
    p
}

fn c2_proxy(model: &SphereModel, u: &HarmonicPerturbation) -> f64 {
    model
        .nodes
        .iter()
        .map(|nd| {
            let f = u.field_at(nd, model.radius);
            let g = f.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = f.hess.iter().map(|v| v * v).sum::<f64>().sqrt();
            f.value.abs() + g + h
        })
        .fold(0.0, f64::max)
}

/// Pointwise minimum of σ_k along `path` at `t = 1`, refined from the best
/// quadrature nodes by a shrinking search over the sphere.
fn refined_min_sigma(path: &SphereConformalPath, k: usize) -> Result<f64> {
    let model = &path.model;
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::with_capacity(model.nodes.len());
    for nd in &model.nodes {
        seeds.push((path.sigma_at_point(&nd.point, 1.0, k)?, nd.point.clone()));
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = seeds[0].0;
    for (mut val, mut p) in seeds.into_iter().take(4) {
        let mut step = 0.2;
        while step > 1e-7 {
            let frame = crate::models::tangent_frame(&p);
            let mut improved = false;
            for e in &frame {
                for sgn in [-1.0, 1.0] {
                    let q: Vec<f64> = p.iter().zip(e).map(|(x, y)| x + sgn * step * y).collect();
                    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let q: Vec<f64> = q.iter().map(|x| x / norm * model.radius).collect();
                    let v = path.sigma_at_point(&q, 1.0, k)?;
                    if v < val {
                        val = v;
                        p = q;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(val);
    }
    Ok(best)
}

fn run_trial(
    cfg: &FunctionalConfig,
    model: &Arc<SphereModel>,
    index: usize,
    seed: u64,
    epsilon: f64,
) -> Result<ComparisonTrial> {
    let (n, k, l) = (cfg.n, cfg.k, cfg.l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let raw = random_phi(&mut rng, n);
    let size = c2_proxy(model, &raw);
    let target = if index == 0 { 0.0 } else { epsilon * rng.gen_range(0.05..1.0) };
    let phi = raw.scaled(if size > 0.0 { target / size } else { 0.0 });
    let c2_norm = c2_proxy(model, &phi);
    let path = SphereConformalPath::new(model.clone(), phi, ConformalForm::Exponential);
    let sigma_ref = crate::models::space_form_spectrum(n, model.lambda).1[k];
    let (ref_l, _) = path.integrals(0.0, k, l)?;
    let min_sigma = refined_min_sigma(&path, k)?;
    let description = format!("exp(2φ)ḡ, φ = random degree-1/2 harmonic mix (trial {index})");
    if !(min_sigma > 0.0) {
        return Ok(ComparisonTrial {
            index,
            perturbation: description,
            c2_norm,
            scale: f64::NAN,
            min_sigma_ratio: min_sigma / sigma_ref,
            total_sigma_l_diff: f64::NAN,
            interior_diff: f64::NAN,
            verdict: TrialVerdict::Skipped,
            skip_reason: Some(format!("σ_{k} reaches {min_sigma:e} ≤ 0")),
        });
    }
    let c = (min_sigma / sigma_ref).powf(1.0 / (2.0 * k as f64));
    let (sl, _) = path.integrals(1.0, k, l)?;
    let total = |c: f64| c.powi(n as i32 - 2 * l as i32) * sl - ref_l;
    let scaled_min = c.powi(-2 * k as i32) * min_sigma / sigma_ref;
    let total_sigma_l_diff = total(c);
    let interior_diff = total(c / 1.001);
    let tol = 1e-9 * ref_l.abs();
    let violated = total_sigma_l_diff > tol || interior_diff > tol || scaled_min < 1.0 - 1e-9;
    Ok(ComparisonTrial {
        index,
        perturbation: description,
        c2_norm,
        scale: c,
        min_sigma_ratio: scaled_min,
        total_sigma_l_diff,
        interior_diff,
        verdict: if violated { TrialVerdict::Violated } else { TrialVerdict::Holds },
        skip_reason: None,
    })
}

/// Randomized comparison trials on the round sphere with `λ > 0`, `l < n/2`.
/// Trial 0 is the unperturbed metric.
pub fn sphere_comparison_experiment(
    cfg: &FunctionalConfig,
    model: Arc<SphereModel>,
    trials: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<ComparisonTrial>> {
    if !(cfg.lambda > 0.0) || 2 * cfg.l >= cfg.n {
        return Err(LabError::Domain("comparison trials need λ > 0 and l < n/2".into()));
    }
    if model.dim != cfg.n {
        return Err(LabError::Config("sphere model dimension does not match n".into()));
    }
    if !(epsilon > 0.0) {
        return Err(LabError::Domain("epsilon must be positive".into()));
    }
    with_worker_pool(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &model, i, seed, epsilon))
            .collect::<Result<Vec<_>>>()
    })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::BetaVariant;
    use crate::models::sphere_quadrature;

    #[test]
    fn scan_rows_at_zero_and_witness() {
        let rows = counterexample_scan(1.0, 2, &[0.0, 0.1, -0.1], &[1, 2], &[0, 1]).unwrap();
        for r in rows.iter().filter(|r| r.t == 0.0) {
            assert_eq!((r.sigma_k_ratio, r.total_sigma_l_ratio), (1.0, 1.0));
        }
        let w = rows.iter().find(|r| r.t == 0.1 && r.k == 1 && r.l == 0).unwrap();
        assert!((w.sigma_k_ratio - 1.00125).abs() < 1e-14);
        assert!((w.volume_ratio - 1.0073).abs() < 1e-4);
        assert!(w.comparison_violated);
    }

    #[test]
    fn audit_values() {
        let a = expansion_coefficient_audit(1.0, 2, 1).unwrap();
        assert!((a.exact_coefficient - 0.125).abs() < 1e-12);
        assert!((a.fitted_coefficient - 0.125).abs() < 1e-10);
        assert!((a.printed_bracket - 18.125).abs() < 1e-12);
        assert!(!a.agrees);
        let b = expansion_coefficient_audit(1.0, 2, 2).unwrap();
        assert!((b.exact_coefficient + 2.75).abs() < 1e-12);
        assert!((b.fitted_coefficient + 2.75).abs() < 1e-8);
        for k in 3..=4 {
            let c = expansion_coefficient_audit(1.0, 2, k).unwrap();
            assert!((c.exact_coefficient - c.fitted_coefficient).abs() < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn certificate_values() {
        for (m, lambda) in [(2, 1.0), (3, 2.0), (4, 0.5)] {
            let c = instability_certificate(lambda, m).unwrap();
            assert!((c.eigenvalue - 2.0 * lambda).abs() < 1e-12);
            assert!((c.brute_force - 2.0 * lambda).abs() < 1e-12);
            assert!(c.unstable);
        }
        assert!(matches!(instability_certificate(1.0, 1), Err(LabError::Domain(_))));
        assert!(matches!(instability_certificate_for(1.0, 2, (1.0, 1.0)), Err(LabError::Precondition(_))));
    }

    #[test]
    fn comparison_small_run_is_deterministic() {
        let model = Arc::new(sphere_quadrature(3, 1.0, 8).unwrap());
        let cfg = FunctionalConfig::new(3, 2, 1, 1.0, BetaVariant::NMinus2L, model.volume()).unwrap();
        let a = sphere_comparison_experiment(&cfg, model.clone(), 6, 1e-2, DEFAULT_SEED).unwrap();
        let b = sphere_comparison_experiment(&cfg, model, 6, 1e-2, DEFAULT_SEED).unwrap();
        assert_eq!(a, b);
        assert!((a[0].scale - 1.0).abs() < 1e-12 && a[0].total_sigma_l_diff.abs() < 1e-9);
        assert!(a.iter().all(|t| t.verdict == TrialVerdict::Holds), "{a:?}");
    }
}
