//! Randomized pointwise cases for the variational formulas, each compared
//! against exact t-derivatives from metric jets.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chartcurv::{ChartMetricJet, SphereChart};
use crate::error::Result;
use crate::jet::{JetShape, PolyJet};
use crate::varform::{
    dg_inverse_oracle, dg_inverse_variations, dric_first, dric_second, dric_second_reference, dscal_first,
    dscal_second, dscal_second_terms, dsigma_k_first_einstein, dsigma_k_second_einstein, dsigma_k_second_terms,
    dvol_density, dvol_density_oracle, fit_coefficient, JetOracle, PerturbationFields, RiemannConvention,
    VariationReport,
};

/// Background of a randomized case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Background {
    /// Unit round sphere chart at a random point.
    Sphere,
    Flat,
}

pub struct LemmaCase {
    pub label: String,
    pub background: Background,
    pub fields: PerturbationFields,
    pub oracle: JetOracle,
    /// Chart metric and `h` at the base point.
    pub g_base: Vec<f64>,
    pub h_base: Vec<f64>,
}

/// Symmetric `h` with random coefficients on monomials of degree ≤ 2.
pub fn random_quadratic_h(rng: &mut ChaCha8Rng, sh: &Arc<JetShape>, n: usize) -> Vec<PolyJet> {
    let mut out = vec![PolyJet::zero(sh); n * n];
    for i in 0..n {
        for j in i..n {
            let mut c = PolyJet::zero(sh);
            for m in 0..sh.monomial_count() {
                let mono = sh.monomial(m).to_vec();
                if mono.iter().map(|&e| e as usize).sum::<usize>() <= 2 {
                    c.set_coeff(0, &mono, rng.gen_range(-0.5..0.5)).expect("valid monomial");
                }
            }
            out[i * n + j] = c.clone();
            out[j * n + i] = c;
        }
    }
    out
}

/// Re-embeds t-free jets into a shape with a larger t-degree.
pub fn lift_to(h: &[PolyJet], target: &Arc<JetShape>) -> Vec<PolyJet> {
    h.iter()
        .map(|c| {
            let mut out = PolyJet::zero(target);
            for m in 0..c.shape().monomial_count() {
                let mono = c.shape().monomial(m).to_vec();
                out.set_coeff(0, &mono, c.coeff(0, &mono)).expect("same monomials");
            }
            out
        })
        .collect()
}

/// Case number `index` of a stream determined by `seed`.
pub fn random_case(seed: u64, index: usize, n: usize, background: Background) -> Result<LemmaCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (g0, g2, label) = match background {
        Background::Sphere => {
            let mut chart = SphereChart::standard(n, 1.0);
            for a in chart.base_angles.iter_mut() {
                *a = rng.gen_range(0.8..2.3);
            }
            (chart.metric_jet(0, 2)?, chart.metric_jet(2, 2)?, format!("S{n}#{index}"))
        }
        Background::Flat => (ChartMetricJet::flat(n, 0, 2), ChartMetricJet::flat(n, 2, 2), format!("R{n}#{index}")),
    };
    let h0 = random_quadratic_h(&mut rng, g0.jet_shape(), n);
    let h2 = lift_to(&h0, g2.jet_shape());
    Ok(LemmaCase {
        label,
        background,
        fields: PerturbationFields::from_chart(&g0, &h0)?,
        oracle: JetOracle::along_path(&g2, &h2)?,
        g_base: g0.components().iter().map(PolyJet::constant_term).collect(),
        h_base: h0.iter().map(PolyJet::constant_term).collect(),
    })
}

pub const RICCI_SECOND_ID: &str = "ricci_second";
/// Same display read with the other curvature sign convention; kept as a diagnostic.
pub const RICCI_SECOND_FIRST_PAIR_ID: &str = "ricci_second_first_pair";

fn terms(list: &[(&'static str, f64)]) -> Vec<(String, f64)> {
    list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Every formula comparison available for the case, at relative tolerance `tol`
/// (floor 1). Failing rows carry the fitted factor `c` with `c·formula ≈ oracle`.
pub fn lemma_reports(case: &LemmaCase, tol: f64) -> Result<Vec<VariationReport>> {
    let n = case.fields.n;
    let f = &case.fields;
    let o = &case.oracle;
    let label = case.label.as_str();
    let mut out = Vec::new();

    let (i1, i2) = dg_inverse_variations(&case.g_base, &case.h_base, n)?;
    let (oi1, oi2) = dg_inverse_oracle(&case.g_base, &case.h_base, n)?;
    out.push(VariationReport::compare_tensor("inverse_metric_first", label, &i1, &oi1, tol, 1.0));
    out.push(VariationReport::compare_tensor("inverse_metric_second", label, &i2, &oi2, tol, 1.0));

    let (v1, v2) = dvol_density(&f.h, n);
    let (ov1, ov2) = dvol_density_oracle(&f.h, n)?;
    out.push(VariationReport::compare("volume_density_first", label, v1, ov1, tol, 1.0));
    out.push(VariationReport::compare("volume_density_second", label, v2, ov2, tol, 1.0));

    out.push(VariationReport::compare_tensor("ricci_first", label, &dric_first(f), &o.ricci(1), tol, 1.0));
    let ric2 = o.ricci(2);
    for (id, conv) in [
        (RICCI_SECOND_ID, RiemannConvention::Crossed),
        (RICCI_SECOND_FIRST_PAIR_ID, RiemannConvention::FirstPair),
    ] {
        let formula = dric_second(f, conv);
        let mut r = VariationReport::compare_tensor(id, label, &formula, &ric2, tol, 1.0);
        if !r.pass {
            r.fitted_coefficient = fit_coefficient(&formula, &ric2);
        }
        out.push(r);
    }
    out.push(VariationReport::compare_tensor(
        "ricci_second_reference",
        label,
        &dric_second_reference(f),
        &ric2,
        tol,
        1.0,
    ));

    out.push(VariationReport::compare("scalar_first", label, dscal_first(f), o.scalar(1), tol, 1.0));
    let s2 = dscal_second(f);
    let mut r = VariationReport::compare("scalar_second", label, s2, o.scalar(2), tol, 1.0);
    r.terms = terms(&dscal_second_terms(f));
    if !r.pass {
        r.fitted_coefficient = fit_coefficient(&[s2], &[o.scalar(2)]);
    }
    out.push(r);

    if case.background == Background::Sphere {
        for k in 1..=n {
            let (_, d1, d2) = o.sigma(k)?;
            let first = dsigma_k_first_einstein(f, k)?;
            out.push(VariationReport::compare(&format!("sigma_first[k={k}]"), label, first, d1, tol, 1.0));
            let second = dsigma_k_second_einstein(f, k, RiemannConvention::Crossed)?;
            let mut r = VariationReport::compare(&format!("sigma_second[k={k}]"), label, second, d2, tol, 1.0);
            r.terms = terms(&dsigma_k_second_terms(f, k, RiemannConvention::Crossed)?);
            if !r.pass {
                r.fitted_coefficient = fit_coefficient(&[second], &[d2]);
            }
            out.push(r);
        }
        let k1 = dsigma_k_first_einstein(f, 1)?;
        let nf = n as f64;
        out.push(VariationReport::compare(
            "sigma_first_k1_vs_scalar",
            label,
            k1,
            (nf - 2.0) / (2.0 * (nf - 1.0)) * f.gamma(),
            1e-12,
            1.0,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_and_flat_cases_pass() {
        for (i, bg) in [(0, Background::Sphere), (1, Background::Flat), (2, Background::Sphere)] {
            let case = random_case(7, i, 3 + i % 2, bg).unwrap();
            for r in lemma_reports(&case, 1e-8).unwrap() {
                if r.id == RICCI_SECOND_FIRST_PAIR_ID && bg == Background::Sphere {
                    assert!(!r.pass && r.fitted_coefficient.is_some());
                } else {
                    assert!(r.pass, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn cases_are_reproducible() {
        let a = random_case(3, 5, 4, Background::Sphere).unwrap();
        let b = random_case(3, 5, 4, Background::Sphere).unwrap();
        assert_eq!(a.h_base, b.h_base);
        assert_eq!(a.fields.ddh, b.fields.ddh);
    }
}
