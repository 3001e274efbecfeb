//! The scale-invariant comparison functional
//! `F(g) = (∫σ_l(g) dv_g)^{2k} (∫σ_k(g) dv_ḡ)^{n−2l}`, its variations at an
//! Einstein reference metric, and the sign analysis of the second variation.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::models::{
    product_schouten_spectrum, sigma_of_product, HarmonicPerturbation, ProductEinsteinModel, SphereModel,
};
use crate::symalg::{binomial, elem_sym_of_matrix};
use crate::varform::{
    dsigma_k_first_einstein, dsigma_k_second_einstein, schouten_variations, PerturbationFields, RiemannConvention,
    VariationReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BetaVariant {
    /// `(n−2)(n−2l)(n+2k−2l)/(2n²)`
    NMinus2L,
    /// `(n−2)(2n−l)(n+2k−2l)/(2n²)`
    TwoNMinusL,
}

impl BetaVariant {
    pub fn label(self) -> &'static str {
        match self {
            BetaVariant::NMinus2L => "n-2l",
            BetaVariant::TwoNMinusL => "2n-l",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n-2l" => Ok(BetaVariant::NMinus2L),
            "2n-l" => Ok(BetaVariant::TwoNMinusL),
            other => Err(LabError::Config(format!("unknown beta variant `{other}` (expected n-2l or 2n-l)"))),
        }
    }
}

/// Exponents and reference data of one functional.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalConfig {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    /// Einstein constant with `Ric = (n−1)λ ḡ`.
    pub lambda: f64,
    pub beta_variant: BetaVariant,
    /// `Vol(ḡ)`.
    pub volume: f64,
}

impl FunctionalConfig {
    pub fn new(n: usize, k: usize, l: usize, lambda: f64, beta_variant: BetaVariant, volume: f64) -> Result<Self> {
        if n < 3 {
            return Err(LabError::Domain(format!("n must be >= 3 (got {n})")));
        }
        if l >= k {
            return Err(LabError::Domain(format!("need l < k (got k = {k}, l = {l})")));
        }
        if k > n {
            return Err(LabError::Domain(format!("k = {k} exceeds n = {n}")));
        }
        if 2 * l == n {
            return Err(LabError::Domain(
                "l = n/2 makes the functional independent of σ_k; not supported".into(),
            ));
        }
        if k == 1 && l != 0 {
            return Err(LabError::Domain("k = 1 requires l = 0".into()));
        }
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(LabError::Domain("λ must be finite and non-zero".into()));
        }
        if !(volume > 0.0) {
            return Err(LabError::Domain("reference volume must be positive".into()));
        }
        Ok(Self {
            n,
            k,
            l,
            lambda,
            beta_variant,
            volume,
        })
    }

    pub fn tuple_label(&self) -> String {
        format!("n={},k={},l={}", self.n, self.k, self.l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficients {
    /// Absent for `k = 1`, where the I-term uses the dedicated display.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub mu: Option<f64>,
    pub a_coeff: f64,
}

pub fn coefficients(cfg: &FunctionalConfig) -> Result<Coefficients> {
    let (n, k, l) = (cfg.n as f64, cfg.k as f64, cfg.l as f64);
    let beta_factor = match cfg.beta_variant {
        BetaVariant::NMinus2L => n - 2.0 * l,
        BetaVariant::TwoNMinusL => 2.0 * n - l,
    };
    let beta = (n - 2.0) * beta_factor * (n + 2.0 * k - 2.0 * l) / (2.0 * n * n);
    let (alpha, mu) = if cfg.k >= 2 {
        let x = n - 2.0 * l * (k - l) / (k - 1.0);
        (
            Some(x / ((n - 1.0) * (n - 2.0))),
            Some(n * (n - 2.0).powi(2) / (2.0 * x)),
        )
    } else {
        (None, None)
    };
    let nk = cfg.n * cfg.k;
    let a_coeff = -0.5
        * ((n - 2.0) / 2.0).powi(nk as i32 - 1)
        * binomial(cfg.n - 1, cfg.k - 1)
        * binomial(cfg.n, cfg.k).powi(cfg.n as i32 - 2 * cfg.l as i32 - 1)
        * binomial(cfg.n, cfg.l).powi(2 * cfg.k as i32)
        * cfg.volume.powi(cfg.n as i32 + 2 * cfg.k as i32 - 2 * cfg.l as i32 - 1);
    Ok(Coefficients {
        alpha,
        beta,
        mu,
        a_coeff,
    })
}

/// Integrated data of a perturbation direction `h = h̊ + (tr h/n) ḡ` at the
/// reference metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionData {
    /// `∫|d tr h|²`
    pub grad_tr2: f64,
    /// `∫(tr h − mean)²`
    pub tr_dev2: f64,
    /// `∫ tr h`
    pub tr_integral: f64,
    /// Eigenvalue of `Δ_E` on `h̊` and `∫|h̊|²`, when `h̊ ≠ 0`.
    pub tt: Option<(f64, f64)>,
    /// `∫|h|²`
    pub h_norm2: f64,
}

/// A one-parameter family of metrics through the reference metric.
pub trait MetricPath: Send + Sync {
    fn label(&self) -> String;
    fn dim(&self) -> usize;
    /// Einstein constant of the reference metric (`Ric = (n−1)λ ḡ`).
    fn lambda(&self) -> f64;
    fn reference_volume(&self) -> f64;
    /// `(∫σ_l(g_t) dv_{g_t}, ∫σ_k(g_t) dv_ḡ)`
    fn integrals(&self, t: f64, k: usize, l: usize) -> Result<(f64, f64)>;
    /// Tangent direction at `t = 0`.
    fn direction(&self) -> Result<DirectionData>;
    /// `∫ Dσ_k(ḡ)·h dv_ḡ` from the closed-form first variation.
    fn integrated_dsigma(&self, k: usize) -> Result<f64>;
    /// Minimum of `σ_k(g_t)` over the manifold (at available sample points).
    fn min_sigma(&self, t: f64, k: usize) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConformalForm {
    /// `(1 + t u) ḡ`, tangent `u ḡ`
    Linear,
    /// `e^{2 t u} ḡ`, tangent `2u ḡ`
    Exponential,
}

/// Conformal path `c² · (form) ḡ` on the round sphere.
#[derive(Clone, Debug)]
pub struct SphereConformalPath {
    pub model: Arc<SphereModel>,
    pub u: HarmonicPerturbation,
    pub form: ConformalForm,
    /// Constant factor `c` of the metric `c² g_t`.
    pub scale: f64,
}

/// Conformal factor data of `e^{2φ}ḡ` at a node in the node frame.
struct PhiJet {
    phi: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl SphereConformalPath {
    pub fn new(model: Arc<SphereModel>, u: HarmonicPerturbation, form: ConformalForm) -> Self {
        Self {
            model,
            u,
            form,
            scale: 1.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale = c;
        out
    }

    fn tangent_factor(&self) -> f64 {
        match self.form {
            ConformalForm::Linear => 1.0,
            ConformalForm::Exponential => 2.0,
        }
    }

    fn phi_at(&self, node: &crate::models::SphereNode, t: f64) -> Result<PhiJet> {
        let f = self.u.field_at(node, self.model.radius);
        let n = self.model.dim;
        let shift = self.scale.ln();
        Ok(match self.form {
            ConformalForm::Exponential => PhiJet {
                phi: t * f.value + shift,
                grad: f.grad.iter().map(|g| t * g).collect(),
                hess: f.hess.iter().map(|h| t * h).collect(),
            },
            ConformalForm::Linear => {
                let w = 1.0 + t * f.value;
                if w <= 0.0 {
                    return Err(LabError::Domain(format!("1 + t·u = {w} is not positive")));
                }
                let mut hess = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..n {
                        hess[a * n + b] =
                            t * f.hess[a * n + b] / (2.0 * w) - t * t * f.grad[a] * f.grad[b] / (2.0 * w * w);
                    }
                }
                PhiJet {
                    phi: 0.5 * w.ln() + shift,
                    grad: f.grad.iter().map(|g| t * g / (2.0 * w)).collect(),
                    hess,
                }
            }
        })
    }

    /// σ_0..σ_n of `e^{2φ}ḡ` at a node (eigenvalues taken against that metric).
    fn sigmas_at(&self, node: &crate::models::SphereNode, t: f64) -> Result<(f64, Vec<f64>)> {
        let n = self.model.dim;
        let nf = n as f64;
        let p = self.phi_at(node, t)?;
        let grad2: f64 = p.grad.iter().map(|g| g * g).sum();
        let base = (nf - 2.0) * self.model.lambda / 2.0;
        let mut s = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let g = if a == b { 1.0 } else { 0.0 };
                s[a * n + b] = base * g
                    - (nf - 2.0) * (p.hess[a * n + b] - p.grad[a] * p.grad[b] + 0.5 * grad2 * g);
            }
        }
        let sig = elem_sym_of_matrix(&s, n);
        Ok((p.phi, sig))
    }
}

impl MetricPath for SphereConformalPath {
    fn label(&self) -> String {
        let form = match self.form {
            ConformalForm::Linear => "linear",
            ConformalForm::Exponential => "exp",
        };
        format!("sphere-S{}:{}:{}", self.model.dim, form, self.u.kind.label())
    }

    fn dim(&self) -> usize {
        self.model.dim
    }

    fn lambda(&self) -> f64 {
        self.model.lambda
    }

    fn reference_volume(&self) -> f64 {
        self.model.volume()
    }

    fn integrals(&self, t: f64, k: usize, l: usize) -> Result<(f64, f64)> {
        let n = self.model.dim as f64;
        let mut sl = 0.0;
        let mut sk = 0.0;
        for node in &self.model.nodes {
            let (phi, sig) = self.sigmas_at(node, t)?;
            sl += node.weight * (phi * (n - 2.0 * l as f64)).exp() * sig[l];
            sk += node.weight * (-2.0 * k as f64 * phi).exp() * sig[k];
        }
        Ok((sl, sk))
    }

    fn direction(&self) -> Result<DirectionData> {
        let n = self.model.dim as f64;
        let c = self.tangent_factor() * n;
        let radius = self.model.radius;
        let sums = self.model.integrate_many(4, |nd| {
            let f = self.u.field_at(nd, radius);
            let g2: f64 = f.grad.iter().map(|g| g * g).sum();
            vec![c * c * g2, c * f.value, (c * f.value).powi(2), 1.0]
        });
        let vol = sums[3];
        let mean = sums[1] / vol;
        Ok(DirectionData {
            grad_tr2: sums[0],
            tr_dev2: sums[2] - vol * mean * mean,
            tr_integral: sums[1],
            tt: None,
            h_norm2: sums[2] / n,
        })
    }

    fn integrated_dsigma(&self, k: usize) -> Result<f64> {
        let n = self.model.dim;
        let c = self.tangent_factor();
        let radius = self.model.radius;
        let mut acc = 0.0;
        for nd in &self.model.nodes {
            let f = self.u.field_at(nd, radius);
            let grad: Vec<f64> = f.grad.iter().map(|g| c * g).collect();
            let hess: Vec<f64> = f.hess.iter().map(|h| c * h).collect();
            let pf = PerturbationFields::conformal_on_space_form(n, self.model.lambda, c * f.value, &grad, &hess);
            acc += nd.weight * dsigma_k_first_einstein(&pf, k)?;
        }
        Ok(acc)
    }

    fn min_sigma(&self, t: f64, k: usize) -> Result<f64> {
        let mut m = f64::INFINITY;
        for node in &self.model.nodes {
            let (phi, sig) = self.sigmas_at(node, t)?;
            m = m.min((-2.0 * k as f64 * phi).exp() * sig[k]);
        }
        Ok(m)
    }
}

impl SphereConformalPath {
    /// σ_k of the path metric at an arbitrary ambient point on the sphere.
    pub fn sigma_at_point(&self, point: &[f64], t: f64, k: usize) -> Result<f64> {
        let node = crate::models::SphereNode {
            angles: Vec::new(),
            point: point.to_vec(),
            weight: 0.0,
            frame: crate::models::tangent_frame(point),
        };
        let (phi, sig) = self.sigmas_at(&node, t)?;
        Ok((-2.0 * k as f64 * phi).exp() * sig[k])
    }
}

impl SphereConformalPath {
    /// σ_k at `point` two ways: the conformal Schouten law used by the path,
    /// and curvature of the conformal metric computed from chart jets.
    pub fn conformal_law_check(&self, point: &[f64], t: f64, k: usize) -> Result<(f64, f64)> {
        let n = self.model.dim;
        let law = self.sigma_at_point(point, t, k)?;
        let mut chart = None;
        for shift in 0..=n {
            let axes: Vec<usize> = (0..=n).map(|i| (i + shift) % (n + 1)).collect();
            if let Ok(c) = crate::chartcurv::SphereChart::centred_at(point, axes) {
                chart = Some(c);
                break;
            }
        }
        let chart = chart.ok_or_else(|| LabError::Geometry("no regular chart around the point".into()))?;
        let g = chart.metric_jet(0, 2)?;
        let x = chart.ambient_jets(g.jet_shape())?;
        let d = n + 1;
        let mut u = crate::jet::PolyJet::constant(g.jet_shape(), self.u.constant);
        for i in 0..d {
            u = u.add(&x[i].scale(self.u.linear[i]));
            for j in 0..d {
                u = u.add(&x[i].mul(&x[j]).scale(self.u.quadratic[i * d + j]));
            }
        }
        let phi = match self.form {
            ConformalForm::Exponential => u.scale(t),
            ConformalForm::Linear => u.scale(t).add_constant(1.0).ln()?.scale(0.5),
        }
        .add_constant(self.scale.ln());
        let jet = crate::chartcurv::sigma_k_at_base(&g.conformal(&phi)?, k)?;
        Ok((law, jet.constant_term()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ProductPathKind {
    /// `a = 1/(1+t)`, `b = 1/(1−t+t²/n)`; tangent `−g_1 ⊕ g_2`.
    Family,
    /// `a = 1 + t(τ − s)`, `b = 1 + t(τ + s)`; tangent `s(−g_1 ⊕ g_2) + τ ḡ`.
    Linear { s: f64, tau: f64 },
}

#[derive(Clone, Debug)]
pub struct ProductPath {
    pub model: ProductEinsteinModel,
    pub kind: ProductPathKind,
    pub scale: f64,
}

impl ProductPath {
    pub fn new(model: ProductEinsteinModel, kind: ProductPathKind) -> Self {
        Self {
            model,
            kind,
            scale: 1.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale = c;
        out
    }

    pub fn model_at(&self, t: f64) -> Result<ProductEinsteinModel> {
        let c2 = self.scale * self.scale;
        let (a, b) = match self.kind {
            ProductPathKind::Family => {
                let n = self.model.dim() as f64;
                (1.0 / (1.0 + t), 1.0 / (1.0 - t + t * t / n))
            }
            ProductPathKind::Linear { s, tau } => (1.0 + t * (tau - s), 1.0 + t * (tau + s)),
        };
        self.model.with_scales(c2 * a, c2 * b)
    }

    fn tangent(&self) -> (f64, f64) {
        match self.kind {
            ProductPathKind::Family => (1.0, 0.0),
            ProductPathKind::Linear { s, tau } => (s, tau),
        }
    }

    /// Frame data of the tangent direction `s(−g_1 ⊕ g_2) + τ ḡ`.
    pub fn tangent_fields(&self) -> PerturbationFields {
        let m = self.model.factor_dim;
        let n = 2 * m;
        let (s, tau) = self.tangent();
        let reference = self.model.with_scales(1.0, 1.0).expect("unit scales");
        let riem = reference.riemann_frame();
        let mut ric = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            ric[i * n + i] = reference.ric_lambda;
            h[i * n + i] = tau + if i < m { -s } else { s };
        }
        let scal = n as f64 * reference.ric_lambda;
        PerturbationFields::parallel(n, riem, ric, scal, h)
    }
}

impl MetricPath for ProductPath {
    fn label(&self) -> String {
        let kind = match self.kind {
            ProductPathKind::Family => "family".to_string(),
            ProductPathKind::Linear { s, tau } => format!("linear(s={s},tau={tau})"),
        };
        format!("product-S{m}xS{m}:{kind}", m = self.model.factor_dim)
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn lambda(&self) -> f64 {
        self.model.main_lambda()
    }

    fn reference_volume(&self) -> f64 {
        self.model.with_scales(1.0, 1.0).expect("unit scales").volume()
    }

    fn integrals(&self, t: f64, k: usize, l: usize) -> Result<(f64, f64)> {
        let g = self.model_at(t)?;
        let vol_ref = self.reference_volume();
        Ok((sigma_of_product(&g, l)? * g.volume(), sigma_of_product(&g, k)? * vol_ref))
    }

    fn direction(&self) -> Result<DirectionData> {
        let n = self.model.dim() as f64;
        let vol = self.reference_volume();
        let (s, tau) = self.tangent();
        let fields = self.tangent_fields();
        let tt = if s != 0.0 {
            // h̊ is parallel, so Δ_E h̊ = 2 Rm h̊; read the eigenvalue off the frame action.
            let tt_part = PerturbationFields::parallel(
                fields.n,
                fields.riem.clone(),
                fields.ric.clone(),
                fields.scal,
                fields.h.iter().enumerate().map(|(idx, v)| if idx / fields.n == idx % fields.n { v - tau } else { *v }).collect(),
            );
            let de = tt_part.einstein_operator();
            let lam = de[0] / tt_part.h[0];
            Some((lam, n * s * s * vol))
        } else {
            None
        };
        Ok(DirectionData {
            grad_tr2: 0.0,
            tr_dev2: 0.0,
            tr_integral: n * tau * vol,
            tt,
            h_norm2: (n * s * s + n * tau * tau) * vol,
        })
    }

    fn integrated_dsigma(&self, k: usize) -> Result<f64> {
        let fields = self.tangent_fields();
        Ok(dsigma_k_first_einstein(&fields, k)? * self.reference_volume())
    }

    fn min_sigma(&self, t: f64, k: usize) -> Result<f64> {
        sigma_of_product(&self.model_at(t)?, k)
    }
}

/// `F` and its two factor integrals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FValue {
    pub value: f64,
    pub sigma_l_integral: f64,
    pub sigma_k_integral: f64,
}

fn check_path(cfg: &FunctionalConfig, path: &dyn MetricPath) -> Result<()> {
    if cfg.n != path.dim() {
        return Err(LabError::Config(format!(
            "config dimension {} does not match path dimension {}",
            cfg.n,
            path.dim()
        )));
    }
    Ok(())
}

pub fn f_value(cfg: &FunctionalConfig, path: &dyn MetricPath, t: f64) -> Result<FValue> {
    check_path(cfg, path)?;
    let (a, b) = path.integrals(t, cfg.k, cfg.l)?;
    let eb = cfg.n as i32 - 2 * cfg.l as i32;
    if eb < 0 && b.abs() < 1e-300 {
        return Err(LabError::Degenerate("∫σ_k vanishes under a negative exponent".into()));
    }
    Ok(FValue {
        value: a.powi(2 * cfg.k as i32) * b.powi(eb),
        sigma_l_integral: a,
        sigma_k_integral: b,
    })
}

/// First variation assembled from closed forms, with a centred-difference oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstVariation {
    pub assembled: f64,
    pub finite_difference: f64,
    /// `|F(ḡ)| · ‖h‖_{L²} / √Vol`, the size a non-critical first variation would have.
    pub scale: f64,
}

pub fn df_at_reference(cfg: &FunctionalConfig, path: &dyn MetricPath) -> Result<FirstVariation> {
    check_path(cfg, path)?;
    let f0 = f_value(cfg, path, 0.0)?;
    let (a, b) = (f0.sigma_l_integral, f0.sigma_k_integral);
    let dir = path.direction()?;
    let n = cfg.n as f64;
    let sigma_l_ref = crate::models::space_form_spectrum(cfg.n, cfg.lambda).1[cfg.l];
    let dsl = if cfg.l == 0 { 0.0 } else { path.integrated_dsigma(cfg.l)? };
    let dsk = path.integrated_dsigma(cfg.k)?;
    let dvol_term = sigma_l_ref * 0.5 * dir.tr_integral;
    let (k2, eb) = (2 * cfg.k as i32, cfg.n as i32 - 2 * cfg.l as i32);
    let assembled = k2 as f64 * a.powi(k2 - 1) * b.powi(eb) * (dsl + dvol_term)
        + (n - 2.0 * cfg.l as f64) * a.powi(k2) * b.powi(eb - 1) * dsk;
    let central = |h: f64| -> Result<f64> {
        Ok((f_value(cfg, path, h)?.value - f_value(cfg, path, -h)?.value) / (2.0 * h))
    };
    let step = 1e-3;
    let finite_difference = (4.0 * central(step / 2.0)? - central(step)?) / 3.0;
    let scale = f0.value.abs() * (dir.h_norm2 / path.reference_volume()).sqrt();
    Ok(FirstVariation {
        assembled,
        finite_difference,
        scale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecondVariationBreakdown {
    pub i_term: f64,
    pub j_term: f64,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub mu: Option<f64>,
    pub a_coeff: f64,
    /// Factor in front of the bracket: `a λ^{nk−1}` (or the `k = 1` display's).
    pub prefactor: f64,
    pub total: f64,
    pub route: &'static str,
    /// `|prefactor| · ∫|h|²`
    pub scale: f64,
}

pub fn d2f_formula(cfg: &FunctionalConfig, dir: &DirectionData) -> Result<SecondVariationBreakdown> {
    let co = coefficients(cfg)?;
    let n = cfg.n as f64;
    let lambda = cfg.lambda;
    let j_term = dir.grad_tr2 - n * lambda * dir.tr_dev2;
    if cfg.k == 1 {
        // dedicated display: bracket −∫h̊Δ_E h̊ + (n−1)(n+2)/n² J
        let tt = dir.tt.map(|(lam, norm)| -lam * norm).unwrap_or(0.0);
        let prefactor = -n.powi(cfg.n as i32) * (n - 2.0) / (4.0 * (n - 1.0))
            * ((n - 2.0) * lambda / 2.0).powi(cfg.n as i32 - 1)
            * cfg.volume.powi(cfg.n as i32 + 1);
        let bracket_j = (n - 1.0) * (n + 2.0) / (n * n);
        return Ok(SecondVariationBreakdown {
            i_term: tt,
            j_term,
            alpha: None,
            beta: co.beta,
            mu: None,
            a_coeff: co.a_coeff,
            prefactor,
            total: prefactor * (tt + bracket_j * j_term),
            route: "k1-display",
            scale: prefactor.abs() * dir.h_norm2,
        });
    }
    let alpha = co.alpha.expect("k >= 2");
    let mu = co.mu.expect("k >= 2");
    let kf = cfg.k as f64;
    let i_term = dir
        .tt
        .map(|(lam, norm)| lam * ((kf - 1.0) * lam - mu * lambda) * norm)
        .unwrap_or(0.0);
    let prefactor = co.a_coeff * lambda.powi((cfg.n * cfg.k) as i32 - 1);
    let total = prefactor * (alpha / lambda * i_term + co.beta * j_term);
    Ok(SecondVariationBreakdown {
        i_term,
        j_term,
        alpha: Some(alpha),
        beta: co.beta,
        mu: Some(mu),
        a_coeff: co.a_coeff,
        prefactor,
        total,
        route: "general",
        scale: prefactor.abs() * dir.h_norm2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericSecondVariation {
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    pub step: f64,
}

pub const DEFAULT_FD_STEP: f64 = 1e-2;

/// Second central differences of `F` at steps `t0`, `t0/2`, `t0/4`, combined by
/// two Richardson levels. `coarse` and `fine` are the first-level estimates from
/// the two step pairs; their disagreement gates the result. `scale` is the
/// magnitude below which differences count as noise.
pub fn d2f_numeric(cfg: &FunctionalConfig, path: &dyn MetricPath, t0: f64, scale: f64) -> Result<NumericSecondVariation> {
    let f0 = f_value(cfg, path, 0.0)?.value;
    let diff = |h: f64| -> Result<f64> {
        Ok((f_value(cfg, path, h)?.value - 2.0 * f0 + f_value(cfg, path, -h)?.value) / (h * h))
    };
    let (d1, d2, d4) = (diff(t0)?, diff(t0 / 2.0)?, diff(t0 / 4.0)?);
    let coarse = (4.0 * d2 - d1) / 3.0;
    let fine = (4.0 * d4 - d2) / 3.0;
    let value = (16.0 * fine - coarse) / 15.0;
    let floor = value.abs().max(scale);
    if (coarse - fine).abs() > 1e-5 * floor {
        return Err(LabError::StepSize(format!(
            "Richardson estimates from steps {t0} and {} disagree: {coarse:e} vs {fine:e} (floor {floor:e})",
            t0 / 2.0
        )));
    }
    Ok(NumericSecondVariation {
        value,
        coarse,
        fine,
        step: t0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PredictedSign {
    NonPositive,
    NonNegative,
    NoPrediction,
}

/// Spectral inputs of the sign analysis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralInputs {
    pub k_max: f64,
    pub k_min: f64,
    /// Known `min spec(−Δ_E)` on TT tensors, if any.
    pub lambda_e: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignAnalysis {
    pub predicted: PredictedSign,
    pub reason: String,
    /// Upper bound on the largest eigenvalue of Rm on TT tensors.
    pub theta_bound: f64,
    /// `−θ − (n−1)λ`
    pub lambda_e_lower: f64,
    /// `K_max ≤ (n/2)λ`, under which `Λ_E ≥ −n(n−2)λ/2`.
    pub kmax_condition: bool,
    pub beta_sign: f64,
    /// Sign of `a λ^{nk−1}`.
    pub prefactor_sign: f64,
}

pub fn sign_analysis(cfg: &FunctionalConfig, spec: &SpectralInputs) -> Result<SignAnalysis> {
    if spec.k_min > spec.k_max {
        return Err(LabError::Domain("K_min exceeds K_max".into()));
    }
    let n = cfg.n as f64;
    let lambda = cfg.lambda;
    let r = n * (n - 1.0) * lambda;
    let theta_bound = ((n - 2.0) * spec.k_max - r / n).min(r / n - n * spec.k_min);
    let lambda_e_lower = -theta_bound - (n - 1.0) * lambda;
    let kmax_condition = spec.k_max <= n / 2.0 * lambda;
    let co = coefficients(cfg)?;
    let prefactor_sign = (co.a_coeff * lambda.powi((cfg.n * cfg.k) as i32 - 1)).signum();
    let beta_sign = co.beta.signum();
    let half = 2 * cfg.l < cfg.n;
    let (predicted, reason) = if lambda > 0.0 && half {
        (PredictedSign::NonPositive, "λ > 0 and l < n/2".to_string())
    } else if lambda < 0.0 && spec.k_max < n / 2.0 * lambda && !half {
        if (cfg.n * cfg.k) % 2 == 0 {
            (PredictedSign::NonPositive, "λ < 0, K < (n/2)λ, l > n/2, nk even".to_string())
        } else {
            (PredictedSign::NonNegative, "λ < 0, K < (n/2)λ, l > n/2, nk odd".to_string())
        }
    } else {
        (PredictedSign::NoPrediction, "outside the proven case table".to_string())
    };
    if predicted != PredictedSign::NoPrediction {
        // bracket sign: αI/λ and βJ share the sign of λ·(−1)^{[l > n/2]} … both ≥ 0 for λ>0, ≤ 0 for λ<0
        let bracket = if lambda > 0.0 { 1.0 } else { -1.0 };
        let implied = if prefactor_sign * bracket < 0.0 {
            PredictedSign::NonPositive
        } else {
            PredictedSign::NonNegative
        };
        if implied != predicted || (lambda > 0.0) != (beta_sign > 0.0) {
            return Err(LabError::InternalConsistency(format!(
                "case table predicts {predicted:?} but coefficient signs imply {implied:?}"
            )));
        }
    }
    Ok(SignAnalysis {
        predicted,
        reason,
        theta_bound,
        lambda_e_lower,
        kmax_condition,
        beta_sign,
        prefactor_sign,
    })
}

/// `(∫|du|², nλ∫(u−ū)², gap)` on the round sphere.
pub fn obata_gap(model: &SphereModel, u: &HarmonicPerturbation) -> (f64, f64, f64) {
    let sums = model.integrate_many(3, |nd| {
        let f = u.field_at(nd, model.radius);
        vec![f.grad.iter().map(|g| g * g).sum(), f.value, f.value * f.value]
    });
    let vol = model.volume();
    let mean = sums[1] / vol;
    let dev = sums[2] - vol * mean * mean;
    let rhs = model.dim as f64 * model.lambda * dev;
    (sums[0], rhs, sums[0] - rhs)
}

/// Schouten eigenvalues of the product path at `t`, exposed for reports.
pub fn product_spectrum_at(path: &ProductPath, t: f64) -> Result<(f64, f64, f64)> {
    product_schouten_spectrum(&path.model_at(t)?)
}

/// Pointwise ingredients of the integrated second-variation identities.
struct IdentitySample {
    weight: f64,
    fields: PerturbationFields,
    /// `(h̊·Δ_E h̊, |Δ_E h̊|², |h̊|²)`
    tt: (f64, f64, f64),
}

fn identity_reports(
    label: &str,
    lambda: f64,
    k: usize,
    samples: &[IdentitySample],
    tolerance: f64,
) -> Result<Vec<VariationReport>> {
    let n = samples
        .first()
        .map(|s| s.fields.n)
        .ok_or_else(|| LabError::Grid("no quadrature samples".into()))?;
    let nf = n as f64;
    let kf = k as f64;
    // lhs: trS̈, |Ṡ|², h·Ṡ, (γh)², Dσ_k, D²σ_k ; rhs pieces: |dtrh|², (Δtrh)², (trh)², trh, h̊ terms
    let mut acc = [0.0f64; 12];
    for s in samples {
        let f = &s.fields;
        let sv = schouten_variations(f, RiemannConvention::Crossed);
        let tr_dd: f64 = (0..n).map(|i| sv.second[i * n + i]).sum();
        let s2: f64 = sv.first.iter().map(|v| v * v).sum();
        let hs: f64 = sv.first.iter().zip(&f.h).map(|(a, b)| a * b).sum();
        let dtr2: f64 = f.dtr().iter().map(|v| v * v).sum();
        let vals = [
            tr_dd,
            s2,
            hs,
            f.gamma().powi(2),
            dsigma_k_first_einstein(f, k)?,
            dsigma_k_second_einstein(f, k, RiemannConvention::Crossed)?,
            dtr2,
            f.lap_tr().powi(2),
            f.trace().powi(2),
            f.trace(),
            0.0,
            0.0,
        ];
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += s.weight * v;
        }
        acc[10] += s.weight * s.tt.0;
        acc[11] += s.weight * s.tt.1;
    }
    let tt_norm: f64 = samples.iter().map(|s| s.weight * s.tt.2).sum();
    let vol: f64 = samples.iter().map(|s| s.weight).sum();
    let [tr_dd, s2, hs, gamma2, ds1, ds2, dtr2, lap2, tr2, tr1, e1, e2] = acc;
    let l = lambda;
    let pre = binomial(n - 1, k - 1) * ((nf - 2.0) * l / 2.0).powi(k as i32 - 1);
    let rhs_trdd = 0.5 * (-(3.0 * nf - 2.0) / (2.0 * (nf - 1.0)) * e1 + (nf - 2.0) * l * tt_norm)
        - (nf - 2.0).powi(2) / (4.0 * nf * nf) * dtr2;
    let rhs_s2 = 0.25
        * ((e2 - 2.0 * (nf - 2.0) * l * e1 + ((nf - 2.0) * l).powi(2) * tt_norm)
            + ((nf - 2.0) / nf).powi(2) * (lap2 - (nf - 1.0) * l * dtr2));
    let rhs_hs = 0.5 * (-e1 + (nf - 2.0) * l * tt_norm + (nf - 2.0) / (nf * nf) * dtr2);
    let rhs_gamma = (nf - 1.0).powi(2) * (lap2 / (nf * nf) - 2.0 / nf * l * dtr2 + l * l * tr2);
    let rhs_ds1 = -binomial(n - 1, k - 1) * ((nf - 2.0) * l / 2.0).powi(k as i32) * tr1;
    let tt_part = if k >= 2 {
        (kf - 1.0) / (2.0 * l * (nf - 1.0) * (nf - 2.0)) * (-e2 + l * (nf - 2.0).powi(2) / (2.0 * (kf - 1.0)) * e1)
    } else {
        (nf - 2.0) / (4.0 * (nf - 1.0)) * e1
    };
    let rhs_ds2 = pre
        * (tt_part
            + (nf - 2.0) / 2.0 * l * tt_norm
            + (nf - 2.0) * (nf + 2.0 * kf) / (4.0 * nf * nf)
                * (-dtr2 + 2.0 * nf * (kf + 1.0) / (nf + 2.0 * kf) * l * tr2));
    let combined = pre
        * (rhs_trdd - 2.0 * (kf - 1.0) / (l * (nf - 1.0) * (nf - 2.0)) * rhs_s2 - 2.0 * (nf - kf) / (nf - 1.0) * rhs_hs
            + (kf - 1.0) * (nf - 2.0) / (2.0 * l * (nf - 1.0).powi(3)) * rhs_gamma
            + (2.0 * nf - kf - 1.0) * (nf - 2.0) / (2.0 * (nf - 1.0)) * l * (tt_norm + tr2 / nf));
    let floor = |xs: &[f64]| xs.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    let case = format!("{label},k={k}");
    let pieces = [
        ("int_tr_S_ddot", tr_dd, rhs_trdd, floor(&[dtr2, e1, l * tt_norm])),
        ("int_S_dot_sq", s2, rhs_s2, floor(&[lap2, l * dtr2, e2, l * l * tt_norm])),
        ("int_h_dot_S_dot", hs, rhs_hs, floor(&[dtr2, e1, l * tt_norm])),
        ("int_gamma_sq", gamma2, rhs_gamma, floor(&[lap2, l * dtr2, l * l * tr2])),
        ("int_dsigma_first", ds1, rhs_ds1, floor(&[rhs_ds1, pre * l * (tr2 * vol).sqrt()])),
        ("int_dsigma_second", ds2, rhs_ds2, floor(&[pre * dtr2, pre * l * tr2, pre * e2 / l, pre * l * tt_norm])),
        ("int_dsigma_second_combined", ds2, combined, floor(&[pre * dtr2, pre * l * tr2, pre * e2 / l, pre * l * tt_norm])),
    ];
    Ok(pieces
        .iter()
        .map(|(id, lhs, rhs, fl)| VariationReport::compare(id, &case, *rhs, *lhs, tolerance, *fl))
        .collect())
}

/// Integrated identities behind the second-variation formula, on the sphere
/// with conformal `h = u ḡ`. The formula column holds the integrated closed
/// form, the oracle column the quadrature of the pointwise variations.
pub fn sphere_proof_identities(
    model: &SphereModel,
    u: &HarmonicPerturbation,
    k: usize,
    tolerance: f64,
) -> Result<Vec<VariationReport>> {
    let n = model.dim;
    let samples: Vec<IdentitySample> = model
        .nodes
        .iter()
        .map(|nd| {
            let f = u.field_at(nd, model.radius);
            IdentitySample {
                weight: nd.weight,
                fields: PerturbationFields::conformal_on_space_form(n, model.lambda, f.value, &f.grad, &f.hess),
                tt: (0.0, 0.0, 0.0),
            }
        })
        .collect();
    identity_reports(&format!("S{n}:{}", u.kind.label()), model.lambda, k, &samples, tolerance)
}

/// Same identities on the product backend with its parallel tangent direction.
pub fn product_proof_identities(path: &ProductPath, k: usize, tolerance: f64) -> Result<Vec<VariationReport>> {
    let fields = path.tangent_fields();
    let n = fields.n;
    let tr = fields.trace() / n as f64;
    let tt_h: Vec<f64> = (0..n * n)
        .map(|idx| if idx / n == idx % n { fields.h[idx] - tr } else { fields.h[idx] })
        .collect();
    let tt_fields = PerturbationFields::parallel(n, fields.riem.clone(), fields.ric.clone(), fields.scal, tt_h.clone());
    let de = tt_fields.einstein_operator();
    let e1: f64 = tt_h.iter().zip(&de).map(|(a, b)| a * b).sum();
    let e2: f64 = de.iter().map(|v| v * v).sum();
    let nn: f64 = tt_h.iter().map(|v| v * v).sum();
    let samples = [IdentitySample {
        weight: path.reference_volume(),
        fields,
        tt: (e1, e2, nn),
    }];
    identity_reports(&path.label(), path.lambda(), k, &samples, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{harmonic_library, sphere_quadrature, EinsteinConvention};
    use std::f64::consts::PI;

    fn sphere(n: usize) -> Arc<SphereModel> {
        Arc::new(sphere_quadrature(n, 1.0, 10).unwrap())
    }

    #[test]
    fn coefficient_example() {
        let cfg = FunctionalConfig::new(4, 2, 0, 1.0, BetaVariant::NMinus2L, 1.0).unwrap();
        let c = coefficients(&cfg).unwrap();
        assert!((c.alpha.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.mu.unwrap() - 2.0).abs() < 1e-15);
        assert!((c.beta - 2.0).abs() < 1e-15);
        assert!((c.a_coeff + 324.0).abs() < 1e-12);
        assert!(FunctionalConfig::new(6, 3, 4, 1.0, BetaVariant::NMinus2L, 1.0).is_err());
        assert!(FunctionalConfig::new(4, 3, 2, 1.0, BetaVariant::NMinus2L, 1.0).is_err());
    }

    #[test]
    fn a_coeff_negative_and_mu_positive() {
        for n in 3..=10 {
            for k in 1..=n {
                for l in 0..k {
                    let Ok(cfg) = FunctionalConfig::new(n, k, l, 1.0, BetaVariant::NMinus2L, 2.5) else {
                        continue;
                    };
                    let c = coefficients(&cfg).unwrap();
                    assert!(c.a_coeff < 0.0);
                    if let Some(mu) = c.mu {
                        assert!(mu > 0.0, "{n} {k} {l}");
                    }
                }
            }
        }
    }

    #[test]
    fn f_on_round_sphere() {
        let m = sphere(3);
        let cfg = FunctionalConfig::new(3, 2, 0, 1.0, BetaVariant::NMinus2L, m.volume()).unwrap();
        let path = SphereConformalPath::new(m.clone(), harmonic_library(3)[0].clone(), ConformalForm::Linear);
        let v = f_value(&cfg, &path, 0.0).unwrap().value;
        let vol = 2.0 * PI * PI;
        let want = vol.powi(4) * (0.75 * vol).powi(3);
        assert!((v - want).abs() < 1e-9 * want);
        for c in [0.5, 1.3, 2.0] {
            let s = f_value(&cfg, &path.scaled(c), 0.02).unwrap().value;
            let b = f_value(&cfg, &path, 0.02).unwrap().value;
            assert!((s - b).abs() <= 1e-10 * b.abs());
        }
    }

    #[test]
    fn critical_point_on_sphere() {
        let m = sphere(4);
        let lib = harmonic_library(4);
        let cfg = FunctionalConfig::new(4, 3, 1, 1.0, BetaVariant::NMinus2L, m.volume()).unwrap();
        for u in &lib {
            let path = SphereConformalPath::new(m.clone(), u.clone(), ConformalForm::Exponential);
            let d = df_at_reference(&cfg, &path).unwrap();
            assert!(d.assembled.abs() <= 1e-7 * d.scale, "{:?}", d);
            assert!(d.finite_difference.abs() <= 1e-7 * d.scale, "{:?}", d);
        }
    }

    #[test]
    fn second_variation_sphere_matches_numeric() {
        let m = sphere(4);
        let lib = harmonic_library(4);
        let cfg = FunctionalConfig::new(4, 2, 1, 1.0, BetaVariant::NMinus2L, m.volume()).unwrap();
        let path = SphereConformalPath::new(m.clone(), lib[3].clone(), ConformalForm::Exponential);
        let formula = d2f_formula(&cfg, &path.direction().unwrap()).unwrap();
        let numeric = d2f_numeric(&cfg, &path, DEFAULT_FD_STEP, formula.scale).unwrap();
        let rel = (formula.total - numeric.value).abs() / formula.total.abs().max(formula.scale);
        assert!(rel < 1e-4, "{formula:?} {numeric:?}");
        assert!(formula.total < 0.0);
    }

    #[test]
    fn second_variation_product_matches_numeric() {
        for (m, k, l) in [(2, 1, 0), (2, 2, 0), (2, 3, 1), (3, 2, 1), (3, 4, 2)] {
            let model = ProductEinsteinModel::new(m, 1.0, EinsteinConvention::RicEqLambdaG).unwrap();
            let path = ProductPath::new(model, ProductPathKind::Family);
            let cfg = FunctionalConfig::new(2 * m, k, l, path.lambda(), BetaVariant::NMinus2L, path.reference_volume())
                .unwrap();
            let formula = d2f_formula(&cfg, &path.direction().unwrap()).unwrap();
            let numeric = d2f_numeric(&cfg, &path, DEFAULT_FD_STEP, formula.scale).unwrap();
            let rel = (formula.total - numeric.value).abs() / formula.total.abs().max(formula.scale);
            assert!(rel < 1e-6, "m={m} k={k} l={l}: {} vs {}", formula.total, numeric.value);
        }
    }

    #[test]
    fn obata_cases() {
        let m = sphere(3);
        let lib = harmonic_library(3);
        let (l, r, gap) = obata_gap(&m, &lib[0]);
        assert!(gap.abs() < 1e-7 * l.max(r));
        let (_, r2, gap2) = obata_gap(&m, &lib[2]);
        assert!((gap2 - 5.0 / 3.0 * r2).abs() < 1e-6 * r2);
        let (a, b, c) = obata_gap(&m, &HarmonicPerturbation::constant_field(1.0, 4));
        assert!(a.abs() < 1e-12 && b.abs() < 1e-9 && c.abs() < 1e-9);
    }

    #[test]
    fn proof_identities_hold() {
        let m = sphere(3);
        for u in harmonic_library(3) {
            for k in 1..=3 {
                for r in sphere_proof_identities(&m, &u, k, 1e-6).unwrap() {
                    assert!(r.pass, "{r:?}");
                }
            }
        }
        for (mdim, k) in [(2, 2), (3, 3), (2, 1)] {
            let model = ProductEinsteinModel::new(mdim, 1.0, EinsteinConvention::RicEqLambdaG).unwrap();
            for kind in [ProductPathKind::Family, ProductPathKind::Linear { s: 0.7, tau: 0.3 }] {
                let path = ProductPath::new(model.clone(), kind);
                for r in product_proof_identities(&path, k, 1e-9).unwrap() {
                    assert!(r.pass, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn conformal_law_matches_jets() {
        let m = sphere(4);
        for (i, u) in harmonic_library(4).into_iter().enumerate() {
            for form in [ConformalForm::Linear, ConformalForm::Exponential] {
                let path = SphereConformalPath::new(m.clone(), u.clone(), form).scaled(1.3);
                let p = &m.nodes[37 * i + 11].point;
                for k in 1..=4 {
                    let (law, jet) = path.conformal_law_check(p, 0.3, k).unwrap();
                    assert!((law - jet).abs() < 1e-10 * (1.0 + jet.abs()), "{law} vs {jet}");
                }
            }
        }
    }

    #[test]
    fn sign_table() {
        let cfg = FunctionalConfig::new(4, 2, 0, 1.0, BetaVariant::NMinus2L, 1.0).unwrap();
        let s = sign_analysis(&cfg, &SpectralInputs { k_max: 1.0, k_min: 1.0, lambda_e: None }).unwrap();
        assert_eq!(s.predicted, PredictedSign::NonPositive);
        let cfg = FunctionalConfig::new(4, 4, 3, -1.0, BetaVariant::NMinus2L, 1.0).unwrap();
        let s = sign_analysis(&cfg, &SpectralInputs { k_max: -2.5, k_min: -3.0, lambda_e: None }).unwrap();
        assert_eq!(s.predicted, PredictedSign::NonPositive);
        let cfg = FunctionalConfig::new(5, 5, 3, -1.0, BetaVariant::NMinus2L, 1.0).unwrap();
        let s = sign_analysis(&cfg, &SpectralInputs { k_max: -2.6, k_min: -3.0, lambda_e: None }).unwrap();
        assert_eq!(s.predicted, PredictedSign::NonNegative);
        let cfg = FunctionalConfig::new(5, 4, 3, 1.0, BetaVariant::NMinus2L, 1.0).unwrap();
        let s = sign_analysis(&cfg, &SpectralInputs { k_max: 1.0, k_min: 1.0, lambda_e: None }).unwrap();
        assert_eq!(s.predicted, PredictedSign::NoPrediction);
        assert!(FunctionalConfig::new(4, 3, 2, 1.0, BetaVariant::NMinus2L, 1.0).is_err());
    }
}
