//! Model Einstein manifolds: the round sphere with a product quadrature rule
//! and a perturbation library of ambient harmonics, and the product of two
//! equal round factors with independent scalings.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::symalg::{binomial, elem_sym, jacobi_eigen};

/// Gauss rule for the weight `(1 − z²)^a` on `[−1, 1]`, `a ≥ 0` a multiple of ½.
pub fn gegenbauer_rule(order: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jm = vec![0.0; order * order];
    for k in 1..order {
        let kf = k as f64;
        let b2 = kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a + 1.0) * (2.0 * kf + 2.0 * a - 1.0));
        let b = b2.sqrt();
        jm[(k - 1) * order + k] = b;
        jm[k * order + k - 1] = b;
    }
    let (nodes, vecs) = jacobi_eigen(&jm, order);
    let mu0 = weight_mass(a);
    let weights = (0..order).map(|j| mu0 * vecs[j].powi(2)).collect();
    (nodes, weights)
}

/// `∫_{−1}^{1} (1 − z²)^a dz` for `a` a non-negative multiple of ½.
fn weight_mass(a: f64) -> f64 {
    let twice = (2.0 * a).round() as i64;
    let (mut mass, mut cur) = if twice % 2 == 0 { (2.0, 0.0) } else { (PI / 2.0, 0.5) };
    while cur + 0.5 < a {
        cur += 1.0;
        mass *= 2.0 * cur / (2.0 * cur + 1.0);
    }
    mass
}

/// Volume of the unit round sphere `S^m`.
pub fn unit_sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_volume(m - 2),
    }
}

/// One quadrature node on the sphere.
#[derive(Clone, Debug)]
pub struct SphereNode {
    pub angles: Vec<f64>,
    /// Ambient position in R^{n+1}.
    pub point: Vec<f64>,
    pub weight: f64,
    /// Orthonormal tangent frame, `n` vectors of length `n+1`.
    pub frame: Vec<Vec<f64>>,
}

/// Round sphere `S^n(1/√λ)` with a product quadrature rule.
#[derive(Clone, Debug)]
pub struct SphereModel {
    pub dim: usize,
    /// Einstein constant with `Ric = (n−1)λ g`.
    pub lambda: f64,
    pub radius: f64,
    pub order: usize,
    pub nodes: Vec<SphereNode>,
}

pub const DEFAULT_QUAD_ORDER: usize = 10;

/// Product rule: Gauss–Gegenbauer in the cosine of each polar angle (weight
/// `sin^m a` becomes `(1 − z²)^{(m−1)/2}`), uniform in the periodic angle.
pub fn sphere_quadrature(n: usize, lambda: f64, order: usize) -> Result<SphereModel> {
    if !(3..=4).contains(&n) {
        return Err(LabError::Capability(format!("sphere quadrature supports n = 3, 4 (got {n})")));
    }
    if order < 8 {
        return Err(LabError::Domain(format!("quadrature order must be >= 8 (got {order})")));
    }
    if !(lambda > 0.0) {
        return Err(LabError::Domain("round sphere needs λ > 0".into()));
    }
    let radius = 1.0 / lambda.sqrt();
    let polar: Vec<(Vec<f64>, Vec<f64>)> = (1..n)
        .map(|i| {
            let m = (n - i) as f64;
            let (z, w) = gegenbauer_rule(order, (m - 1.0) / 2.0);
            (z.iter().map(|z| z.clamp(-1.0, 1.0).acos()).collect(), w)
        })
        .collect();
    let nper = 2 * order;
    let per_w = 2.0 * PI / nper as f64;
    let scale = radius.powi(n as i32);
    let mut nodes = Vec::new();
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut angles: Vec<f64> = (0..n - 1).map(|i| polar[i].0[idx[i]]).collect();
        let wpolar: f64 = (0..n - 1).map(|i| polar[i].1[idx[i]]).product();
        for p in 0..nper {
            angles.truncate(n - 1);
            angles.push((p as f64 + 0.5) * per_w);
            let point = embed(&angles, radius);
            let frame = tangent_frame(&point);
            nodes.push(SphereNode {
                angles: angles.clone(),
                point,
                weight: wpolar * per_w * scale,
                frame,
            });
        }
        let mut carry = 0;
        loop {
            if carry == n - 1 {
                return Ok(SphereModel {
                    dim: n,
                    lambda,
                    radius,
                    order,
                    nodes,
                });
            }
            idx[carry] += 1;
            if idx[carry] < order {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
    }
}

fn embed(angles: &[f64], radius: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut prod = radius;
    for &a in angles {
        out.push(prod * a.cos());
        prod *= a.sin();
    }
    out.push(prod);
    out
}

/// Orthonormal basis of the tangent space at `point` from a Householder
/// reflection sending the last axis to the unit normal.
pub fn tangent_frame(point: &[f64]) -> Vec<Vec<f64>> {
    let dim = point.len();
    let r = point.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu: Vec<f64> = point.iter().map(|v| v / r).collect();
    let last = dim - 1;
    let sign = if nu[last] >= 0.0 { -1.0 } else { 1.0 };
    // w = ν − sign·e_last, reflection maps e_last to ±ν
    let mut w = nu.clone();
    w[last] -= -sign;
    let wn2: f64 = w.iter().map(|v| v * v).sum();
    (0..last)
        .map(|col| {
            let mut e = vec![0.0; dim];
            e[col] = 1.0;
            if wn2 > 1e-300 {
                let dot = w[col];
                for (k, ek) in e.iter_mut().enumerate() {
                    *ek -= 2.0 * w[k] * dot / wn2;
                }
            }
            e
        })
        .collect()
}

impl SphereModel {
    pub fn volume(&self) -> f64 {
        self.nodes.iter().map(|nd| nd.weight).sum()
    }

    pub fn exact_volume(&self) -> f64 {
        unit_sphere_volume(self.dim) * self.radius.powi(self.dim as i32)
    }

    /// Sectional curvature `λ`.
    pub fn kappa(&self) -> f64 {
        self.lambda
    }

    /// Quadrature of a node function, summed in node order.
    pub fn integrate<F: Fn(&SphereNode) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|nd| nd.weight * f(nd)).sum()
    }

    /// Several integrals in one sweep.
    pub fn integrate_many<F: Fn(&SphereNode) -> Vec<f64>>(&self, count: usize, f: F) -> Vec<f64> {
        let mut acc = vec![0.0; count];
        for nd in &self.nodes {
            for (a, v) in acc.iter_mut().zip(f(nd)) {
                *a += nd.weight * v;
            }
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HarmonicKind {
    ConformalDeg1,
    ConformalDeg2,
    GeneralConformal,
}

impl HarmonicKind {
    pub fn label(self) -> &'static str {
        match self {
            HarmonicKind::ConformalDeg1 => "deg1",
            HarmonicKind::ConformalDeg2 => "deg2",
            HarmonicKind::GeneralConformal => "general",
        }
    }
}

/// Restriction of `P(X) = c + b·X + XᵀAX` to the sphere; gives the scalar
/// field `u` of a conformal perturbation `h = u·ḡ`.
#[derive(Clone, Debug, Serialize)]
pub struct HarmonicPerturbation {
    pub kind: HarmonicKind,
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Symmetric `(n+1)×(n+1)`, row-major.
    pub quadratic: Vec<f64>,
}

/// Value, frame gradient and frame Hessian of `u` at a node.
#[derive(Clone, Debug)]
pub struct FieldJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl HarmonicPerturbation {
    pub fn degree1(linear: Vec<f64>) -> Self {
        let d = linear.len();
        Self {
            kind: HarmonicKind::ConformalDeg1,
            constant: 0.0,
            linear,
            quadratic: vec![0.0; d * d],
        }
    }

    /// Trace-free quadratic part; the trace is removed if present.
    pub fn degree2(mut quadratic: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        let d = ambient_dim;
        if quadratic.len() != d * d {
            return Err(LabError::Domain("quadratic form has the wrong size".into()));
        }
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (quadratic[i * d + j] + quadratic[j * d + i]);
                quadratic[i * d + j] = s;
                quadratic[j * d + i] = s;
            }
        }
        let tr: f64 = (0..d).map(|i| quadratic[i * d + i]).sum::<f64>() / d as f64;
        for i in 0..d {
            quadratic[i * d + i] -= tr;
        }
        Ok(Self {
            kind: HarmonicKind::ConformalDeg2,
            constant: 0.0,
            linear: vec![0.0; d],
            quadratic,
        })
    }

    pub fn general(constant: f64, linear: Vec<f64>, mut quadratic: Vec<f64>) -> Self {
        let d = linear.len();
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (quadratic[i * d + j] + quadratic[j * d + i]);
                quadratic[i * d + j] = s;
                quadratic[j * d + i] = s;
            }
        }
        Self {
            kind: HarmonicKind::GeneralConformal,
            constant,
            linear,
            quadratic,
        }
    }

    pub fn constant_field(value: f64, ambient_dim: usize) -> Self {
        Self::general(value, vec![0.0; ambient_dim], vec![0.0; ambient_dim * ambient_dim])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kind: self.kind,
            constant: self.constant * c,
            linear: self.linear.iter().map(|v| v * c).collect(),
            quadratic: self.quadratic.iter().map(|v| v * c).collect(),
        }
    }

    pub fn ambient_value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut v = self.constant;
        for i in 0..d {
            v += self.linear[i] * x[i];
            for j in 0..d {
                v += x[i] * self.quadratic[i * d + j] * x[j];
            }
        }
        v
    }

    fn ambient_gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| self.linear[i] + 2.0 * (0..d).map(|j| self.quadratic[i * d + j] * x[j]).sum::<f64>())
            .collect()
    }

    /// `u`, `du` and `∇²u` at a node of a sphere of the given radius:
    /// `∇²u(Y,Z) = D²P(Y,Z) − ⟨Y,Z⟩ ∂_ν P / r`.
    pub fn field_at(&self, node: &SphereNode, radius: f64) -> FieldJet {
        let x = &node.point;
        let d = x.len();
        let grad_amb = self.ambient_gradient(x);
        let dnu: f64 = grad_amb.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>() / radius;
        let n = node.frame.len();
        let grad: Vec<f64> = node
            .frame
            .iter()
            .map(|e| e.iter().zip(&grad_amb).map(|(a, b)| a * b).sum())
            .collect();
        let mut hess = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        s += node.frame[a][i] * 2.0 * self.quadratic[i * d + j] * node.frame[b][j];
                    }
                }
                if a == b {
                    s -= dnu / radius;
                }
                hess[a * n + b] = s;
            }
        }
        FieldJet {
            value: self.ambient_value(x),
            grad,
            hess,
        }
    }
}

/// Library of conformal directions used by the sphere checks.
pub fn harmonic_library(n: usize) -> Vec<HarmonicPerturbation> {
    let d = n + 1;
    let mut out = Vec::new();
    let mut e0 = vec![0.0; d];
    e0[0] = 1.0;
    out.push(HarmonicPerturbation::degree1(e0));
    let mut b = vec![0.0; d];
    for (i, v) in b.iter_mut().enumerate() {
        *v = 0.3 + 0.2 * i as f64 * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    out.push(HarmonicPerturbation::degree1(b.clone()));
    let mut a = vec![0.0; d * d];
    a[1] = 1.0;
    a[d] = 1.0;
    out.push(HarmonicPerturbation::degree2(a, d).expect("valid size"));
    let mut a2 = vec![0.0; d * d];
    for i in 0..d {
        a2[i * d + i] = if i == 0 { 1.0 } else { -0.2 * i as f64 };
        if i + 1 < d {
            a2[i * d + i + 1] = 0.15;
            a2[(i + 1) * d + i] = 0.15;
        }
    }
    out.push(HarmonicPerturbation::degree2(a2.clone(), d).expect("valid size"));
    out.push(HarmonicPerturbation::general(
        0.4,
        b.iter().map(|v| 0.5 * v).collect(),
        a2.iter().map(|v| 0.7 * v).collect(),
    ));
    out
}

/// Which Einstein-constant convention a product model was specified in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EinsteinConvention {
    /// Each factor satisfies `Ric = λ g`.
    RicEqLambdaG,
    /// The product satisfies `Ric = (n−1)λ g`.
    RicEqNm1LambdaG,
}

/// `N_1 × N_2` with equal round factors `S^m`, metric `a·g_1 + b·g_2`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductEinsteinModel {
    pub factor_dim: usize,
    /// Ricci eigenvalue of each unscaled factor (`Ric_{g_i} = ric_lambda·g_i`).
    pub ric_lambda: f64,
    pub scales: (f64, f64),
    pub convention: EinsteinConvention,
}

impl ProductEinsteinModel {
    pub fn new(factor_dim: usize, lambda: f64, convention: EinsteinConvention) -> Result<Self> {
        if factor_dim < 2 {
            return Err(LabError::Domain(
                "product factors need dimension >= 2 (a circle carries no Einstein constant)".into(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(LabError::Domain("round factors need λ > 0".into()));
        }
        let n = 2.0 * factor_dim as f64;
        let ric_lambda = match convention {
            EinsteinConvention::RicEqLambdaG => lambda,
            EinsteinConvention::RicEqNm1LambdaG => (n - 1.0) * lambda,
        };
        Ok(Self {
            factor_dim,
            ric_lambda,
            scales: (1.0, 1.0),
            convention,
        })
    }

    pub fn with_scales(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(LabError::Domain(format!("scales must be positive, got ({a}, {b})")));
        }
        let mut out = self.clone();
        out.scales = (a, b);
        Ok(out)
    }

    /// Scales of the deformation family `a = 1/(1+t)`, `b = 1/(1−t+t²/n)`.
    pub fn along_family(&self, t: f64) -> Result<Self> {
        let n = self.dim() as f64;
        self.with_scales(1.0 / (1.0 + t), 1.0 / (1.0 - t + t * t / n))
    }

    pub fn dim(&self) -> usize {
        2 * self.factor_dim
    }

    /// λ in the convention `Ric = (n−1)λ g` at the Einstein point.
    pub fn main_lambda(&self) -> f64 {
        self.ric_lambda / (self.dim() as f64 - 1.0)
    }

    /// Sectional curvature of each unscaled factor.
    pub fn factor_kappa(&self) -> f64 {
        self.ric_lambda / (self.factor_dim as f64 - 1.0)
    }

    /// Volume of one unscaled factor.
    pub fn factor_volume(&self) -> f64 {
        let m = self.factor_dim;
        let r = (1.0 / self.factor_kappa()).sqrt();
        unit_sphere_volume(m) * r.powi(m as i32)
    }

    pub fn volume(&self) -> f64 {
        let (a, b) = self.scales;
        self.factor_volume().powi(2) * (a * b).powf(self.factor_dim as f64 / 2.0)
    }

    /// Riemann tensor in an orthonormal frame (first `m` vectors tangent to
    /// the first factor).
    pub fn riemann_frame(&self) -> Vec<f64> {
        let m = self.factor_dim;
        let n = 2 * m;
        let k1 = self.factor_kappa() / self.scales.0;
        let k2 = self.factor_kappa() / self.scales.1;
        let block = |i: usize| if i < m { 0 } else { 1 };
        let mut r = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                if a == b || block(a) != block(b) {
                    continue;
                }
                let k = if block(a) == 0 { k1 } else { k2 };
                r[((a * n + b) * n + a) * n + b] = k;
                r[((a * n + b) * n + b) * n + a] = -k;
            }
        }
        r
    }
}

/// `(μ_a, μ_b, R)`: Schouten eigenvalues on each factor and scalar curvature.
pub fn product_schouten_spectrum(model: &ProductEinsteinModel) -> Result<(f64, f64, f64)> {
    let (a, b) = model.scales;
    if !(a > 0.0 && b > 0.0) {
        return Err(LabError::Domain("scales must be positive".into()));
    }
    let m = model.factor_dim as f64;
    let n = 2.0 * m;
    let la = model.ric_lambda / a;
    let lb = model.ric_lambda / b;
    let r = m * (la + lb);
    let shift = r / (2.0 * (n - 1.0));
    Ok((la - shift, lb - shift, r))
}

/// σ_k of the two-eigenvalue Schouten spectrum.
pub fn sigma_of_product(model: &ProductEinsteinModel, k: usize) -> Result<f64> {
    let m = model.factor_dim;
    if k > 2 * m {
        return Err(LabError::Domain(format!("k = {k} exceeds dimension {}", 2 * m)));
    }
    let (ma, mb, _) = product_schouten_spectrum(model)?;
    let mut s = 0.0;
    for j in 0..=k.min(m) {
        if k - j > m {
            continue;
        }
        s += binomial(m, j) * binomial(m, k - j) * ma.powi(j as i32) * mb.powi((k - j) as i32);
    }
    Ok(s)
}

/// Volume ratio of the deformation family against ḡ: closed form
/// `(1 − (1−1/n)t² + t³/n)^{−n/4}` and the exact `(ab)^{m/2}`.
pub fn product_volume_ratio(model: &ProductEinsteinModel, t: f64) -> Result<(f64, f64)> {
    if t.abs() >= 0.5 {
        return Err(LabError::Domain(format!("|t| must be < 0.5 (got {t})")));
    }
    let n = model.dim() as f64;
    let closed = (1.0 - (1.0 - 1.0 / n) * t * t + t * t * t / n).powf(-n / 4.0);
    let scaled = model.along_family(t)?;
    let (a, b) = scaled.scales;
    let exact = (a * b).powf(model.factor_dim as f64 / 2.0);
    if (closed - exact).abs() > 1e-12 * exact {
        return Err(LabError::InternalConsistency(format!(
            "volume ratio closed form {closed} disagrees with exact {exact}"
        )));
    }
    Ok((closed, exact))
}

/// Schouten eigenvalue and σ_0..σ_n on a space form with `Ric = (n−1)λg`
/// (any sign of λ).
pub fn space_form_spectrum(n: usize, lambda: f64) -> (f64, Vec<f64>) {
    let mu = (n as f64 - 2.0) * lambda / 2.0;
    let evals = vec![mu; n];
    let sig = (0..=n).map(|k| elem_sym(&evals, k).expect("k <= n")).collect();
    (mu, sig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gegenbauer_rules_integrate_weight_moments() {
        for a in [0.0, 0.5, 1.0] {
            let (z, w) = gegenbauer_rule(6, a);
            let m0: f64 = w.iter().sum();
            assert!((m0 - weight_mass(a)).abs() < 1e-13);
            let m2: f64 = z.iter().zip(&w).map(|(z, w)| z * z * w).sum();
            // ∫z²(1−z²)^a / ∫(1−z²)^a = 1/(2a+3)
            assert!((m2 / m0 - 1.0 / (2.0 * a + 3.0)).abs() < 1e-13);
        }
        assert!((weight_mass(1.0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_volumes() {
        let s3 = sphere_quadrature(3, 1.0, 8).unwrap();
        assert!((s3.volume() - 2.0 * PI * PI).abs() < 1e-8 * 2.0 * PI * PI);
        let s4 = sphere_quadrature(4, 1.0, 8).unwrap();
        let v4 = 8.0 * PI * PI / 3.0;
        assert!((s4.volume() - v4).abs() < 1e-8 * v4);
        let s4b = sphere_quadrature(4, 4.0, 8).unwrap();
        assert!((s4b.volume() - v4 / 16.0).abs() < 1e-8 * v4);
        assert!(matches!(sphere_quadrature(5, 1.0, 8), Err(LabError::Capability(_))));
    }

    #[test]
    fn coordinate_second_moment() {
        let s3 = sphere_quadrature(3, 1.0, 8).unwrap();
        let v = s3.integrate(|nd| nd.point[1].powi(2));
        assert!((v - PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn degree_eight_monomials_are_exact() {
        // ∫_{S^n} x^α = 2 Π Γ(β_i) / Γ(Σβ_i), β_i = (α_i+1)/2, for even α
        fn gamma_half(twice: usize) -> f64 {
            // Γ(twice/2)
            if twice % 2 == 0 {
                (1..twice / 2).map(|i| i as f64).product()
            } else {
                let mut g = PI.sqrt();
                let mut x = 0.5;
                while x + 0.5 < twice as f64 / 2.0 {
                    g *= x;
                    x += 1.0;
                }
                g
            }
        }
        for n in [3usize, 4] {
            let s = sphere_quadrature(n, 1.0, 8).unwrap();
            let exps: Vec<Vec<usize>> = vec![
                vec![8, 0, 0, 0, 0],
                vec![2, 2, 2, 2, 0],
                vec![4, 0, 2, 0, 2],
                vec![0, 0, 0, 6, 2],
                vec![3, 1, 0, 0, 2],
                vec![1, 0, 0, 0, 5],
            ];
            for e in exps {
                let e = &e[..n + 1];
                let q = s.integrate(|nd| nd.point.iter().zip(e).map(|(x, &p)| x.powi(p as i32)).product());
                let exact = if e.iter().any(|p| p % 2 == 1) {
                    0.0
                } else {
                    let num: f64 = e.iter().map(|&p| gamma_half(p + 1)).product();
                    2.0 * num / gamma_half(e.iter().sum::<usize>() + n + 1)
                };
                assert!((q - exact).abs() < 1e-8 * exact.abs().max(1.0), "n={n} {e:?}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn tangent_frames_are_orthonormal_and_tangent() {
        let s = sphere_quadrature(4, 2.0, 8).unwrap();
        for nd in s.nodes.iter().step_by(97) {
            for (i, e) in nd.frame.iter().enumerate() {
                let dot_x: f64 = e.iter().zip(&nd.point).map(|(a, b)| a * b).sum();
                assert!(dot_x.abs() < 1e-12);
                for (j, f) in nd.frame.iter().enumerate() {
                    let d: f64 = e.iter().zip(f).map(|(a, b)| a * b).sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn degree_one_harmonic_hessian() {
        let s = sphere_quadrature(3, 1.0, 8).unwrap();
        let u = HarmonicPerturbation::degree1(vec![0.2, -0.5, 0.7, 0.1]);
        for nd in s.nodes.iter().step_by(31) {
            let f = u.field_at(nd, s.radius);
            for a in 0..3 {
                for b in 0..3 {
                    let want = if a == b { -f.value } else { 0.0 };
                    assert!((f.hess[a * 3 + b] - want).abs() < 1e-10);
                }
            }
        }
        assert!(s.integrate(|nd| u.ambient_value(&nd.point)).abs() < 1e-12);
    }

    #[test]
    fn degree_two_harmonic_laplacian() {
        let s = sphere_quadrature(4, 2.0, 8).unwrap();
        let lib = harmonic_library(4);
        let u = &lib[3];
        for nd in s.nodes.iter().step_by(53) {
            let f = u.field_at(nd, s.radius);
            let lap: f64 = (0..4).map(|a| f.hess[a * 4 + a]).sum();
            assert!((lap + 2.0 * 5.0 * 2.0 * f.value).abs() < 1e-10);
        }
    }

    #[test]
    fn obata_ratios() {
        let s = sphere_quadrature(3, 1.0, 10).unwrap();
        let ratio = |u: &HarmonicPerturbation| {
            let mean = s.integrate(|nd| u.ambient_value(&nd.point)) / s.volume();
            let num = s.integrate(|nd| {
                let f = u.field_at(nd, s.radius);
                f.grad.iter().map(|g| g * g).sum()
            });
            let den = s.integrate(|nd| (u.ambient_value(&nd.point) - mean).powi(2));
            num / den
        };
        let lib = harmonic_library(3);
        assert!((ratio(&lib[0]) - 3.0).abs() < 1e-7 * 3.0);
        assert!((ratio(&lib[1]) - 3.0).abs() < 1e-7 * 3.0);
        assert!((ratio(&lib[2]) - 8.0).abs() < 1e-7 * 8.0);
    }

    #[test]
    fn product_spectrum_examples() {
        let base = ProductEinsteinModel::new(2, 1.0, EinsteinConvention::RicEqLambdaG).unwrap();
        let (ma, mb, r) = product_schouten_spectrum(&base).unwrap();
        assert!((ma - 1.0 / 3.0).abs() < 1e-15 && (mb - 1.0 / 3.0).abs() < 1e-15);
        assert!((r - 4.0).abs() < 1e-15);
        let (_, _, r) = product_schouten_spectrum(&base.along_family(0.1).unwrap()).unwrap();
        assert!((r - 4.005).abs() < 1e-12);
        assert!((sigma_of_product(&base, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((sigma_of_product(&base, 1).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(sigma_of_product(&base.along_family(0.2).unwrap(), 0).unwrap(), 1.0);
        assert!(base.with_scales(0.0, 1.0).is_err());
    }

    #[test]
    fn product_sigma_at_einstein_point() {
        for m in 2..=4 {
            let model = ProductEinsteinModel::new(m, 1.3, EinsteinConvention::RicEqLambdaG).unwrap();
            let n = 2 * m;
            let mu = (n as f64 - 2.0) * 1.3 / (2.0 * (n as f64 - 1.0));
            for k in 0..=n {
                let want = mu.powi(k as i32) * binomial(n, k);
                assert!((sigma_of_product(&model, k).unwrap() - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn conventions_agree() {
        let a = ProductEinsteinModel::new(2, 3.0, EinsteinConvention::RicEqLambdaG).unwrap();
        let b = ProductEinsteinModel::new(2, 1.0, EinsteinConvention::RicEqNm1LambdaG).unwrap();
        assert_eq!(a.ric_lambda, b.ric_lambda);
        assert_eq!(b.main_lambda(), 1.0);
    }

    #[test]
    fn volume_ratio_routes() {
        let model = ProductEinsteinModel::new(2, 1.0, EinsteinConvention::RicEqLambdaG).unwrap();
        assert_eq!(product_volume_ratio(&model, 0.0).unwrap().0, 1.0);
        let (c, e) = product_volume_ratio(&model, 0.1).unwrap();
        assert!((e - 1.0 / (1.1 * 0.9025)).abs() < 1e-15);
        assert!((c - 1.0073029).abs() < 1e-7);
        assert!(product_volume_ratio(&model, -0.1).unwrap().0 > 1.0);
        for i in -30..=30 {
            product_volume_ratio(&model, i as f64 * 0.01).unwrap();
        }
    }

    #[test]
    fn product_riemann_gives_ricci() {
        let model = ProductEinsteinModel::new(3, 1.0, EinsteinConvention::RicEqLambdaG)
            .unwrap()
            .with_scales(0.8, 1.25)
            .unwrap();
        let r = model.riemann_frame();
        let n = 6;
        for b in 0..n {
            let ric: f64 = (0..n).map(|a| r[((a * n + b) * n + a) * n + b]).sum();
            let want = if b < 3 { 1.0 / 0.8 } else { 1.0 / 1.25 };
            assert!((ric - want).abs() < 1e-14);
        }
        assert!((model.factor_volume() - unit_sphere_volume(3) * 2.0f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn space_form_sigma() {
        let (mu, s) = space_form_spectrum(3, 1.0);
        assert_eq!(mu, 0.5);
        assert!((s[3] - 0.125).abs() < 1e-15);
        let (mu, _) = space_form_spectrum(4, -1.0);
        assert_eq!(mu, -1.0);
    }
}
