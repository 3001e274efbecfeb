//! Curvature of a metric given by polynomial jets on a coordinate chart.
//!
//! Index conventions:
//! - `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`
//! - `R^a_{bcd} = ∂_cΓ^a_{db} − ∂_dΓ^a_{cb} + Γ^a_{ce}Γ^e_{db} − Γ^a_{de}Γ^e_{cb}`
//! - `R_{abcd} = g_{ae}R^e_{bcd}`, so constant curvature κ gives
//!   `R_{abcd} = κ(g_ac g_bd − g_ad g_bc)`
//! - `Ric_bd = R^a_{bad}`, `S = Ric − R/(2(n−1)) g`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::jet::{shape, JetMatrix, JetShape, PolyJet};
use crate::symalg::{cholesky, elem_sym, sigma_via_delta_ring, SymEndo, MAX_DELTA_DIM};

/// Metric (or metric path in `t`) as jets about the chart origin.
#[derive(Clone, Debug)]
pub struct ChartMetricJet {
    dim: usize,
    components: Vec<PolyJet>,
}

impl ChartMetricJet {
    pub fn new(dim: usize, components: Vec<PolyJet>) -> Result<Self> {
        if components.len() != dim * dim {
            return Err(LabError::Domain(format!(
                "expected {} metric components, got {}",
                dim * dim,
                components.len()
            )));
        }
        let sh = components[0].shape().clone();
        if sh.nvars() != dim {
            return Err(LabError::Domain(format!(
                "jets have {} variables for a {dim}-dimensional chart",
                sh.nvars()
            )));
        }
        if components.iter().any(|c| !Arc::ptr_eq(c.shape(), &sh)) {
            return Err(LabError::Domain("metric components use different jet shapes".into()));
        }
        let scale = components.iter().map(PolyJet::max_abs).fold(1.0, f64::max);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if components[i * dim + j].max_abs_diff(&components[j * dim + i]) > 1e-12 * scale {
                    return Err(LabError::Geometry(format!(
                        "metric component ({i},{j}) is not symmetric"
                    )));
                }
            }
        }
        let base: Vec<f64> = components.iter().map(PolyJet::constant_term).collect();
        cholesky(&base, dim).map_err(|_| {
            LabError::Geometry("base metric is not positive definite".into())
        })?;
        Ok(Self { dim, components })
    }

    /// Euclidean metric δ_ij.
    pub fn flat(dim: usize, tdeg: usize, xdeg: usize) -> Self {
        let sh = shape(dim, tdeg, xdeg);
        let components = (0..dim * dim)
            .map(|idx| PolyJet::constant(&sh, if idx / dim == idx % dim { 1.0 } else { 0.0 }))
            .collect();
        Self { dim, components }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jet_shape(&self) -> &Arc<JetShape> {
        self.components[0].shape()
    }

    pub fn component(&self, i: usize, j: usize) -> &PolyJet {
        &self.components[i * self.dim + j]
    }

    pub fn components(&self) -> &[PolyJet] {
        &self.components
    }

    /// `g + t·h + t²·m` where `h`, `m` are symmetric jets without `t` dependence
    /// (their t-powers are shifted up; anything beyond `tdeg` is dropped).
    pub fn with_path(&self, h: &[PolyJet], m: Option<&[PolyJet]>) -> Result<Self> {
        let sh = self.jet_shape();
        let t = PolyJet::t(sh);
        let t2 = t.mul(&t);
        let mut comps = Vec::with_capacity(self.dim * self.dim);
        for idx in 0..self.dim * self.dim {
            let mut c = self.components[idx].add(&t.mul(&h[idx]));
            if let Some(m) = m {
                c = c.add(&t2.mul(&m[idx]));
            }
            comps.push(c);
        }
        Self::new(self.dim, comps)
    }

    /// `e^{2φ} g` for a scalar jet φ.
    pub fn conformal(&self, phi: &PolyJet) -> Result<Self> {
        let factor = phi.scale(2.0).exp()?;
        let comps = self.components.iter().map(|c| c.mul(&factor)).collect();
        Self::new(self.dim, comps)
    }

    pub fn scaled(&self, c2: f64) -> Result<Self> {
        let comps = self.components.iter().map(|c| c.scale(c2)).collect();
        Self::new(self.dim, comps)
    }

    fn truncated(&self, xdeg: usize) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().map(|c| c.truncate_x(xdeg)).collect(),
        }
    }

    /// Inverse metric as jets.
    pub fn inverse(&self) -> Result<JetMatrix> {
        JetMatrix::new(self.dim, self.components.clone()).inverse()
    }
}

/// Curvature quantities as jets over the chart (fields, not point values).
#[derive(Clone, Debug)]
pub struct CurvatureFields {
    pub dim: usize,
    pub metric: Vec<PolyJet>,
    pub inverse: Vec<PolyJet>,
    /// `christoffel[k*n*n + i*n + j] = Γ^k_ij`
    pub christoffel: Vec<PolyJet>,
    /// `riemann[((a*n+b)*n+c)*n+d] = R_{abcd}`
    pub riemann: Vec<PolyJet>,
    pub ricci: Vec<PolyJet>,
    pub scalar: PolyJet,
}

pub fn curvature_fields(g: &ChartMetricJet) -> Result<CurvatureFields> {
    let n = g.dim;
    if g.jet_shape().xdeg() < 2 {
        return Err(LabError::Capability(format!(
            "curvature needs x-degree >= 2, got {}",
            g.jet_shape().xdeg()
        )));
    }
    let metric = g.components.clone();
    let inverse = g.inverse()?.entries;
    let dg: Vec<Vec<PolyJet>> = (0..n).map(|l| metric.iter().map(|c| c.diff(l)).collect()).collect();
    // lowered Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut lowered = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v = dg[i][j * n + l]
                    .add(&dg[j][i * n + l])
                    .sub(&dg[l][i * n + j])
                    .scale(0.5);
                lowered.push(v);
            }
        }
    }
    let mut christoffel = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = inverse[k * n].mul(&lowered[i * n + j]);
                for l in 1..n {
                    acc = acc.add(&inverse[k * n + l].mul(&lowered[(l * n + i) * n + j]));
                }
                christoffel.push(acc);
            }
        }
    }
    let gam = |a: usize, b: usize, c: usize| &christoffel[(a * n + b) * n + c];
    let dgam: Vec<Vec<PolyJet>> = (0..n)
        .map(|v| christoffel.iter().map(|c| c.diff(v)).collect())
        .collect();
    // R^a_{bcd}
    let mut mixed = Vec::with_capacity(n * n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut acc = dgam[c][(a * n + d) * n + b].sub(&dgam[d][(a * n + c) * n + b]);
                    for e in 0..n {
                        acc = acc
                            .add(&gam(a, c, e).mul(gam(e, d, b)))
                            .sub(&gam(a, d, e).mul(gam(e, c, b)));
                    }
                    mixed.push(acc);
                }
            }
        }
    }
    let idx4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let mut riemann = Vec::with_capacity(n * n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut acc = metric[a * n].mul(&mixed[idx4(0, b, c, d)]);
                    for e in 1..n {
                        acc = acc.add(&metric[a * n + e].mul(&mixed[idx4(e, b, c, d)]));
                    }
                    riemann.push(acc);
                }
            }
        }
    }
    let mut ricci = Vec::with_capacity(n * n);
    for b in 0..n {
        for d in 0..n {
            let mut acc = mixed[idx4(0, b, 0, d)].clone();
            for a in 1..n {
                acc = acc.add(&mixed[idx4(a, b, a, d)]);
            }
            ricci.push(acc);
        }
    }
    let mut scalar = inverse[0].mul(&ricci[0]);
    for idx in 1..n * n {
        scalar = scalar.add(&inverse[idx].mul(&ricci[idx]));
    }
    Ok(CurvatureFields {
        dim: n,
        metric,
        inverse,
        christoffel,
        riemann,
        ricci,
        scalar,
    })
}

/// Curvature t-jets at the chart origin.
#[derive(Clone, Debug)]
pub struct CurvaturePoint {
    pub dim: usize,
    pub metric: Vec<PolyJet>,
    pub inverse: Vec<PolyJet>,
    pub christoffel: Vec<PolyJet>,
    pub riemann: Vec<PolyJet>,
    pub ricci: Vec<PolyJet>,
    pub scalar: PolyJet,
    pub schouten: Vec<PolyJet>,
}

impl CurvaturePoint {
    pub fn riemann_at(&self, a: usize, b: usize, c: usize, d: usize) -> &PolyJet {
        let n = self.dim;
        &self.riemann[((a * n + b) * n + c) * n + d]
    }

    /// Mixed Schouten endomorphism `S^i_j = g^{ip} S_pj` as t-jets.
    pub fn schouten_mixed(&self) -> Vec<PolyJet> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.inverse[i * n].mul(&self.schouten[j]);
                for p in 1..n {
                    acc = acc.add(&self.inverse[i * n + p].mul(&self.schouten[p * n + j]));
                }
                out.push(acc);
            }
        }
        out
    }

    /// Metric and Schouten tensor at `t = 0` as plain matrices.
    pub fn base_values(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.metric.iter().map(PolyJet::constant_term).collect(),
            self.schouten.iter().map(PolyJet::constant_term).collect(),
        )
    }
}

pub fn curvature_at_base(g: &ChartMetricJet) -> Result<CurvaturePoint> {
    if g.jet_shape().xdeg() < 2 {
        return Err(LabError::Capability(format!(
            "curvature needs x-degree >= 2, got {}",
            g.jet_shape().xdeg()
        )));
    }
    let fields = curvature_fields(&g.truncated(2))?;
    let at = |v: &[PolyJet]| -> Result<Vec<PolyJet>> { v.iter().map(PolyJet::eval_base).collect() };
    let n = g.dim;
    let metric = at(&fields.metric)?;
    let ricci = at(&fields.ricci)?;
    let scalar = fields.scalar.eval_base()?;
    let factor = scalar.scale(-1.0 / (2.0 * (n as f64 - 1.0)));
    let schouten = (0..n * n)
        .map(|idx| ricci[idx].add(&metric[idx].mul(&factor)))
        .collect();
    Ok(CurvaturePoint {
        dim: n,
        inverse: at(&fields.inverse)?,
        christoffel: at(&fields.christoffel)?,
        riemann: at(&fields.riemann)?,
        metric,
        ricci,
        scalar,
        schouten,
    })
}

/// σ_k of the Schouten endomorphism at the chart origin, as a t-jet.
///
/// The jet comes from the Kronecker-delta contraction; its `t⁰` coefficient
/// is cross-checked against the eigenvalue route.
pub fn sigma_k_at_base(g: &ChartMetricJet, k: usize) -> Result<PolyJet> {
    let point = curvature_at_base(g)?;
    sigma_k_of_point(&point, k)
}

pub fn sigma_k_of_point(point: &CurvaturePoint, k: usize) -> Result<PolyJet> {
    let n = point.dim;
    if k > n {
        return Err(LabError::Domain(format!("k = {k} exceeds dimension {n}")));
    }
    if n > MAX_DELTA_DIM {
        return Err(LabError::Capability(format!(
            "jet σ_k uses the delta route, limited to n <= {MAX_DELTA_DIM}"
        )));
    }
    let mixed = point.schouten_mixed();
    let jet = sigma_via_delta_ring(&mixed, n, k)?;
    let (metric, schouten) = point.base_values();
    let endo = SymEndo::from_forms(&schouten, &metric, n)?;
    let eig = elem_sym(&endo.eigenvalues(), k)?;
    let scale = 1.0 + eig.abs();
    if (jet.constant_term() - eig).abs() > 1e-9 * scale {
        return Err(LabError::InternalConsistency(format!(
            "σ_{k} routes disagree at t = 0: delta {} vs eigen {eig}",
            jet.constant_term()
        )));
    }
    Ok(jet)
}

/// `(q(0), q'(0), q''(0))` from a t-jet.
pub fn t_derivatives(q: &PolyJet) -> Result<(f64, f64, f64)> {
    if q.shape().tdeg() < 2 {
        return Err(LabError::Capability(format!(
            "second t-derivative needs t-degree 2, jet has {}",
            q.shape().tdeg()
        )));
    }
    let base = if q.shape().nvars() == 0 { q.clone() } else { q.eval_base()? };
    let c = base.t_coeffs();
    Ok((c[0], c[1], 2.0 * c[2]))
}

/// Hyperspherical chart on the round sphere of radius `radius` in R^{n+1}.
///
/// The ambient axes are read through `axes`: chart coordinate functions
/// describe `X_{axes[0]}, …, X_{axes[n]}` by the usual angle recursion
/// `X_{axes[0]} = r cos a_1`, …, `X_{axes[n]} = r sin a_1 ⋯ sin a_n`.
#[derive(Clone, Debug)]
pub struct SphereChart {
    pub dim: usize,
    pub radius: f64,
    pub base_angles: Vec<f64>,
    pub axes: Vec<usize>,
}

impl SphereChart {
    /// Chart centred at the interior point with every angle equal to π/2.
    pub fn standard(dim: usize, radius: f64) -> Self {
        Self {
            dim,
            radius,
            base_angles: vec![FRAC_PI_2; dim],
            axes: (0..=dim).collect(),
        }
    }

    /// Chart with the given axis order centred at an ambient point on the sphere.
    pub fn centred_at(point: &[f64], axes: Vec<usize>) -> Result<Self> {
        let dim = point.len() - 1;
        if axes.len() != dim + 1 {
            return Err(LabError::Domain("axis permutation has the wrong length".into()));
        }
        let mut seen = vec![false; dim + 1];
        for &a in &axes {
            if a > dim || seen[a] {
                return Err(LabError::Domain("axes must be a permutation".into()));
            }
            seen[a] = true;
        }
        let y: Vec<f64> = axes.iter().map(|&a| point[a]).collect();
        let radius = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut angles = Vec::with_capacity(dim);
        for i in 0..dim {
            let tail = y[i + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if i + 1 < dim {
                angles.push(tail.atan2(y[i]));
            } else {
                angles.push(y[dim].atan2(y[dim - 1]));
            }
        }
        for (i, &a) in angles.iter().enumerate() {
            let polar = i + 1 < dim;
            if (polar && (a.sin().abs() < 1e-3)) || (!polar && (y[dim - 1].hypot(y[dim]) < 1e-3 * radius)) {
                return Err(LabError::Geometry(
                    "chart centre too close to a coordinate singularity".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            radius,
            base_angles: angles,
            axes,
        })
    }

    fn angle_jets(&self, sh: &Arc<JetShape>) -> Vec<PolyJet> {
        (0..self.dim)
            .map(|i| PolyJet::coordinate(sh, i).add_constant(self.base_angles[i]))
            .collect()
    }

    /// Ambient coordinates `X_0..X_n` as jets in the chart coordinates.
    pub fn ambient_jets(&self, sh: &Arc<JetShape>) -> Result<Vec<PolyJet>> {
        let n = self.dim;
        let angles = self.angle_jets(sh);
        let sins: Vec<PolyJet> = angles.iter().map(PolyJet::sin).collect::<Result<_>>()?;
        let coss: Vec<PolyJet> = angles.iter().map(PolyJet::cos).collect::<Result<_>>()?;
        let mut y = Vec::with_capacity(n + 1);
        let mut prod = PolyJet::constant(sh, self.radius);
        for i in 0..n {
            y.push(prod.mul(&coss[i]));
            prod = prod.mul(&sins[i]);
        }
        y.push(prod);
        let mut out = vec![PolyJet::zero(sh); n + 1];
        for (slot, &axis) in self.axes.iter().enumerate() {
            out[axis] = y[slot].clone();
        }
        Ok(out)
    }

    /// Ambient point of the chart origin.
    pub fn base_point(&self) -> Vec<f64> {
        let n = self.dim;
        let mut y = Vec::with_capacity(n + 1);
        let mut prod = self.radius;
        for i in 0..n {
            y.push(prod * self.base_angles[i].cos());
            prod *= self.base_angles[i].sin();
        }
        y.push(prod);
        let mut out = vec![0.0; n + 1];
        for (slot, &axis) in self.axes.iter().enumerate() {
            out[axis] = y[slot];
        }
        out
    }

    /// Round metric `g_11 = r²`, `g_ii = r² Π_{j<i} sin² a_j` as jets.
    pub fn metric_jet(&self, tdeg: usize, xdeg: usize) -> Result<ChartMetricJet> {
        let n = self.dim;
        let sh = shape(n, tdeg, xdeg);
        let angles = self.angle_jets(&sh);
        let mut comps = vec![PolyJet::zero(&sh); n * n];
        let mut prod = PolyJet::constant(&sh, self.radius * self.radius);
        for i in 0..n {
            comps[i * n + i] = prod.clone();
            let s = angles[i].sin()?;
            prod = prod.mul(&s.mul(&s));
        }
        ChartMetricJet::new(n, comps)
    }

    /// Chart-coordinate differentials `∂X_A/∂x_i` at the origin, row `i`.
    pub fn ambient_differential(&self) -> Result<Vec<Vec<f64>>> {
        let sh = shape(self.dim, 0, 1);
        let amb = self.ambient_jets(&sh)?;
        let mut rows = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut mono = vec![0u8; self.dim];
            mono[i] = 1;
            rows.push(amb.iter().map(|a| a.coeff(0, &mono)).collect());
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> ChartMetricJet {
        let sh = shape(n, 0, 2);
        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                base[i * n + j] = rng.gen_range(-0.3..0.3);
            }
        }
        let mut spd = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += base[i * n + k] * base[j * n + k];
                }
                spd[i * n + j] = s;
            }
        }
        let mut comps = vec![PolyJet::zero(&sh); n * n];
        for i in 0..n {
            for j in i..n {
                let mut c = PolyJet::constant(&sh, spd[i * n + j]);
                for m in 1..sh.monomial_count() {
                    let mono = sh.monomial(m).to_vec();
                    c.set_coeff(0, &mono, rng.gen_range(-0.1..0.1)).unwrap();
                }
                comps[i * n + j] = c.clone();
                comps[j * n + i] = c;
            }
        }
        ChartMetricJet::new(n, comps).unwrap()
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let p = curvature_at_base(&ChartMetricJet::flat(3, 2, 4)).unwrap();
        assert!(p.riemann.iter().all(|r| r.max_abs() == 0.0));
        assert_eq!(p.scalar.max_abs(), 0.0);
        let s = sigma_k_at_base(&ChartMetricJet::flat(3, 2, 4), 2).unwrap();
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn unit_three_sphere_curvature() {
        let g = SphereChart::standard(3, 1.0).metric_jet(2, 4).unwrap();
        let p = curvature_at_base(&g).unwrap();
        assert!((p.scalar.constant_term() - 6.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expect = 2.0 * p.metric[i * 3 + j].constant_term();
                assert!((p.ricci[i * 3 + j].constant_term() - expect).abs() < 1e-12);
            }
        }
        for (k, want) in [(1, 1.5), (2, 0.75), (3, 0.125)] {
            let s = sigma_k_at_base(&g, k).unwrap();
            assert!((s.constant_term() - want).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn scaled_sphere_sigma() {
        let g = SphereChart::standard(3, 1.0).metric_jet(0, 2).unwrap().scaled(4.0).unwrap();
        let s = sigma_k_at_base(&g, 2).unwrap();
        assert!((s.constant_term() - 0.046875).abs() < 1e-13);
    }

    #[test]
    fn constant_curvature_riemann_sign() {
        let chart = SphereChart::standard(4, 2.0);
        let g = chart.metric_jet(0, 2).unwrap();
        let p = curvature_at_base(&g).unwrap();
        let kappa = 0.25;
        let gb: Vec<f64> = p.metric.iter().map(PolyJet::constant_term).collect();
        let n = 4;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let want = kappa * (gb[a * n + c] * gb[b * n + d] - gb[a * n + d] * gb[b * n + c]);
                        let got = p.riemann_at(a, b, c, d).constant_term();
                        assert!((got - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn riemann_symmetries_on_random_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(2..=4);
            let p = curvature_at_base(&random_metric(&mut rng, n)).unwrap();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let r = p.riemann_at(a, b, c, d).constant_term();
                            assert!((r + p.riemann_at(b, a, c, d).constant_term()).abs() < 1e-9);
                            assert!((r + p.riemann_at(a, b, d, c).constant_term()).abs() < 1e-9);
                            assert!((r - p.riemann_at(c, d, a, b).constant_term()).abs() < 1e-9);
                            let cyc = r
                                + p.riemann_at(a, c, d, b).constant_term()
                                + p.riemann_at(a, d, b, c).constant_term();
                            assert!(cyc.abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_metric(&mut rng, 3);
        let p = curvature_at_base(&g).unwrap();
        for c in [0.5f64, 2.0] {
            let q = curvature_at_base(&g.scaled(c * c).unwrap()).unwrap();
            for idx in 0..9 {
                let a = p.ricci[idx].constant_term();
                let b = q.ricci[idx].constant_term();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-3));
            }
            let r0 = p.scalar.constant_term();
            assert!((q.scalar.constant_term() - r0 / (c * c)).abs() <= 1e-10 * r0.abs());
            for k in 1..=3 {
                let s0 = sigma_k_of_point(&p, k).unwrap().constant_term();
                let s1 = sigma_k_of_point(&q, k).unwrap().constant_term();
                assert!((s1 - s0 * c.powi(-2 * k as i32)).abs() <= 1e-10 * s0.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn two_charts_agree_on_conformal_sigma() {
        let n = 3;
        let base = SphereChart::standard(n, 1.0);
        let point = {
            let mut c = base.clone();
            c.base_angles = vec![1.1, 1.3, 0.7];
            c.base_point()
        };
        let phi = |amb: &[PolyJet]| amb[0].scale(0.3).add(&amb[2].mul(&amb[3]).scale(0.2));
        let mut values = Vec::new();
        for axes in [vec![0, 1, 2, 3], vec![2, 3, 0, 1]] {
            let chart = SphereChart::centred_at(&point, axes).unwrap();
            let g = chart.metric_jet(0, 2).unwrap();
            let amb = chart.ambient_jets(g.jet_shape()).unwrap();
            let gc = g.conformal(&phi(&amb)).unwrap();
            values.push(
                (1..=3)
                    .map(|k| sigma_k_at_base(&gc, k).unwrap().constant_term())
                    .collect::<Vec<_>>(),
            );
        }
        for k in 0..3 {
            assert!((values[0][k] - values[1][k]).abs() <= 1e-8 * values[0][k].abs());
        }
    }

    #[test]
    fn t_derivative_extraction() {
        let q = PolyJet::from_t_coeffs(&[3.0, 5.0, 7.0]);
        assert_eq!(t_derivatives(&q).unwrap(), (3.0, 5.0, 14.0));
        assert!(t_derivatives(&PolyJet::from_t_coeffs(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn path_t0_matches_background() {
        let chart = SphereChart::standard(3, 1.0);
        let g = chart.metric_jet(2, 2).unwrap();
        let sh = g.jet_shape().clone();
        let x = PolyJet::coordinate(&sh, 0);
        let h: Vec<PolyJet> = (0..9)
            .map(|idx| if idx % 4 == 0 { x.mul(&x).add_constant(0.2) } else { PolyJet::zero(&sh) })
            .collect();
        let path = g.with_path(&h, None).unwrap();
        let a = sigma_k_at_base(&path, 2).unwrap();
        let b = sigma_k_at_base(&g, 2).unwrap();
        assert_eq!(a.constant_term(), b.constant_term());
    }

    #[test]
    fn rejects_bad_inputs() {
        let sh = shape(2, 0, 1);
        let comps = vec![
            PolyJet::constant(&sh, 1.0),
            PolyJet::zero(&sh),
            PolyJet::zero(&sh),
            PolyJet::constant(&sh, 1.0),
        ];
        let g = ChartMetricJet::new(2, comps).unwrap();
        assert!(matches!(curvature_at_base(&g), Err(LabError::Capability(_))));
        let sh = shape(2, 0, 2);
        let comps = vec![
            PolyJet::constant(&sh, 1.0),
            PolyJet::zero(&sh),
            PolyJet::zero(&sh),
            PolyJet::constant(&sh, -1.0),
        ];
        assert!(matches!(ChartMetricJet::new(2, comps), Err(LabError::Geometry(_))));
    }
}
