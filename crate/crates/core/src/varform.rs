//! Closed-form first and second variations of curvature quantities and the
//! comparators that check them against exact jet oracles.
//!
//! All pointwise formulas work in an orthonormal frame at the evaluation
//! point, so index placement is immaterial and contractions are plain sums.
//! Conventions: `Δ = ∇^i∇_i`, `(δh)_j = −∇^i h_ij`, `δ²h = ∇^i∇^j h_ij`,
//! `γh = −Δ tr h + δ²h − Ric·h`, `(Rm h)_ij = R_{ikjl} h_kl`,
//! `Δ_E = Δ + 2 Rm`, `Δ_L h = Δ_E h − Ric∘h − h∘Ric`.

use serde::Serialize;

use crate::chartcurv::{curvature_at_base, curvature_fields, ChartMetricJet, CurvaturePoint};
use crate::error::{LabError, Result};
use crate::jet::{JetMatrix, PolyJet};
use crate::symalg::{binomial, cholesky, invert};

/// Background curvature and a symmetric 2-tensor with its first two covariant
/// derivatives, all at one point in an orthonormal frame.
#[derive(Clone, Debug)]
pub struct PerturbationFields {
    pub n: usize,
    /// `riem[((a*n+b)*n+c)*n+d] = R_{abcd}`
    pub riem: Vec<f64>,
    pub ric: Vec<f64>,
    pub scal: f64,
    pub h: Vec<f64>,
    /// `dh[(a*n+i)*n+j] = ∇_a h_ij`
    pub dh: Vec<f64>,
    /// `ddh[((b*n+a)*n+i)*n+j] = ∇_b∇_a h_ij`
    pub ddh: Vec<f64>,
}

/// Orthonormal frame `E` (columns) for a metric `g`: `Eᵀ g E = I`.
pub fn orthonormal_frame(g: &[f64], n: usize) -> Result<Vec<f64>> {
    let l = cholesky(g, n)?;
    let linv = invert(&l, n)?;
    // E = L^{-T}
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            e[i * n + j] = linv[j * n + i];
        }
    }
    Ok(e)
}

/// Express a covariant tensor of the given rank in the frame `e`.
pub fn to_frame(t: &[f64], rank: usize, n: usize, e: &[f64]) -> Vec<f64> {
    let mut cur = t.to_vec();
    for slot in 0..rank {
        let stride = n.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let alpha = (idx / stride) % n;
            let base = idx - alpha * stride;
            let mut s = 0.0;
            for i in 0..n {
                s += e[i * n + alpha] * cur[base + i * stride];
            }
            *out = s;
        }
        cur = next;
    }
    cur
}

/// Which index pair of `R_{ijkl}` carries the sectional curvature when a
/// formula writes the tensor with four lower indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RiemannConvention {
    /// `R_{ijij} = K`, the convention used throughout this crate.
    FirstPair,
    /// `R_{ijji} = K`.
    Crossed,
}

impl RiemannConvention {
    pub fn label(self) -> &'static str {
        match self {
            RiemannConvention::FirstPair => "R_ijij=K",
            RiemannConvention::Crossed => "R_ijji=K",
        }
    }
}

impl PerturbationFields {
    fn idx2(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
    fn idx3(&self, a: usize, i: usize, j: usize) -> usize {
        (a * self.n + i) * self.n + j
    }
    fn idx4(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    /// Build from a background chart metric (no `t` dependence, x-degree ≥ 2)
    /// and jets of `h_ij` on the same chart, evaluated at the chart origin.
    pub fn from_chart(g: &ChartMetricJet, h: &[PolyJet]) -> Result<Self> {
        let n = g.dim();
        let sh = g.jet_shape();
        if sh.tdeg() != 0 {
            return Err(LabError::Domain("background metric must not depend on t".into()));
        }
        if sh.xdeg() < 2 {
            return Err(LabError::Capability("covariant Hessian of h needs x-degree >= 2".into()));
        }
        let fields = curvature_fields(g)?;
        let gam = |k: usize, i: usize, j: usize| &fields.christoffel[(k * n + i) * n + j];
        let idx3 = |a: usize, i: usize, j: usize| (a * n + i) * n + j;
        let mut nabla = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = h[i * n + j].diff(a);
                    for m in 0..n {
                        v = v
                            .sub(&gam(m, a, i).mul(&h[m * n + j]))
                            .sub(&gam(m, a, j).mul(&h[i * n + m]));
                    }
                    nabla.push(v);
                }
            }
        }
        let mut hess = Vec::with_capacity(n * n * n * n);
        for b in 0..n {
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = nabla[idx3(a, i, j)].diff(b);
                        for m in 0..n {
                            v = v
                                .sub(&gam(m, b, a).mul(&nabla[idx3(m, i, j)]))
                                .sub(&gam(m, b, i).mul(&nabla[idx3(a, m, j)]))
                                .sub(&gam(m, b, j).mul(&nabla[idx3(a, i, m)]));
                        }
                        hess.push(v.eval_base()?.constant_term());
                    }
                }
            }
        }
        let at = |v: &[PolyJet]| -> Result<Vec<f64>> {
            v.iter().map(|j| Ok(j.eval_base()?.constant_term())).collect()
        };
        let gb = at(&fields.metric)?;
        let e = orthonormal_frame(&gb, n)?;
        Ok(Self {
            n,
            riem: to_frame(&at(&fields.riemann)?, 4, n, &e),
            ric: to_frame(&at(&fields.ricci)?, 2, n, &e),
            scal: fields.scalar.eval_base()?.constant_term(),
            h: to_frame(&at(h)?, 2, n, &e),
            dh: to_frame(&at(&nabla)?, 3, n, &e),
            ddh: to_frame(&hess, 4, n, &e),
        })
    }

    /// Background of constant sectional curvature `kappa` with `h = u·g`.
    /// `grad` and `hess` are the frame components of `du` and `∇²u`.
    pub fn conformal_on_space_form(
        n: usize,
        kappa: f64,
        u: f64,
        grad: &[f64],
        hess: &[f64],
    ) -> Self {
        let mut riem = vec![0.0; n * n * n * n];
        let mut ric = vec![0.0; n * n];
        let mut h = vec![0.0; n * n];
        let mut dh = vec![0.0; n * n * n];
        let mut ddh = vec![0.0; n * n * n * n];
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for a in 0..n {
            ric[a * n + a] = (n as f64 - 1.0) * kappa;
            h[a * n + a] = u;
            for b in 0..n {
                for c in 0..n {
                    for e in 0..n {
                        riem[((a * n + b) * n + c) * n + e] = kappa * (d(a, c) * d(b, e) - d(a, e) * d(b, c));
                    }
                }
            }
            for i in 0..n {
                dh[(a * n + i) * n + i] = grad[a];
                for b in 0..n {
                    ddh[((b * n + a) * n + i) * n + i] = hess[b * n + a];
                }
            }
        }
        Self {
            n,
            riem,
            ric,
            scal: n as f64 * (n as f64 - 1.0) * kappa,
            h,
            dh,
            ddh,
        }
    }

    /// Parallel `h` (vanishing covariant derivatives) over a given curvature.
    pub fn parallel(n: usize, riem: Vec<f64>, ric: Vec<f64>, scal: f64, h: Vec<f64>) -> Self {
        Self {
            n,
            riem,
            ric,
            scal,
            h,
            dh: vec![0.0; n * n * n],
            ddh: vec![0.0; n * n * n * n],
        }
    }

    /// Same background, tensor `h×h` (with its derivatives by the product rule).
    pub fn square(&self) -> Self {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        let mut dq = vec![0.0; n * n * n];
        let mut ddq = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let hik = self.h[self.idx2(i, k)];
                    let hkj = self.h[self.idx2(k, j)];
                    q[self.idx2(i, j)] += hik * hkj;
                    for a in 0..n {
                        let da_ik = self.dh[self.idx3(a, i, k)];
                        let da_kj = self.dh[self.idx3(a, k, j)];
                        dq[self.idx3(a, i, j)] += da_ik * hkj + hik * da_kj;
                        for b in 0..n {
                            ddq[self.idx4(b, a, i, j)] += self.ddh[self.idx4(b, a, i, k)] * hkj
                                + da_ik * self.dh[self.idx3(b, k, j)]
                                + self.dh[self.idx3(b, i, k)] * da_kj
                                + hik * self.ddh[self.idx4(b, a, k, j)];
                        }
                    }
                }
            }
        }
        Self {
            n,
            riem: self.riem.clone(),
            ric: self.ric.clone(),
            scal: self.scal,
            h: q,
            dh: dq,
            ddh: ddq,
        }
    }

    pub fn with_h_scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.h.iter_mut().chain(out.dh.iter_mut()).chain(out.ddh.iter_mut()) {
            *v *= c;
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.h.iter_mut().zip(&other.h) {
            *a += b;
        }
        for (a, b) in out.dh.iter_mut().zip(&other.dh) {
            *a += b;
        }
        for (a, b) in out.ddh.iter_mut().zip(&other.ddh) {
            *a += b;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.h[self.idx2(i, i)]).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }

    pub fn ric_dot_h(&self) -> f64 {
        self.ric.iter().zip(&self.h).map(|(a, b)| a * b).sum()
    }

    /// `(δh)_j = −∇_i h_ij`
    pub fn delta_h(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| -(0..self.n).map(|i| self.dh[self.idx3(i, i, j)]).sum::<f64>())
            .collect()
    }

    /// `δ²h = ∇_j∇_i h_ij`
    pub fn delta2(&self) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.ddh[self.idx4(j, i, i, j)];
            }
        }
        s
    }

    /// `d(tr h)`
    pub fn dtr(&self) -> Vec<f64> {
        (0..self.n)
            .map(|a| (0..self.n).map(|i| self.dh[self.idx3(a, i, i)]).sum())
            .collect()
    }

    /// `∇²(tr h)`, entry `(b,a) = ∇_b∇_a tr h`
    pub fn hess_tr(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for b in 0..n {
            for a in 0..n {
                out[b * n + a] = (0..n).map(|i| self.ddh[self.idx4(b, a, i, i)]).sum();
            }
        }
        out
    }

    pub fn lap_tr(&self) -> f64 {
        let ht = self.hess_tr();
        (0..self.n).map(|a| ht[a * self.n + a]).sum()
    }

    /// `Δh`
    pub fn lap_h(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|a| self.ddh[self.idx4(a, a, i, j)]).sum();
            }
        }
        out
    }

    /// `(Rm h)_ij = R_{ikjl} h_kl`
    pub fn rm_h(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += self.riem[self.idx4(i, k, j, l)] * self.h[self.idx2(k, l)];
                    }
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    /// `Δ_E h = Δh + 2 Rm h`
    pub fn einstein_operator(&self) -> Vec<f64> {
        let lap = self.lap_h();
        let rm = self.rm_h();
        lap.iter().zip(&rm).map(|(a, b)| a + 2.0 * b).collect()
    }

    /// `Δ_L h = Δ_E h − Ric∘h − h∘Ric`
    pub fn lichnerowicz(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = self.einstein_operator();
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += self.ric[self.idx2(j, i)] * self.h[self.idx2(k, i)]
                        + self.ric[self.idx2(k, i)] * self.h[self.idx2(j, i)];
                }
                out[j * n + k] -= s;
            }
        }
        out
    }

    /// `X = ½ d(tr h) + δh` (frame components).
    pub fn x_field(&self) -> Vec<f64> {
        self.dtr()
            .iter()
            .zip(self.delta_h())
            .map(|(a, b)| 0.5 * a + b)
            .collect()
    }

    /// `(𝓛_X g)_ij = ∇_i X_j + ∇_j X_i`
    pub fn lie_x(&self) -> Vec<f64> {
        let n = self.n;
        let ht = self.hess_tr();
        // ∇_i X_j = ½ ∇_i∇_j tr h − ∇_i∇_m h_mj
        let nabla_x = |i: usize, j: usize| {
            0.5 * ht[i * n + j] - (0..n).map(|m| self.ddh[self.idx4(i, m, m, j)]).sum::<f64>()
        };
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = nabla_x(i, j) + nabla_x(j, i);
            }
        }
        out
    }

    /// `γh = −Δ tr h + δ²h − Ric·h`
    pub fn gamma(&self) -> f64 {
        -self.lap_tr() + self.delta2() - self.ric_dot_h()
    }

    /// Einstein constant λ with `Ric = (n−1)λg`, if the background is Einstein.
    pub fn einstein_constant(&self) -> Option<f64> {
        let n = self.n;
        let lambda = self.scal / (n as f64 * (n as f64 - 1.0));
        let scale = 1.0 + self.ric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { (n as f64 - 1.0) * lambda } else { 0.0 };
                if (self.ric[i * n + j] - want).abs() > 1e-9 * scale {
                    return None;
                }
            }
        }
        Some(lambda)
    }

    fn riem_conv(&self, conv: RiemannConvention, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match conv {
            RiemannConvention::FirstPair => self.riem[self.idx4(i, j, k, l)],
            RiemannConvention::Crossed => self.riem[self.idx4(i, j, l, k)],
        }
    }
}

/// Variations of the inverse metric `g + t h` at `t = 0`: `(−h^{jk}, 2 h^j_i h^{ik})`,
/// raised with `g`, both `n×n` row-major.
pub fn dg_inverse_variations(g: &[f64], h: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let ginv = invert(g, n)?;
    let mm = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| a[i * n + k] * b[k * n + j]).sum();
            }
        }
        out
    };
    let up = mm(&mm(&ginv, h), &ginv);
    let first: Vec<f64> = up.iter().map(|v| -v).collect();
    let second: Vec<f64> = mm(&mm(&up, g), &up).iter().map(|v| 2.0 * v).collect();
    Ok((first, second))
}

/// Jet oracle for the same quantities: Neumann-series inverse of `g + t h`.
pub fn dg_inverse_oracle(g: &[f64], h: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let entries = g
        .iter()
        .zip(h)
        .map(|(&a, &b)| PolyJet::from_t_coeffs(&[a, b, 0.0]))
        .collect();
    let inv = JetMatrix::new(n, entries).inverse()?;
    let first = inv.entries.iter().map(|e| e.t_coeffs()[1]).collect();
    let second = inv.entries.iter().map(|e| 2.0 * e.t_coeffs()[2]).collect();
    Ok((first, second))
}

/// Pointwise volume density variations for `h` in an orthonormal frame:
/// `(½ tr h, ¼((tr h)² − 2|h|²))`.
pub fn dvol_density(h: &[f64], n: usize) -> (f64, f64) {
    let tr: f64 = (0..n).map(|i| h[i * n + i]).sum();
    let norm2: f64 = h.iter().map(|v| v * v).sum();
    (0.5 * tr, 0.25 * (tr * tr - 2.0 * norm2))
}

/// Oracle: first and second t-derivatives of `√det(I + t h)` at 0.
pub fn dvol_density_oracle(h: &[f64], n: usize) -> Result<(f64, f64)> {
    let entries = h
        .iter()
        .enumerate()
        .map(|(idx, &v)| PolyJet::from_t_coeffs(&[if idx / n == idx % n { 1.0 } else { 0.0 }, v, 0.0]))
        .collect();
    let det = JetMatrix::new(n, entries).det();
    let c = det.sqrt()?.t_coeffs();
    Ok((c[1], 2.0 * c[2]))
}

/// `DRic·h = −½(Δ_L h + 𝓛_X g)`
pub fn dric_first(f: &PerturbationFields) -> Vec<f64> {
    let dl = f.lichnerowicz();
    let lx = f.lie_x();
    dl.iter().zip(&lx).map(|(a, b)| -0.5 * (a + b)).collect()
}

/// Second variation of Ricci in the displayed index form, reading its
/// four-index curvature with the given convention.
pub fn dric_second(f: &PerturbationFields, conv: RiemannConvention) -> Vec<f64> {
    let n = f.n;
    let h = |i: usize, j: usize| f.h[i * n + j];
    let dh = |a: usize, i: usize, j: usize| f.dh[(a * n + i) * n + j];
    let ddh = |b: usize, a: usize, i: usize, j: usize| f.ddh[((b * n + a) * n + i) * n + j];
    let delta = f.delta_h();
    let dtr = f.dtr();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                for i in 0..n {
                    let hpi = h(p, i);
                    if hpi == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for l in 0..n {
                        inner += f.riem_conv(conv, i, j, k, l) * h(p, l)
                            + f.riem_conv(conv, i, j, p, l) * h(k, l);
                    }
                    inner += -ddh(i, k, j, p) + ddh(i, p, j, k) + ddh(j, k, i, p) - ddh(j, p, i, k);
                    s += hpi * inner;
                }
            }
            for p in 0..n {
                s += 0.5 * (dh(j, k, p) + dh(k, j, p) - dh(p, j, k)) * (2.0 * delta[p] + dtr[p]);
            }
            for p in 0..n {
                for i in 0..n {
                    s += 0.5
                        * (dh(i, k, p) + dh(k, i, p) - dh(p, i, k))
                        * (dh(j, p, i) - dh(p, j, i) + dh(i, j, p));
                }
            }
            out[j * n + k] = s;
        }
    }
    out
}

/// Second variation of Ricci assembled from the Christoffel-difference
/// expansion; independent of any four-index curvature convention.
pub fn dric_second_reference(f: &PerturbationFields) -> Vec<f64> {
    let n = f.n;
    let h = |i: usize, j: usize| f.h[i * n + j];
    let dh = |a: usize, i: usize, j: usize| f.dh[(a * n + i) * n + j];
    let ddh = |b: usize, a: usize, i: usize, j: usize| f.ddh[((b * n + a) * n + i) * n + j];
    // T_jkl = ∇_j h_kl + ∇_k h_jl − ∇_l h_jk ; Ȧ^l_jk = ½T_jkl ; Ä^i_jk = −h_il T_jkl
    let t = |j: usize, k: usize, l: usize| dh(j, k, l) + dh(k, j, l) - dh(l, j, k);
    // ∇_m T_jkl
    let dt = |m: usize, j: usize, k: usize, l: usize| ddh(m, j, k, l) + ddh(m, k, j, l) - ddh(m, l, j, k);
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    // ∇_i Ä^i_jk
                    s -= dh(i, i, l) * t(j, k, l) + h(i, l) * dt(i, j, k, l);
                    // − ∇_j Ä^i_ik
                    s += dh(j, i, l) * t(i, k, l) + h(i, l) * dt(j, i, k, l);
                }
            }
            for i in 0..n {
                for p in 0..n {
                    s += 0.5 * (t(i, p, i) * t(j, k, p) - t(j, p, i) * t(i, k, p));
                }
            }
            out[j * n + k] = s;
        }
    }
    out
}

/// `DR·h = γh`
pub fn dscal_first(f: &PerturbationFields) -> f64 {
    f.gamma()
}

/// Displayed second variation of scalar curvature.
pub fn dscal_second(f: &PerturbationFields) -> f64 {
    dscal_second_terms(f).iter().map(|(_, v)| v).sum()
}

pub fn dscal_second_terms(f: &PerturbationFields) -> Vec<(&'static str, f64)> {
    let n = f.n;
    let sq = f.square();
    let lap_norm: f64 = {
        let mut s = 0.0;
        for a in 0..n {
            for i in 0..n {
                for j in 0..n {
                    s += f.ddh[((a * n + a) * n + i) * n + j] * f.h[i * n + j]
                        + f.dh[(a * n + i) * n + j].powi(2);
                }
            }
        }
        2.0 * s
    };
    let grad2: f64 = f.dh.iter().map(|v| v * v).sum();
    let dtr = f.dtr();
    let dtr2: f64 = dtr.iter().map(|v| v * v).sum();
    let ht = f.hess_tr();
    let h_hess: f64 = f.h.iter().zip(&ht).map(|(a, b)| a * b).sum();
    let delta = f.delta_h();
    let delta_dtr: f64 = delta.iter().zip(&dtr).map(|(a, b)| a * b).sum();
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                cross += f.dh[(i * n + j) * n + k] * f.dh[(j * n + i) * n + k];
            }
        }
    }
    vec![
        ("-2γ(h×h)", -2.0 * sq.gamma()),
        ("-Δ|h|²", -lap_norm),
        ("-½|∇h|²", -0.5 * grad2),
        ("-½|d tr h|²", -0.5 * dtr2),
        ("2<h,∇²tr h>", 2.0 * h_hess),
        ("-2<δh,d tr h>", -2.0 * delta_dtr),
        ("∇_i h_jk ∇_j h_ik", cross),
    ]
}

/// Second variation of scalar curvature from `R = g^{jk} Ric_jk` and the
/// second variation of Ricci.
pub fn dscal_second_from_ricci(f: &PerturbationFields, ddric: &[f64]) -> f64 {
    let n = f.n;
    let dric = dric_first(f);
    let mut s = 0.0;
    for j in 0..n {
        s += ddric[j * n + j];
        for k in 0..n {
            let hh: f64 = (0..n).map(|i| f.h[j * n + i] * f.h[i * n + k]).sum();
            s += 2.0 * hh * f.ric[j * n + k] - 2.0 * f.h[j * n + k] * dric[j * n + k];
        }
    }
    s
}

fn require_einstein(f: &PerturbationFields) -> Result<f64> {
    f.einstein_constant().ok_or_else(|| {
        LabError::Precondition("background is not Einstein at the evaluation point".into())
    })
}

/// First variation of σ_k on an Einstein background (`Ric = (n−1)λg`).
pub fn dsigma_k_first_einstein(f: &PerturbationFields, k: usize) -> Result<f64> {
    let lambda = require_einstein(f)?;
    let n = f.n;
    check_k(k, n)?;
    let nf = n as f64;
    let coeff = binomial(n - 1, k - 1) / (nf - 1.0)
        * ((nf - 2.0) / 2.0).powi(k as i32)
        * lambda.powi(k as i32 - 1);
    Ok(coeff * (-f.lap_tr() + f.delta2() - (nf - 1.0) * lambda * f.trace()))
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(LabError::Domain(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// First and second variations of the Schouten tensor built from the
/// Ricci and scalar-curvature formulas.
pub struct SchoutenVariations {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub dscal: f64,
}

pub fn schouten_variations(f: &PerturbationFields, conv: RiemannConvention) -> SchoutenVariations {
    let n = f.n;
    let c = 1.0 / (2.0 * (n as f64 - 1.0));
    let dric = dric_first(f);
    let ddric = dric_second(f, conv);
    let dscal = dscal_first(f);
    let ddscal = dscal_second(f);
    let mut first = vec![0.0; n * n];
    let mut second = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let g = if i == j { 1.0 } else { 0.0 };
            let h = f.h[i * n + j];
            first[i * n + j] = dric[i * n + j] - c * dscal * g - c * f.scal * h;
            second[i * n + j] = ddric[i * n + j] - c * ddscal * g - 2.0 * c * dscal * h;
        }
    }
    SchoutenVariations {
        first,
        second,
        dscal,
    }
}

/// Second variation of σ_k on an Einstein background, term by term.
pub fn dsigma_k_second_terms(
    f: &PerturbationFields,
    k: usize,
    conv: RiemannConvention,
) -> Result<Vec<(&'static str, f64)>> {
    let lambda = require_einstein(f)?;
    let n = f.n;
    check_k(k, n)?;
    if lambda == 0.0 {
        return Err(LabError::Precondition("second σ_k variation needs λ ≠ 0".into()));
    }
    let nf = n as f64;
    let kf = k as f64;
    let sv = schouten_variations(f, conv);
    let tr_dd: f64 = (0..n).map(|i| sv.second[i * n + i]).sum();
    let s2: f64 = sv.first.iter().map(|v| v * v).sum();
    let hs: f64 = sv.first.iter().zip(&f.h).map(|(a, b)| a * b).sum();
    let pre = binomial(n - 1, k - 1) * ((nf - 2.0) * lambda / 2.0).powi(k as i32 - 1);
    Ok(vec![
        ("tr S̈", pre * tr_dd),
        ("|Ṡ|²", -pre * 2.0 * (kf - 1.0) / (lambda * (nf - 1.0) * (nf - 2.0)) * s2),
        ("h·Ṡ", -pre * 2.0 * (nf - kf) / (nf - 1.0) * hs),
        (
            "(γh)²",
            pre * (kf - 1.0) * (nf - 2.0) / (2.0 * lambda * (nf - 1.0).powi(3)) * sv.dscal * sv.dscal,
        ),
        (
            "|h|²",
            pre * (2.0 * nf - kf - 1.0) * (nf - 2.0) / (2.0 * (nf - 1.0)) * lambda * f.norm2(),
        ),
    ])
}

pub fn dsigma_k_second_einstein(f: &PerturbationFields, k: usize, conv: RiemannConvention) -> Result<f64> {
    Ok(dsigma_k_second_terms(f, k, conv)?.iter().map(|(_, v)| v).sum())
}

/// Exact t-derivatives of curvature along `g + t h` at the chart origin,
/// with tensors expressed in the same orthonormal frame as
/// [`PerturbationFields::from_chart`].
pub struct JetOracle {
    pub point: CurvaturePoint,
    frame: Vec<f64>,
}

impl JetOracle {
    /// `g` must carry `tdeg ≥ 2`; `h` lives on the same jet shape.
    pub fn along_path(g: &ChartMetricJet, h: &[PolyJet]) -> Result<Self> {
        let path = g.with_path(h, None)?;
        let point = curvature_at_base(&path)?;
        let gb: Vec<f64> = point.metric.iter().map(PolyJet::constant_term).collect();
        let frame = orthonormal_frame(&gb, g.dim())?;
        Ok(Self { point, frame })
    }

    fn tensor_derivative(&self, jets: &[PolyJet], order: usize) -> Vec<f64> {
        let fact = if order == 2 { 2.0 } else { 1.0 };
        let raw: Vec<f64> = jets.iter().map(|j| fact * j.t_coeffs()[order]).collect();
        to_frame(&raw, 2, self.point.dim, &self.frame)
    }

    pub fn ricci(&self, order: usize) -> Vec<f64> {
        self.tensor_derivative(&self.point.ricci, order)
    }

    pub fn scalar(&self, order: usize) -> f64 {
        let fact = if order == 2 { 2.0 } else { 1.0 };
        fact * self.point.scalar.t_coeffs()[order]
    }

    pub fn sigma(&self, k: usize) -> Result<(f64, f64, f64)> {
        let jet = crate::chartcurv::sigma_k_of_point(&self.point, k)?;
        crate::chartcurv::t_derivatives(&jet)
    }
}

/// Outcome of comparing a closed-form value with an oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationReport {
    pub id: String,
    pub case: String,
    pub formula: f64,
    pub oracle: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub terms: Vec<(String, f64)>,
    /// Set when the formula fails while its oracle checks pass; holds the
    /// least-squares factor `c` minimising `|c·formula − oracle|`.
    pub fitted_coefficient: Option<f64>,
}

impl VariationReport {
    /// Relative comparison with a floor: residual / max(|oracle|, floor).
    pub fn compare(id: &str, case: &str, formula: f64, oracle: f64, tolerance: f64, floor: f64) -> Self {
        let abs = (formula - oracle).abs();
        let rel = abs / oracle.abs().max(floor);
        Self {
            id: id.to_string(),
            case: case.to_string(),
            formula,
            oracle,
            abs_residual: abs,
            rel_residual: rel,
            tolerance,
            pass: rel <= tolerance,
            terms: Vec::new(),
            fitted_coefficient: None,
        }
    }

    /// Tensor comparison by the largest entry difference.
    pub fn compare_tensor(id: &str, case: &str, formula: &[f64], oracle: &[f64], tolerance: f64, floor: f64) -> Self {
        let (mut worst, mut fv, mut ov) = (-1.0, 0.0, 0.0);
        for (a, b) in formula.iter().zip(oracle) {
            if (a - b).abs() > worst {
                worst = (a - b).abs();
                fv = *a;
                ov = *b;
            }
        }
        let scale = oracle.iter().fold(floor, |m, v| m.max(v.abs()));
        let mut r = Self::compare(id, case, fv, ov, tolerance, floor);
        r.rel_residual = worst / scale;
        r.pass = r.rel_residual <= tolerance;
        r
    }

    pub fn with_terms(mut self, terms: &[(&str, f64)]) -> Self {
        self.terms = terms.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }
}

/// Least-squares factor `c` minimising `Σ (c·formula_i − oracle_i)²`.
pub fn fit_coefficient(formula: &[f64], oracle: &[f64]) -> Option<f64> {
    let num: f64 = formula.iter().zip(oracle).map(|(a, b)| a * b).sum();
    let den: f64 = formula.iter().map(|a| a * a).sum();
    (den > 0.0).then(|| num / den)
}
