//! Truncated multivariate Taylor polynomials in a deformation parameter `t`
//! and chart coordinates `x_1..x_n`.
//!
//! A [`PolyJet`] stores coefficients of `t^a x^α` for `a <= tdeg` and
//! `|α| <= xdeg`. Differentiating in `x` loses one order of validity at the
//! top degree, so every jet carries its own x-precision: coefficients of
//! total x-degree above `xprec` are unknown and kept at zero. Products and
//! compositions propagate the minimum precision, which makes insufficient
//! truncation an explicit error instead of a silent wrong answer.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{LabError, Result};
use crate::symalg::Ring;

/// Monomial layout shared by all jets of one `(nvars, tdeg, xdeg)` triple.
#[derive(Debug)]
pub struct JetShape {
    nvars: usize,
    tdeg: usize,
    xdeg: usize,
    monos: Vec<Vec<u8>>,
    degree: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with mono_i · mono_j = mono_k, sorted by degree of `k`.
    products: Vec<(u16, u16, u16)>,
    /// `products_upto[d]` = number of leading entries of `products` whose
    /// output degree is `<= d`.
    products_upto: Vec<usize>,
    /// `deriv[v]` lists `(src, dst, factor)` for d/dx_v.
    deriv: Vec<Vec<(u16, u16, f64)>>,
}

impl JetShape {
    fn build(nvars: usize, tdeg: usize, xdeg: usize) -> Self {
        let mut monos: Vec<Vec<u8>> = Vec::new();
        for d in 0..=xdeg {
            let mut cur = vec![0u8; nvars];
            push_degree(&mut monos, &mut cur, 0, d);
        }
        let degree: Vec<usize> = monos
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let lookup: HashMap<Vec<u8>, usize> = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if degree[i] + degree[j] > xdeg {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u16, j as u16, lookup[&sum] as u16));
            }
        }
        products.sort_by_key(|&(_, _, k)| degree[k as usize]);
        let products_upto = (0..=xdeg)
            .map(|d| {
                products
                    .iter()
                    .take_while(|&&(_, _, k)| degree[k as usize] <= d)
                    .count()
            })
            .collect();
        let deriv = (0..nvars)
            .map(|v| {
                monos
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m[v] > 0)
                    .map(|(i, m)| {
                        let mut lowered = m.clone();
                        lowered[v] -= 1;
                        (i as u16, lookup[&lowered] as u16, m[v] as f64)
                    })
                    .collect()
            })
            .collect();
        Self {
            nvars,
            tdeg,
            xdeg,
            monos,
            degree,
            lookup,
            products,
            products_upto,
            deriv,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn tdeg(&self) -> usize {
        self.tdeg
    }

    pub fn xdeg(&self) -> usize {
        self.xdeg
    }

    pub fn monomial_count(&self) -> usize {
        self.monos.len()
    }

    pub fn monomial(&self, idx: usize) -> &[u8] {
        &self.monos[idx]
    }

    pub fn index_of(&self, mono: &[u8]) -> Option<usize> {
        self.lookup.get(mono).copied()
    }

    fn len(&self) -> usize {
        (self.tdeg + 1) * self.monos.len()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, var: usize, remaining: usize) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if var == cur.len() - 1 {
        cur[var] = remaining as u8;
        out.push(cur.clone());
        cur[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[var] = e as u8;
        push_degree(out, cur, var + 1, remaining - e);
    }
    cur[var] = 0;
}

/// Shared layout for `(nvars, tdeg, xdeg)`.
pub fn shape(nvars: usize, tdeg: usize, xdeg: usize) -> Arc<JetShape> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<JetShape>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("jet shape cache poisoned");
    guard
        .entry((nvars, tdeg, xdeg))
        .or_insert_with(|| Arc::new(JetShape::build(nvars, tdeg, xdeg)))
        .clone()
}

/// Truncated polynomial in `(t, x_1..x_n)`.
#[derive(Clone)]
pub struct PolyJet {
    shape: Arc<JetShape>,
    /// Index `a * monomial_count + m` holds the coefficient of `t^a x^{mono_m}`.
    coeffs: Vec<f64>,
    xprec: i32,
}

impl fmt::Debug for PolyJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        let nm = self.shape.monomial_count();
        for a in 0..=self.shape.tdeg {
            for m in 0..nm {
                let c = self.coeffs[a * nm + m];
                if c != 0.0 {
                    terms.push(format!("{c:e}·t^{a}·x^{:?}", self.shape.monos[m]));
                }
            }
        }
        write!(f, "PolyJet[prec {}]({})", self.xprec, terms.join(" + "))
    }
}

impl PolyJet {
    pub fn zero(shape: &Arc<JetShape>) -> Self {
        Self {
            shape: shape.clone(),
            coeffs: vec![0.0; shape.len()],
            xprec: shape.xdeg as i32,
        }
    }

    pub fn constant(shape: &Arc<JetShape>, c: f64) -> Self {
        let mut j = Self::zero(shape);
        j.coeffs[0] = c;
        j
    }

    /// The coordinate function `x_var` (0-based).
    pub fn coordinate(shape: &Arc<JetShape>, var: usize) -> Self {
        let mut j = Self::zero(shape);
        if shape.xdeg >= 1 {
            let mut mono = vec![0u8; shape.nvars];
            mono[var] = 1;
            j.coeffs[shape.lookup[&mono]] = 1.0;
        }
        j
    }

    /// The deformation parameter `t`.
    pub fn t(shape: &Arc<JetShape>) -> Self {
        let mut j = Self::zero(shape);
        if shape.tdeg >= 1 {
            j.coeffs[shape.monos.len()] = 1.0;
        }
        j
    }

    /// Pure t-jet `c_0 + c_1 t + …` (zero-variable shape).
    pub fn from_t_coeffs(coeffs: &[f64]) -> Self {
        let s = shape(0, coeffs.len().saturating_sub(1), 0);
        let mut j = Self::zero(&s);
        j.coeffs.copy_from_slice(coeffs);
        j
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn xprec(&self) -> i32 {
        self.xprec
    }

    pub fn coeff(&self, tpow: usize, mono: &[u8]) -> f64 {
        match self.shape.index_of(mono) {
            Some(m) if tpow <= self.shape.tdeg => {
                self.coeffs[tpow * self.shape.monomial_count() + m]
            }
            _ => 0.0,
        }
    }

    pub fn set_coeff(&mut self, tpow: usize, mono: &[u8], value: f64) -> Result<()> {
        let m = self.shape.index_of(mono).ok_or_else(|| {
            LabError::Capability(format!("monomial {mono:?} beyond jet truncation"))
        })?;
        if tpow > self.shape.tdeg {
            return Err(LabError::Capability(format!(
                "t-power {tpow} beyond jet truncation {}",
                self.shape.tdeg
            )));
        }
        let nm = self.shape.monomial_count();
        self.coeffs[tpow * nm + m] = value;
        Ok(())
    }

    /// Constant term (t = 0, x = 0).
    pub fn constant_term(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficients of `t^0..t^tdeg` of a zero-variable jet.
    pub fn t_coeffs(&self) -> Vec<f64> {
        let nm = self.shape.monomial_count();
        (0..=self.shape.tdeg).map(|a| self.coeffs[a * nm]).collect()
    }

    fn same_shape(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.shape, &other.shape),
            "jet shape mismatch: ({},{},{}) vs ({},{},{})",
            self.shape.nvars,
            self.shape.tdeg,
            self.shape.xdeg,
            other.shape.nvars,
            other.shape.tdeg,
            other.shape.xdeg
        );
    }

    fn clamp_precision(&mut self) {
        let nm = self.shape.monomial_count();
        let prec = self.xprec;
        for a in 0..=self.shape.tdeg {
            for m in 0..nm {
                if self.shape.degree[m] as i32 > prec {
                    self.coeffs[a * nm + m] = 0.0;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_shape(other);
        let mut out = self.clone();
        for (o, x) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += x;
        }
        out.xprec = self.xprec.min(other.xprec);
        out.clamp_precision();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, f: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= f;
        }
        out
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same_shape(other);
        let sh = &self.shape;
        let prec = self.xprec.min(other.xprec);
        let mut out = Self::zero(sh);
        out.xprec = prec;
        if prec < 0 {
            return out;
        }
        let nm = sh.monomial_count();
        let pairs = &sh.products[..sh.products_upto[prec as usize]];
        for a in 0..=sh.tdeg {
            let lhs = &self.coeffs[a * nm..(a + 1) * nm];
            if lhs.iter().all(|&c| c == 0.0) {
                continue;
            }
            for b in 0..=(sh.tdeg - a) {
                let rhs = &other.coeffs[b * nm..(b + 1) * nm];
                let dst = (a + b) * nm;
                for &(i, j, k) in pairs {
                    let x = lhs[i as usize];
                    if x != 0.0 {
                        out.coeffs[dst + k as usize] += x * rhs[j as usize];
                    }
                }
            }
        }
        out
    }

    /// ∂/∂x_var. The result is exact one degree lower than the input.
    pub fn diff(&self, var: usize) -> Self {
        let sh = &self.shape;
        let nm = sh.monomial_count();
        let mut out = Self::zero(sh);
        out.xprec = self.xprec - 1;
        for a in 0..=sh.tdeg {
            for &(src, dst, f) in &sh.deriv[var] {
                out.coeffs[a * nm + dst as usize] += f * self.coeffs[a * nm + src as usize];
            }
        }
        out.clamp_precision();
        out
    }

    /// Restrict to x = 0, leaving a zero-variable t-jet.
    pub fn eval_base(&self) -> Result<PolyJet> {
        if self.xprec < 0 {
            return Err(LabError::Capability(
                "jet has no valid x-order left to evaluate at the base point".into(),
            ));
        }
        let nm = self.shape.monomial_count();
        let coeffs: Vec<f64> = (0..=self.shape.tdeg).map(|a| self.coeffs[a * nm]).collect();
        Ok(PolyJet::from_t_coeffs(&coeffs))
    }

    /// Re-express in a layout with smaller x-degree (and the same t-degree).
    pub fn truncate_x(&self, xdeg: usize) -> Self {
        let target = shape(self.shape.nvars, self.shape.tdeg, xdeg.min(self.shape.xdeg));
        let mut out = Self::zero(&target);
        let nm_src = self.shape.monomial_count();
        let nm_dst = target.monomial_count();
        for (m_dst, mono) in target.monos.iter().enumerate() {
            let m_src = self.shape.lookup[mono];
            for a in 0..=target.tdeg {
                out.coeffs[a * nm_dst + m_dst] = self.coeffs[a * nm_src + m_src];
            }
        }
        out.xprec = self.xprec.min(target.xdeg as i32);
        out
    }

    /// Evaluate at a chart point and a value of t (the truncated polynomial).
    pub fn evaluate(&self, x: &[f64], t: f64) -> f64 {
        let sh = &self.shape;
        let nm = sh.monomial_count();
        let mut total = 0.0;
        let mut tp = 1.0;
        for a in 0..=sh.tdeg {
            for m in 0..nm {
                let c = self.coeffs[a * nm + m];
                if c != 0.0 {
                    let mut v = c * tp;
                    for (xi, &e) in x.iter().zip(&sh.monos[m]) {
                        v *= xi.powi(e as i32);
                    }
                    total += v;
                }
            }
            tp *= t;
        }
        total
    }

    /// f(self) for a function with derivatives `derivs[j] = f^{(j)}(c)` at the
    /// constant term `c`. Enough derivatives must be supplied to reach the
    /// nilpotency order of `self − c`.
    pub fn compose(&self, derivs: &[f64]) -> Result<Self> {
        let order = self.nilpotency_order();
        if derivs.len() < order + 1 {
            return Err(LabError::Capability(format!(
                "composition needs {} derivatives, got {}",
                order + 1,
                derivs.len()
            )));
        }
        let eps = self.add_constant(-self.constant_term());
        // Horner in eps: Σ_j derivs[j]/j! eps^j
        let mut acc = PolyJet::constant(&self.shape, derivs[order] / factorial(order));
        acc.xprec = self.xprec;
        for j in (0..order).rev() {
            acc = acc.mul(&eps).add_constant(derivs[j] / factorial(j));
        }
        Ok(acc)
    }

    /// Highest power of a constant-free jet that can be non-zero.
    pub fn nilpotency_order(&self) -> usize {
        self.shape.tdeg + self.xprec.max(0) as usize
    }

    pub fn recip(&self) -> Result<Self> {
        let c = self.constant_term();
        if c == 0.0 {
            return Err(LabError::Domain("reciprocal of a jet with zero constant term".into()));
        }
        let order = self.nilpotency_order();
        let mut d = Vec::with_capacity(order + 1);
        let mut f = 1.0 / c;
        for j in 0..=order {
            d.push(f);
            f *= -((j + 1) as f64) / c;
        }
        self.compose(&d)
    }

    pub fn powf(&self, p: f64) -> Result<Self> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(LabError::Domain("real power of a jet with non-positive constant term".into()));
        }
        let order = self.nilpotency_order();
        let mut d = Vec::with_capacity(order + 1);
        let mut coef = 1.0;
        for j in 0..=order {
            d.push(coef * c.powf(p - j as f64));
            coef *= p - j as f64;
        }
        self.compose(&d)
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Result<Self> {
        let e = self.constant_term().exp();
        self.compose(&vec![e; self.nilpotency_order() + 1])
    }

    pub fn ln(&self) -> Result<Self> {
        let c = self.constant_term();
        if c <= 0.0 {
            return Err(LabError::Domain("logarithm of a jet with non-positive constant term".into()));
        }
        let order = self.nilpotency_order();
        let mut d = vec![c.ln()];
        let mut f = 1.0 / c;
        for j in 1..=order {
            d.push(f);
            f *= -(j as f64) / c;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Result<Self> {
        let c = self.constant_term();
        let cycle = [c.sin(), c.cos(), -c.sin(), -c.cos()];
        let d: Vec<f64> = (0..=self.nilpotency_order()).map(|j| cycle[j % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Result<Self> {
        let c = self.constant_term();
        let cycle = [c.cos(), -c.sin(), -c.cos(), c.sin()];
        let d: Vec<f64> = (0..=self.nilpotency_order()).map(|j| cycle[j % 4]).collect();
        self.compose(&d)
    }

    /// Largest coefficient difference against another jet of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.same_shape(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl Ring for PolyJet {
    fn zero_like(&self) -> Self {
        let mut z = PolyJet::zero(&self.shape);
        z.xprec = self.xprec;
        z
    }
    fn one_like(&self) -> Self {
        let mut z = PolyJet::constant(&self.shape, 1.0);
        z.xprec = self.xprec;
        z
    }
    fn add(&self, other: &Self) -> Self {
        PolyJet::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        PolyJet::mul(self, other)
    }
    fn scale(&self, factor: f64) -> Self {
        PolyJet::scale(self, factor)
    }
}

/// Square matrix of jets, row-major.
#[derive(Clone, Debug)]
pub struct JetMatrix {
    pub n: usize,
    pub entries: Vec<PolyJet>,
}

impl JetMatrix {
    pub fn new(n: usize, entries: Vec<PolyJet>) -> Self {
        assert_eq!(entries.len(), n * n);
        Self { n, entries }
    }

    pub fn at(&self, i: usize, j: usize) -> &PolyJet {
        &self.entries[i * self.n + j]
    }

    pub fn constant_part(&self) -> Vec<f64> {
        self.entries.iter().map(PolyJet::constant_term).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = self.at(i, 0).mul(other.at(0, j));
                for k in 1..n {
                    acc = acc.add(&self.at(i, k).mul(other.at(k, j)));
                }
                entries.push(acc);
            }
        }
        Self { n, entries }
    }

    /// Inverse by the Neumann series around the inverse of the constant part:
    /// (G₀ + E)⁻¹ = Σ_j (−G₀⁻¹E)^j G₀⁻¹, exact within truncation.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let sh = self.entries[0].shape().clone();
        let g0 = self.constant_part();
        let g0inv = crate::symalg::invert(&g0, n)?;
        let g0inv_jet = Self::from_constants(&sh, &g0inv, n);
        let pert = Self {
            n,
            entries: self
                .entries
                .iter()
                .map(|e| e.add_constant(-e.constant_term()))
                .collect(),
        };
        let step = g0inv_jet.mul(&pert).scale(-1.0);
        let order = self
            .entries
            .iter()
            .map(PolyJet::nilpotency_order)
            .max()
            .unwrap_or(0);
        let mut term = g0inv_jet.clone();
        let mut total = g0inv_jet;
        for _ in 0..order {
            term = step.mul(&term);
            total = total.add(&term);
        }
        Ok(total)
    }

    pub fn from_constants(shape: &Arc<JetShape>, values: &[f64], n: usize) -> Self {
        Self {
            n,
            entries: values.iter().map(|&v| PolyJet::constant(shape, v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn scale(&self, f: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|e| e.scale(f)).collect(),
        }
    }

    /// Determinant by cofactor expansion (n <= 4 in practice).
    pub fn det(&self) -> PolyJet {
        fn rec(m: &JetMatrix, rows: &[usize], cols: &[usize]) -> PolyJet {
            if rows.len() == 1 {
                return m.at(rows[0], cols[0]).clone();
            }
            let r = rows[0];
            let sub_rows = &rows[1..];
            let mut acc: Option<PolyJet> = None;
            for (ci, &c) in cols.iter().enumerate() {
                let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let minor = rec(m, sub_rows, &sub_cols);
                let term = m.at(r, c).mul(&minor);
                let term = if ci % 2 == 0 { term } else { term.scale(-1.0) };
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term),
                });
            }
            acc.expect("non-empty matrix")
        }
        let idx: Vec<usize> = (0..self.n).collect();
        rec(self, &idx, &idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_counts_monomials() {
        assert_eq!(shape(3, 2, 4).monomial_count(), 35);
        assert_eq!(shape(4, 0, 4).monomial_count(), 70);
        assert_eq!(shape(0, 2, 0).monomial_count(), 1);
    }

    #[test]
    fn product_and_truncation() {
        let s = shape(2, 1, 2);
        let x = PolyJet::coordinate(&s, 0);
        let y = PolyJet::coordinate(&s, 1);
        let t = PolyJet::t(&s);
        let p = x.add(&y).add_constant(1.0);
        let sq = p.mul(&p);
        assert_eq!(sq.coeff(0, &[2, 0]), 1.0);
        assert_eq!(sq.coeff(0, &[1, 1]), 2.0);
        assert_eq!(sq.coeff(0, &[1, 0]), 2.0);
        let cube = sq.mul(&p);
        // x^3 is truncated away
        assert_eq!(cube.coeff(0, &[2, 0]), 3.0);
        let tt = t.mul(&t);
        assert_eq!(tt.max_abs(), 0.0);
    }

    #[test]
    fn derivative_lowers_precision() {
        let s = shape(1, 0, 3);
        let x = PolyJet::coordinate(&s, 0);
        let cube = x.mul(&x).mul(&x);
        let d = cube.diff(0);
        assert_eq!(d.coeff(0, &[2]), 3.0);
        assert_eq!(d.xprec(), 2);
        let dddd = d.diff(0).diff(0).diff(0);
        assert!(dddd.eval_base().is_err());
    }

    #[test]
    fn elementary_functions_match_series() {
        let s = shape(1, 0, 4);
        let x = PolyJet::coordinate(&s, 0).add_constant(0.3);
        let e = x.exp().unwrap();
        for (k, f) in [1.0, 1.0, 2.0, 6.0, 24.0].iter().enumerate() {
            assert!((e.coeff(0, &[k as u8]) - 0.3f64.exp() / f).abs() < 1e-15);
        }
        let sn = x.sin().unwrap();
        assert!((sn.coeff(0, &[3]) + 0.3f64.cos() / 6.0).abs() < 1e-15);
        let r = x.recip().unwrap().mul(&x);
        assert!((r.constant_term() - 1.0).abs() < 1e-15);
        assert!(r.coeff(0, &[2]).abs() < 1e-15);
        let l = x.ln().unwrap().exp().unwrap();
        assert!(l.max_abs_diff(&x) < 1e-14);
        let q = x.sqrt().unwrap();
        assert!(q.mul(&q).max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn neumann_inverse_is_exact_within_truncation() {
        let s = shape(2, 2, 3);
        let x = PolyJet::coordinate(&s, 0);
        let y = PolyJet::coordinate(&s, 1);
        let t = PolyJet::t(&s);
        let a = x.scale(0.3).add(&t.mul(&y)).add_constant(2.0);
        let b = y.mul(&x).scale(0.1).add_constant(0.5);
        let d = t.scale(0.7).add(&y.mul(&y)).add_constant(1.5);
        let m = JetMatrix::new(2, vec![a, b.clone(), b, d]);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let expected = PolyJet::constant(&s, if i == j { 1.0 } else { 0.0 });
                assert!(id.at(i, j).max_abs_diff(&expected) < 1e-14);
            }
        }
    }

    #[test]
    fn determinant_of_diagonal() {
        let s = shape(0, 2, 0);
        let t = PolyJet::t(&s);
        let one = PolyJet::constant(&s, 1.0);
        let z = PolyJet::zero(&s);
        let m = JetMatrix::new(2, vec![one.add(&t), z.clone(), z, one.add(&t.scale(2.0))]);
        // (1+t)(1+2t) = 1 + 3t + 2t²
        assert_eq!(m.det().t_coeffs(), vec![1.0, 3.0, 2.0]);
    }
}
