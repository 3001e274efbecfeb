//! Multilinear algebra at a point: elementary symmetric polynomials,
//! symmetric eigenproblems and generalized Kronecker delta contractions.
//!
//! σ_k of an endomorphism is available through two independent routes: the
//! eigenvalue route ([`elem_sym`] of [`SymEndo::eigenvalues`]) and the
//! determinant-free contraction route ([`sigma_via_delta`]). The second one is
//! generic over [`Ring`] so it also runs on jets.

use crate::error::{LabError, Result};

/// Largest dimension accepted by the Kronecker delta route.
pub const MAX_DELTA_DIM: usize = 6;

/// Minimal commutative ring interface used by the contraction routines.
pub trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;
}

impl Ring for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Binomial coefficient that is zero for negative lower index.
pub fn binomial_signed(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        0.0
    } else {
        binomial(n as usize, k as usize)
    }
}

/// k-th elementary symmetric polynomial of `evals`.
pub fn elem_sym(evals: &[f64], k: usize) -> Result<f64> {
    if k > evals.len() {
        return Err(LabError::Domain(format!(
            "elementary symmetric index {k} exceeds {} variables",
            evals.len()
        )));
    }
    Ok(elem_sym_all(evals)[k])
}

/// All elementary symmetric polynomials e_0..e_n.
pub fn elem_sym_all(evals: &[f64]) -> Vec<f64> {
    let n = evals.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (count, &x) in evals.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// σ_0..σ_n of the eigenvalues of an `n × n` matrix, from the traces of its
/// powers through Newton's identities (no eigen-solve).
pub fn elem_sym_of_matrix(matrix: &[f64], n: usize) -> Vec<f64> {
    let mut power = matrix.to_vec();
    let mut traces = Vec::with_capacity(n);
    for step in 0..n {
        traces.push((0..n).map(|i| power[i * n + i]).sum::<f64>());
        if step + 1 < n {
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let a = power[i * n + k];
                    for j in 0..n {
                        next[i * n + j] += a * matrix[k * n + j];
                    }
                }
            }
            power = next;
        }
    }
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut s = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * e[k - i] * traces[i - 1];
        }
        e[k] = s / k as f64;
    }
    e
}

/// Eigen-decomposition of a real symmetric matrix (row-major, `n × n`) by
/// cyclic Jacobi rotations. Returns eigenvalues in ascending order and the
/// matching eigenvectors as columns of a row-major matrix.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n, "matrix size mismatch");
    let mut a: Vec<f64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            0.5 * (matrix[i * n + j] + matrix[j * n + i])
        })
        .collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    // off-diagonal norm threshold, relative to the matrix norm
    let tol = 1e-12 * norm;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let evals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut evecs = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            evecs[row * n + col] = v[row * n + src];
        }
    }
    (evals, evecs)
}

/// Cholesky factor `L` (row-major, lower triangular) of a symmetric positive
/// definite matrix.
pub fn cholesky(matrix: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = matrix[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(LabError::Geometry(
                        "matrix is not positive definite".into(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Inverse of a small dense matrix by Gauss-Jordan elimination with pivoting.
pub fn invert(matrix: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(LabError::Geometry("singular matrix".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Mixed tensor S^i_j of a symmetric bilinear form against a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEndo {
    dim: usize,
    entries: Vec<f64>,
    /// Symmetric representative L⁻¹ B L⁻ᵀ sharing the spectrum of `entries`.
    symmetric: Vec<f64>,
}

impl SymEndo {
    /// Endomorphism given in an orthonormal frame; `entries` must be symmetric.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::Domain(format!("dimension {dim} < 2")));
        }
        if entries.len() != dim * dim {
            return Err(LabError::Domain("entry count does not match dimension".into()));
        }
        let scale = entries.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (entries[i * dim + j] - entries[j * dim + i]).abs() > 1e-12 * scale {
                    return Err(LabError::Domain(format!(
                        "entries not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            symmetric: entries.clone(),
            entries,
        })
    }

    /// Raise the first index of a symmetric bilinear form `form` with `metric`.
    pub fn from_forms(form: &[f64], metric: &[f64], dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(LabError::Domain(format!("dimension {dim} < 2")));
        }
        let l = cholesky(metric, dim)?;
        let linv = invert(&l, dim)?;
        let ginv = invert(metric, dim)?;
        let entries = matmul(&ginv, form, dim);
        let tmp = matmul(&linv, form, dim);
        let symmetric = matmul_bt(&tmp, &linv, dim);
        Ok(Self {
            dim,
            entries,
            symmetric,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        jacobi_eigen(&self.symmetric, self.dim).0
    }

    /// σ_k through the eigenvalue route.
    pub fn sigma(&self, k: usize) -> Result<f64> {
        elem_sym(&self.eigenvalues(), k)
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn matmul_bt(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = (0..n).map(|k| a[i * n + k] * b[j * n + k]).sum();
        }
    }
    c
}

/// Upper and lower index lists of a generalized Kronecker delta (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTuple {
    upper: Vec<usize>,
    lower: Vec<usize>,
    dim: usize,
}

impl IndexTuple {
    pub fn new(upper: Vec<usize>, lower: Vec<usize>, dim: usize) -> Result<Self> {
        if upper.len() != lower.len() {
            return Err(LabError::Domain(format!(
                "index tuple lengths differ ({} vs {})",
                upper.len(),
                lower.len()
            )));
        }
        if let Some(bad) = upper.iter().chain(&lower).find(|&&i| i == 0 || i > dim) {
            return Err(LabError::Domain(format!("index {bad} outside 1..={dim}")));
        }
        Ok(Self { upper, lower, dim })
    }

    pub fn upper(&self) -> &[usize] {
        &self.upper
    }

    pub fn lower(&self) -> &[usize] {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Generalized Kronecker delta δ^{upper}_{lower}: the sign of the permutation
/// taking `lower` to `upper` when both are lists of distinct indices related by
/// a permutation, and zero otherwise.
pub fn gen_kron_delta(t: &IndexTuple) -> i32 {
    delta_sign(&t.upper, &t.lower)
}

fn delta_sign(upper: &[usize], lower: &[usize]) -> i32 {
    let k = upper.len();
    for a in 0..k {
        for b in (a + 1)..k {
            if upper[a] == upper[b] || lower[a] == lower[b] {
                return 0;
            }
        }
    }
    // perm[a] = position in `lower` of upper[a]
    let mut perm = Vec::with_capacity(k);
    for u in upper {
        match lower.iter().position(|x| x == u) {
            Some(p) => perm.push(p),
            None => return 0,
        }
    }
    let mut inversions = 0;
    for a in 0..k {
        for b in (a + 1)..k {
            if perm[a] > perm[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Heap's algorithm over permutations of `0..k`.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    out.push(a.clone());
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Ordered tuples of `k` distinct indices from `0..n`.
fn distinct_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// σ_k = (1/k!) δ^{j_1…j_k}_{i_1…i_k} S^{i_1}_{j_1}⋯S^{i_k}_{j_k} over any
/// [`Ring`]. `entries` is the row-major mixed tensor, `entries[i*n + j] = S^i_j`.
///
/// Only tuples with distinct upper indices contribute, and for those only the
/// permutations of the same index set, so the sum runs over
/// n!/(n−k)! · k! terms instead of n^{2k}.
pub fn sigma_via_delta_ring<R: Ring>(entries: &[R], n: usize, k: usize) -> Result<R> {
    if n > MAX_DELTA_DIM {
        return Err(LabError::Capability(format!(
            "Kronecker delta route limited to n <= {MAX_DELTA_DIM} (got {n}); use the eigenvalue route"
        )));
    }
    if entries.len() != n * n || n == 0 {
        return Err(LabError::Domain("entry count does not match dimension".into()));
    }
    if k > n {
        return Err(LabError::Domain(format!("k = {k} exceeds n = {n}")));
    }
    let zero = entries[0].zero_like();
    if k == 0 {
        return Ok(entries[0].one_like());
    }
    let perms = permutations(k);
    let mut total = zero.clone();
    for upper in distinct_tuples(n, k) {
        for perm in &perms {
            let lower: Vec<usize> = perm.iter().map(|&p| upper[p]).collect();
            let sign = delta_sign(&lower, &upper);
            if sign == 0 {
                continue;
            }
            let mut term = entries[upper[0] * n + lower[0]].clone();
            for a in 1..k {
                term = term.mul(&entries[upper[a] * n + lower[a]]);
            }
            total = total.add(&term.scale(sign as f64));
        }
    }
    Ok(total.scale(1.0 / factorial(k)))
}

/// σ_k of an `n × n` mixed tensor by the contraction route.
pub fn sigma_via_delta(s: &SymEndo, k: usize) -> Result<f64> {
    if k == 0 || k > s.dim {
        return Err(LabError::Domain(format!(
            "contraction route needs 1 <= k <= n (k = {k}, n = {})",
            s.dim
        )));
    }
    sigma_via_delta_ring(&s.entries, s.dim, k)
}

/// Brute-force check of the contraction rule
/// δ^{j_1…j_p}_{i_1…i_p} δ^{j_1…j_k}_{i_1…i_k}
///   = p!·(n−k+p)!/(n−k)! · δ^{j_{p+1}…j_k}_{i_{p+1}…i_k},
/// summed over the repeated indices, for every assignment of the free ones.
pub fn contraction_rule_check(p: usize, k: usize, n: usize) -> Result<bool> {
    if !(p >= 1 && p < k && k <= n && n <= 5) {
        return Err(LabError::Domain(format!(
            "contraction rule needs 1 <= p < k <= n <= 5 (p = {p}, k = {k}, n = {n})"
        )));
    }
    let free = k - p;
    let factor = factorial(p) * factorial(n - k + p) / factorial(n - k);
    let summed = all_tuples(n, p);
    let mut upper = vec![0usize; k];
    let mut lower = vec![0usize; k];
    for free_upper in all_tuples(n, free) {
        for free_lower in all_tuples(n, free) {
            let mut lhs = 0i64;
            for js in &summed {
                for is in &summed {
                    let small = delta_sign(js, is);
                    if small == 0 {
                        continue;
                    }
                    upper[..p].copy_from_slice(js);
                    upper[p..].copy_from_slice(&free_upper);
                    lower[..p].copy_from_slice(is);
                    lower[p..].copy_from_slice(&free_lower);
                    lhs += (small * delta_sign(&upper, &lower)) as i64;
                }
            }
            let rhs = factor * delta_sign(&free_upper, &free_lower) as f64;
            if (lhs as f64 - rhs).abs() > 0.5 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All `k`-tuples over `0..n` (with repetition).
fn all_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = n.pow(k as u32);
    (0..total)
        .map(|mut code| {
            let mut t = vec![0; k];
            for slot in t.iter_mut().rev() {
                *slot = code % n;
                code /= n;
            }
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.gen_range(-1.0..1.0);
                m[i * n + j] = x;
                m[j * n + i] = x;
            }
        }
        m
    }

    #[test]
    fn newton_route_matches_eigen_route() {
        let m = [2.0, 0.3, -0.1, 0.3, 1.0, 0.4, -0.1, 0.4, -0.5];
        let e = elem_sym_of_matrix(&m, 3);
        let (ev, _) = jacobi_eigen(&m, 3);
        let want = elem_sym_all(&ev);
        for k in 0..=3 {
            assert!((e[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(elem_sym(&[1.0, 1.0, 1.0, 1.0], 2).unwrap(), 6.0);
        assert_eq!(elem_sym(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elem_sym(&[4.0, -2.0], 0).unwrap(), 1.0);
        assert!(matches!(elem_sym(&[1.0], 2), Err(LabError::Domain(_))));
    }

    #[test]
    fn delta_examples() {
        let t = |u: Vec<usize>, l: Vec<usize>| IndexTuple::new(u, l, 3).unwrap();
        assert_eq!(gen_kron_delta(&t(vec![1, 2], vec![1, 2])), 1);
        assert_eq!(gen_kron_delta(&t(vec![1, 2], vec![2, 1])), -1);
        assert_eq!(gen_kron_delta(&t(vec![1, 1], vec![1, 2])), 0);
        assert_eq!(gen_kron_delta(&t(vec![1, 2, 3], vec![3, 1, 2])), 1);
        assert!(IndexTuple::new(vec![1], vec![1, 2], 3).is_err());
        assert!(IndexTuple::new(vec![4], vec![1], 3).is_err());
    }

    #[test]
    fn sigma_delta_examples() {
        let s = SymEndo::new(3, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]).unwrap();
        assert!((sigma_via_delta(&s, 2).unwrap() - 11.0).abs() < 1e-12);
        let half = SymEndo::new(3, vec![0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
        assert!((sigma_via_delta(&half, 3).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn sigma_delta_random_4x4_matches_eigen_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_symmetric(&mut rng, 4);
        let s = SymEndo::new(4, m).unwrap();
        let via_eig = s.sigma(3).unwrap();
        let via_delta = sigma_via_delta(&s, 3).unwrap();
        assert!((via_eig - via_delta).abs() < 1e-12 * (1.0 + via_eig.abs()));
    }

    #[test]
    fn delta_route_rejects_large_dimension() {
        let n = 7;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        let s = SymEndo::new(n, m).unwrap();
        assert!(matches!(sigma_via_delta(&s, 2), Err(LabError::Capability(_))));
        assert!((s.sigma(2).unwrap() - 21.0).abs() < 1e-12);
    }

    #[test]
    fn contraction_rule_examples() {
        assert!(contraction_rule_check(1, 2, 3).unwrap());
        assert!(contraction_rule_check(2, 3, 4).unwrap());
        assert!(matches!(
            contraction_rule_check(1, 1, 3),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let m = random_symmetric(&mut rng, n);
        let (w, v) = jacobi_eigen(&m, n);
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| v[i * n + k] * w[k] * v[j * n + k]).sum();
                assert!((r - m[i * n + j]).abs() < 1e-12);
            }
        }
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn from_forms_uses_metric() {
        // B = 2g for any metric gives S = 2·Id.
        let g = vec![2.0, 0.5, 0.5, 1.0];
        let b: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        let s = SymEndo::from_forms(&b, &g, 2).unwrap();
        for (i, e) in s.entries().iter().enumerate() {
            let expected = if i == 0 || i == 3 { 2.0 } else { 0.0 };
            assert!((e - expected).abs() < 1e-14);
        }
        let ev = s.eigenvalues();
        assert!((ev[0] - 2.0).abs() < 1e-13 && (ev[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn newton_identities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = elem_sym_all(&x);
            let p: Vec<f64> = (0..=n).map(|j| x.iter().map(|v| v.powi(j as i32)).sum()).collect();
            for k in 1..=n {
                let rhs: f64 = (1..=k)
                    .map(|i| if i % 2 == 1 { 1.0 } else { -1.0 } * e[k - i] * p[i])
                    .sum::<f64>()
                    / k as f64;
                assert!((e[k] - rhs).abs() <= 1e-10 * (1.0 + e[k].abs()));
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial_signed(3, -1), 0.0);
        assert_eq!(factorial(5), 120.0);
    }
}
