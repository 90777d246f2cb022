//! Small complex linear algebra: dense square matrices, CSR sparse matrices
//! and a scaling-and-squaring matrix exponential.
//!
//! Dimensions here are a few hundred at most, so everything is written for
//! clarity over blocking or SIMD.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::Float;

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &Self) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            let out_row = &mut out.data[r * n..(r + 1) * n];
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, v.len());
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|c| (0..self.dim).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| (r..self.dim).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }

    /// Solves `self * X = rhs` by LU decomposition with partial pivoting.
    /// Returns `None` when the matrix is numerically singular.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut lu = self.clone();
        let mut x = rhs.clone();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| lu[(a, col)].norm().total_cmp(&lu[(b, col)].norm()))
                .unwrap_or(col);
            if lu[(pivot, col)].norm() < f64::MIN_POSITIVE {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    lu.data.swap(pivot * n + c, col * n + c);
                    x.data.swap(pivot * n + c, col * n + c);
                }
            }
            let inv = ONE / lu[(col, col)];
            for r in col + 1..n {
                let factor = lu[(r, col)] * inv;
                if factor == ZERO {
                    continue;
                }
                for c in col..n {
                    let v = lu[(col, c)];
                    lu[(r, c)] -= factor * v;
                }
                for c in 0..n {
                    let v = x[(col, c)];
                    x[(r, c)] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = ONE / lu[(col, col)];
            for c in 0..n {
                x[(col, c)] *= inv;
            }
            for r in 0..col {
                let factor = lu[(r, col)];
                if factor == ZERO {
                    continue;
                }
                for c in 0..n {
                    let v = x[(col, c)];
                    x[(r, c)] -= factor * v;
                }
            }
        }
        Some(x)
    }

    /// Attempts a Cholesky factorization of `self + shift * I`.
    /// Succeeds exactly when the shifted Hermitian matrix is positive definite.
    pub fn cholesky_ok(&self, shift: f64) -> bool {
        let n = self.dim;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re + shift;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let d = d.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        true
    }

    /// Matrix exponential by scaling and squaring with a degree-13 Padé
    /// approximant.
    pub fn expm(&self) -> Self {
        let n = self.dim;
        if n == 0 {
            return Self::zeros(0);
        }
        const THETA_13: f64 = 5.371_920_351_148_152;
        let norm = self.norm1();
        let squarings = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale(C64::new(0.5.powi(squarings as i32), 0.0));
        let mut result = pade13(&a);
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn pade13(a: &DenseMatrix) -> DenseMatrix {
    let n = a.dim();
    let b = |k: usize| C64::new(PADE_13[k], 0.0);
    let eye = DenseMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    let mut w1 = a6.scale(b(13));
    w1.axpy(b(11), &a4);
    w1.axpy(b(9), &a2);
    let mut w = a6.matmul(&w1);
    w.axpy(b(7), &a6);
    w.axpy(b(5), &a4);
    w.axpy(b(3), &a2);
    w.axpy(b(1), &eye);
    let u = a.matmul(&w);

    let mut z1 = a6.scale(b(12));
    z1.axpy(b(10), &a4);
    z1.axpy(b(8), &a2);
    let mut v = a6.matmul(&z1);
    v.axpy(b(6), &a6);
    v.axpy(b(4), &a4);
    v.axpy(b(2), &a2);
    v.axpy(b(0), &eye);

    let p = v.add(&u);
    let q = v.sub(&u);
    q.solve(&p).expect("Padé denominator is nonsingular for scaled input")
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

/// Compressed sparse row matrix, square.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)))
    }

    /// Builds from `(row, col, value)` entries; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut entries: Vec<(usize, usize, C64)> = entries.into_iter().collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) out of range for dim {dim}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, cols: keep_cols, vals: keep_vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over stored `(row, col, value)` entries in row order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.iter().chain(other.iter().map(|(r, c, v)| (r, c, -v))))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut entries = Vec::new();
        for (r, k, a) in self.iter() {
            for kk in other.row_ptr[k]..other.row_ptr[k + 1] {
                entries.push((r, other.cols[kk], a * other.vals[kk]));
            }
        }
        Self::from_triplets(self.dim, entries)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `self * rhs` for dense `rhs`.
    pub fn mul_dense(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let n = self.dim;
        assert_eq!(n, rhs.dim());
        let mut out = DenseMatrix::zeros(n);
        let src = rhs.as_slice();
        let dst = out.as_mut_slice();
        for (r, k, a) in self.iter() {
            let (row_out, row_in) = (&mut dst[r * n..(r + 1) * n], &src[k * n..(k + 1) * n]);
            for (o, b) in row_out.iter_mut().zip(row_in) {
                *o += a * b;
            }
        }
        out
    }

    /// `lhs * self` for dense `lhs`.
    pub fn left_mul_dense(&self, lhs: &DenseMatrix) -> DenseMatrix {
        let n = self.dim;
        assert_eq!(n, lhs.dim());
        let mut out = DenseMatrix::zeros(n);
        let src = lhs.as_slice();
        let dst = out.as_mut_slice();
        for (k, c, b) in self.iter() {
            for r in 0..n {
                dst[r * n + c] += src[r * n + k] * b;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.iter().all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let m = other.dim;
        let entries = self.iter().flat_map(|(r1, c1, a)| {
            other.iter().map(move |(r2, c2, b)| (r1 * m + r2, c1 * m + c2, a * b))
        });
        Self::from_triplets(self.dim * m, entries)
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_diagonal() {
        let m = DenseMatrix::from_fn(3, |r, c| if r == c { c_(r) } else { ZERO });
        let e = m.expm();
        for i in 0..3 {
            assert!((e[(i, i)] - c_(i).exp()).norm() < 1e-13);
        }
        fn c_(i: usize) -> C64 {
            C64::new(i as f64 * 0.7 - 1.0, i as f64 * 3.0)
        }
    }

    #[test]
    fn expm_rotation_large_norm() {
        // exp(-i a X) = cos a I - i sin a X, with a large enough to force squaring
        let a = 37.3;
        let m = DenseMatrix::from_fn(2, |r, cc| if r != cc { c(0.0, -a) } else { ZERO });
        let e = m.expm();
        assert!((e[(0, 0)] - c(a.cos(), 0.0)).norm() < 1e-12);
        assert!((e[(0, 1)] - c(0.0, -a.sin())).norm() < 1e-12);
    }

    #[test]
    fn expm_nilpotent() {
        let mut m = DenseMatrix::zeros(3);
        m[(0, 1)] = c(2.0, 0.0);
        m[(1, 2)] = c(3.0, 0.0);
        let e = m.expm();
        assert!((e[(0, 2)] - c(3.0, 0.0)).norm() < 1e-13);
        assert!((e[(0, 1)] - c(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = DenseMatrix::from_fn(4, |r, cc| c((r * 3 + cc) as f64 % 5.0 + if r == cc { 4.0 } else { 0.0 }, r as f64 - cc as f64));
        let x = DenseMatrix::from_fn(4, |r, cc| c(r as f64, cc as f64 * 0.5));
        let b = a.matmul(&x);
        let sol = a.solve(&b).unwrap();
        assert!(sol.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn sparse_duplicates_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(2, [(0, 1, ONE), (0, 1, ONE), (1, 0, ONE), (1, 0, -ONE)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(2.0, 0.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn sparse_dense_products_agree() {
        let s = SparseMatrix::from_triplets(3, [(0, 1, c(1.0, 2.0)), (2, 0, c(-1.0, 0.5)), (1, 1, ONE)]);
        let d = DenseMatrix::from_fn(3, |r, cc| c(r as f64 + 1.0, cc as f64 - 1.0));
        let sd = s.to_dense();
        assert!(s.mul_dense(&d).max_abs_diff(&sd.matmul(&d)) < 1e-14);
        assert!(s.left_mul_dense(&d).max_abs_diff(&d.matmul(&sd)) < 1e-14);
        assert!(s.matmul(&s).to_dense().max_abs_diff(&sd.matmul(&sd)) < 1e-14);
    }

    #[test]
    fn cholesky_detects_indefinite() {
        let mut m = DenseMatrix::identity(2);
        assert!(m.cholesky_ok(0.0));
        m[(1, 1)] = c(-1e-6, 0.0);
        assert!(!m.cholesky_ok(1e-9));
        assert!(m.cholesky_ok(1e-5));
    }
}
