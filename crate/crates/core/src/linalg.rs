//! Dense complex matrices and the superoperator primitives used by the
//! Bloch-equation engine.
//!
//! Density matrices are vectorized column-major: `vec(X)[i + n*j] = X[i, j]`.
//! In this convention `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative residual bound for [`solve_linear`].
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;
/// Pivots below this fraction of the matrix norm are treated as zero.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-13;
/// Relative residual bound for [`null_vector`].
pub const NULL_RESIDUAL_TOL: f64 = 1e-8;
/// Trace preservation bound for generators, relative to the generator norm.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), c, "ragged rows");
                row.iter().map(|&x| C64::new(x, 0.0))
            })
            .collect();
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// `|i⟩⟨j|` in dimension `n`.
    pub fn outer_basis(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place `self += s * other`; shapes must agree.
    pub(crate) fn add_scaled(&mut self, other: &Self, s: C64) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `max |A − A†|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.matvec_unchecked(v))
    }

    pub(crate) fn matvec_unchecked(&self, v: &[C64]) -> Vec<C64> {
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix.
    pub fn vecmat(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "row vector of length {} times {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![ZERO; self.cols];
        for (row, &s) in self.data.chunks_exact(self.cols).zip(v) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += s * a;
            }
        }
        Ok(out)
    }

    /// Column-major vectorization.
    pub fn vectorize(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                v.push(self[(r, c)]);
            }
        }
        v
    }

    /// Inverse of [`ComplexMatrix::vectorize`] for an `n×n` matrix.
    pub fn unvectorize(n: usize, v: &[C64]) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::Dimension(format!(
                "vector of length {} is not a vectorized {n}x{n} matrix",
                v.len()
            )));
        }
        let mut m = Self::zeros(n, n);
        for c in 0..n {
            for r in 0..n {
                m[(r, c)] = v[r + n * c];
            }
        }
        Ok(m)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        for k in 0..a.cols {
            let s = a[(r, k)];
            if s == ZERO {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[r * b.cols..(r + 1) * b.cols];
            for (o, &x) in orow.iter_mut().zip(brow) {
                *o += s * x;
            }
        }
    }
    Ok(out)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a[(ar, ac)];
            if s == ZERO {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = s * b[(br, bc)];
                }
            }
        }
    }
    out
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `m x = rhs` by LU with partial pivoting.
pub fn solve_linear(m: &ComplexMatrix, rhs: &[C64]) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "solve needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    if rhs.len() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, matrix has {n} rows",
            rhs.len()
        )));
    }
    let norm = m.frobenius_norm();
    let tol = SINGULAR_PIVOT_TOL * norm;
    let mut a = m.data.clone();
    let mut b = rhs.to_vec();

    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|r| (r, a[r * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag <= tol || mag == 0.0 {
            return Err(Error::Singular {
                pivot: k,
                magnitude: mag,
            });
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            if f == ZERO {
                continue;
            }
            a[r * n + k] = ZERO;
            for c in k + 1..n {
                let akc = a[k * n + c];
                a[r * n + c] -= f * akc;
            }
            let bk = b[k];
            b[r] -= f * bk;
        }
    }

    let mut x = vec![ZERO; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * x[c];
        }
        x[k] = s / a[k * n + k];
    }
    Ok(x)
}

/// Returns a nonzero vector spanning the one-dimensional kernel of `m`.
///
/// Uses Gaussian elimination with complete pivoting; the number of pivots
/// that fall below `SINGULAR_PIVOT_TOL * ‖m‖` is the detected kernel
/// dimension. Anything other than exactly one is reported as
/// [`Error::Degenerate`]. The returned vector is scaled to unit max-norm.
pub fn null_vector(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "null_vector needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate { dimension: n });
    }
    let tol = SINGULAR_PIVOT_TOL * norm;
    let mut a = m.data.clone();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut rank = n;

    for k in 0..n {
        let mut best = (k, k, -1.0);
        for r in k..n {
            for c in k..n {
                let mag = a[r * n + c].norm();
                if mag > best.2 {
                    best = (r, c, mag);
                }
            }
        }
        let (pr, pc, mag) = best;
        if mag <= tol {
            rank = k;
            break;
        }
        if pr != k {
            for c in 0..n {
                a.swap(k * n + c, pr * n + c);
            }
        }
        if pc != k {
            for r in 0..n {
                a.swap(r * n + k, r * n + pc);
            }
            col_perm.swap(k, pc);
        }
        let pivot = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / pivot;
            if f == ZERO {
                continue;
            }
            a[r * n + k] = ZERO;
            for c in k + 1..n {
                let akc = a[k * n + c];
                a[r * n + c] -= f * akc;
            }
        }
    }

    if rank != n - 1 {
        return Err(Error::Degenerate {
            dimension: n - rank,
        });
    }

    // Free variable is the last permuted column.
    let mut y = vec![ZERO; n];
    y[n - 1] = ONE;
    for k in (0..n - 1).rev() {
        let mut s = ZERO;
        for c in k + 1..n {
            s -= a[k * n + c] * y[c];
        }
        y[k] = s / a[k * n + k];
    }
    let mut x = vec![ZERO; n];
    for (k, &orig) in col_perm.iter().enumerate() {
        x[orig] = y[k];
    }
    let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in &mut x {
        *z /= scale;
    }
    Ok(x)
}

/// Relative residual `‖m x − b‖ / (‖m‖ ‖x‖ + ‖b‖)`.
pub fn relative_residual(m: &ComplexMatrix, x: &[C64], b: &[C64]) -> f64 {
    let mx = m.matvec_unchecked(x);
    let r: Vec<C64> = mx.iter().zip(b).map(|(&a, &c)| a - c).collect();
    vec_norm(&r) / (m.frobenius_norm() * vec_norm(x) + vec_norm(b))
}

/// Power-iteration estimate of the spectral norm `‖m‖₂`.
pub fn spectral_norm_estimate(m: &ComplexMatrix) -> f64 {
    let n = m.cols;
    if n == 0 {
        return 0.0;
    }
    let mh = m.adjoint();
    // Deterministic, non-symmetric start vector.
    let mut v: Vec<C64> = (0..n)
        .map(|k| C64::new(1.0 + 0.37 * k as f64, 0.11 * (k % 7) as f64))
        .collect();
    let mut sigma = 0.0;
    for _ in 0..100 {
        let nv = vec_norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        for z in &mut v {
            *z /= nv;
        }
        let w = mh.matvec_unchecked(&m.matvec_unchecked(&v));
        let next = vec_norm(&w).sqrt();
        let converged = (next - sigma).abs() <= 1e-6 * next;
        sigma = next;
        v = w;
        if converged {
            break;
        }
    }
    sigma
}

/// Eigenvalues of a Hermitian matrix in ascending order.
///
/// Runs cyclic Jacobi on the real symmetric embedding `[[A, −B], [B, A]]`
/// of `A + iB`; every eigenvalue appears twice there, so every other one is
/// kept.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension("eigenvalues need a square matrix".into()));
    }
    let n = m.rows;
    let size = 2 * n;
    let mut s = vec![0.0; size * size];
    for r in 0..n {
        for c in 0..n {
            // Symmetrize so small Hermiticity defects do not stall Jacobi.
            let z = 0.5 * (m[(r, c)] + m[(c, r)].conj());
            s[r * size + c] = z.re;
            s[(r + n) * size + c + n] = z.re;
            s[r * size + c + n] = -z.im;
            s[(r + n) * size + c] = z.im;
        }
    }
    let off = |s: &[f64]| -> f64 {
        let mut acc = 0.0;
        for r in 0..size {
            for c in 0..size {
                if r != c {
                    acc += s[r * size + c] * s[r * size + c];
                }
            }
        }
        acc
    };
    let scale: f64 = s.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        if off(&s) <= 1e-30 * scale {
            break;
        }
        for p in 0..size {
            for q in p + 1..size {
                let apq = s[p * size + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = s[p * size + p];
                let aqq = s[q * size + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..size {
                    let akp = s[k * size + p];
                    let akq = s[k * size + q];
                    s[k * size + p] = c * akp - sn * akq;
                    s[k * size + q] = sn * akp + c * akq;
                }
                for k in 0..size {
                    let apk = s[p * size + k];
                    let aqk = s[q * size + k];
                    s[p * size + k] = c * apk - sn * aqk;
                    s[q * size + k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..size).map(|k| s[k * size + k]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig.into_iter().step_by(2).collect())
}

/// An `n²×n²` generator acting on column-major vectorized `n×n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        let d2 = dim * dim;
        if matrix.rows != d2 || matrix.cols != d2 {
            return Err(Error::Dimension(format!(
                "superoperator on dimension {dim} must be {d2}x{d2}, got {}x{}",
                matrix.rows, matrix.cols
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.matrix
    }

    /// Applies the superoperator to an `n×n` operator.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows != self.dim || x.cols != self.dim {
            return Err(Error::Dimension(format!(
                "superoperator on dimension {} applied to {}x{}",
                self.dim, x.rows, x.cols
            )));
        }
        let out = self.matrix.matvec_unchecked(&x.vectorize());
        ComplexMatrix::unvectorize(self.dim, &out)
    }

    /// Row-vectorized identity, the left null vector of any trace-preserving
    /// generator.
    pub fn identity_row(dim: usize) -> Vec<C64> {
        ComplexMatrix::identity(dim).vectorize()
    }

    /// `‖vec(I)ᵀ M‖ / ‖M‖`.
    pub fn trace_preservation_error(&self) -> f64 {
        let norm = self.matrix.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        let row = self
            .matrix
            .vecmat(&Self::identity_row(self.dim))
            .expect("identity row matches by construction");
        vec_norm(&row) / norm
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preservation_error() <= TRACE_PRESERVATION_TOL
    }
}
