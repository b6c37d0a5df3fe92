//! Dense complex matrices for few-level systems.
//!
//! Storage is row-major and heap backed, but the hot-path kernels
//! (`mul_into`, `mul_adj_into`, ...) write into caller-owned buffers so an
//! integrator can keep its inner loop allocation-free.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported Hilbert-space dimension.
pub const MAX_DIM: usize = 16;

/// Tolerance used when a routine requires Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not Hermitian: entries ({row},{col}) and ({col},{row}) differ by {defect:e}")]
    NotHermitian { row: usize, col: usize, defect: f64 },
    #[error("row {row} has {len} entries, expected {dim}")]
    Ragged { row: usize, len: usize, dim: usize },
    #[error("dimension {0} outside the supported range 1..={MAX_DIM}")]
    BadDimension(usize),
}

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, MatrixError> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(MatrixError::BadDimension(dim));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(MatrixError::Ragged {
                    row,
                    len: r.len(),
                    dim,
                });
            }
            data.extend(r);
        }
        Ok(Self { dim, data })
    }

    /// Convenience constructor from real-valued rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &z) in diag.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// `|k><k|` in dimension `dim`.
    pub fn projector(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// Largest `|M_ij - conj(M_ji)|` and the pair where it occurs.
    pub fn hermiticity_defect(&self) -> (f64, usize, usize) {
        let n = self.dim;
        let mut worst = (0.0, 0, 0);
        for i in 0..n {
            for j in i..n {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst.0 {
                    worst = (d, i, j);
                }
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<(), MatrixError> {
        let (defect, row, col) = self.hermiticity_defect();
        if defect > tol {
            Err(MatrixError::NotHermitian { row, col, defect })
        } else {
            Ok(())
        }
    }

    /// `(M + M†)/2`. The (j,i) entry is written as the conjugate of the
    /// (i,j) entry, so the result is Hermitian bit-for-bit.
    pub fn hermitize(&self) -> Self {
        let mut out = self.clone();
        out.hermitize_in_place();
        out
    }

    pub fn hermitize_in_place(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self[(i, i)];
            self[(i, i)] = C64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    fn check_same_dim(&self, other: &Self) -> Result<(), MatrixError> {
        if self.dim != other.dim {
            Err(MatrixError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            })
        } else {
            Ok(())
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        self.check_same_dim(other)?;
        let mut out = Self::zeros(self.dim);
        mul_into(self, other, &mut out);
        Ok(out)
    }

    /// Hermitian eigenvalues in ascending order.
    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>, MatrixError> {
        let scale = self.max_abs().max(1.0);
        self.check_hermitian(HERMITIAN_TOL * scale)?;
        Ok(hermitian_eigenvalues(self))
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64, MatrixError> {
        Ok(self.eigenvalues_hermitian()?[0])
    }

    /// True when `self + margin·I` admits a Cholesky factorization, i.e. the
    /// smallest eigenvalue of the (assumed Hermitian) matrix exceeds `-margin`.
    pub fn is_positive_with_margin(&self, margin: f64) -> bool {
        let n = self.dim;
        let mut l = [C64::new(0.0, 0.0); MAX_DIM * MAX_DIM];
        for j in 0..n {
            let mut d = self[(j, j)].re + margin;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = C64::new(d, 0.0);
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in addition");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in subtraction");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("dimension mismatch in product")
    }
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, MatrixError> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(&ab - &ba)
}

/// `AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, MatrixError> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    Ok(&ab + &ba)
}

/// `out = A·B`.
#[inline]
pub fn mul_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.dim;
    debug_assert!(b.dim == n && out.dim == n);
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += a.data[i * n + k] * b.data[k * n + j];
            }
            out.data[i * n + j] = s;
        }
    }
}

/// `out = A·B†`.
#[inline]
pub fn mul_adj_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let n = a.dim;
    debug_assert!(b.dim == n && out.dim == n);
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += a.data[i * n + k] * b.data[j * n + k].conj();
            }
            out.data[i * n + j] = s;
        }
    }
}

/// `out += s·A`.
#[inline]
pub fn add_scaled(out: &mut CMatrix, a: &CMatrix, s: C64) {
    debug_assert_eq!(out.dim, a.dim);
    for (o, &x) in out.data.iter_mut().zip(&a.data) {
        *o += x * s;
    }
}

/// Eigenvalues of a Hermitian matrix via cyclic Jacobi on the real
/// symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`, whose spectrum is
/// that of `H` with every eigenvalue doubled.
fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.dim;
    let m = 2 * n;
    let mut s = vec![0.0f64; m * m];
    for i in 0..n {
        for j in 0..n {
            // symmetrize against rounding in the input
            let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    jacobi_eigenvalues(&mut s, m);
    let mut all: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    // each eigenvalue appears twice
    all.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn jacobi_eigenvalues(a: &mut [f64], m: usize) {
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm {
            return;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - sn * akq;
                    a[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - sn * aqk;
                    a[q * m + k] = sn * apk + c * aqk;
                }
            }
        }
    }
}

/// Pauli matrices, used throughout examples and tests.
pub mod pauli {
    use super::{CMatrix, C64};

    pub fn x() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn y() -> CMatrix {
        let i = C64::new(0.0, 1.0);
        CMatrix::from_rows(vec![vec![C64::new(0.0, 0.0), -i], vec![i, C64::new(0.0, 0.0)]])
            .unwrap()
    }

    pub fn z() -> CMatrix {
        CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    /// `σ₋ = |0><1|` with `|0>` the ground state.
    pub fn lowering() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap()
    }

    /// `σ₊ = |1><0|`.
    pub fn raising() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap()
    }
}
