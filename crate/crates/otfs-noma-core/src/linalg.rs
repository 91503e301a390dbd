//! Small dense complex-matrix toolkit backing the explicit-matrix oracles.
//!
//! The detection oracles need ordinary dense products, Hermitian transposes
//! and one matrix inverse at modest sizes (NM ≤ 1024). A row-major `Vec`
//! matrix with Gauss-Jordan elimination covers that without pulling a
//! linear-algebra dependency into the `no_std` core.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

use crate::fmath;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix must be square to invert, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: Complex64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn add_assign_at(&mut self, r: usize, c: usize, value: Complex64) {
        self.data[r * self.cols + c] += value;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::ZERO {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&rhs.data) {
            *o -= b;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= factor;
        }
        out
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: x.len(),
                right_cols: 1,
            });
        }
        let mut out = vec![Complex64::ZERO; self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::ZERO;
            for (a, &b) in self.row(r).iter().zip(x) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        fmath::sqrt(self.data.iter().map(|v| v.norm_sqr()).sum())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut work = self.clone();
        let mut inv = Self::identity(n);
        // Pivots below this fraction of the largest entry are treated as singular.
        let scale = work
            .data
            .iter()
            .map(|v| v.norm_sqr())
            .fold(0.0_f64, f64::max);
        let threshold = scale * 1e-28;

        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = work.get(col, col).norm_sqr();
            for r in col + 1..n {
                let mag = work.get(r, col).norm_sqr();
                if mag > pivot_mag {
                    pivot_row = r;
                    pivot_mag = mag;
                }
            }
            if pivot_mag <= threshold {
                return Err(LinalgError::Singular { pivot: col });
            }
            if pivot_row != col {
                for c in 0..n {
                    let tmp = work.get(col, c);
                    work.set(col, c, work.get(pivot_row, c));
                    work.set(pivot_row, c, tmp);
                    let tmp = inv.get(col, c);
                    inv.set(col, c, inv.get(pivot_row, c));
                    inv.set(pivot_row, c, tmp);
                }
            }
            let pivot = work.get(col, col);
            let pivot_inv = Complex64::ONE / pivot;
            for c in 0..n {
                let v = work.get(col, c) * pivot_inv;
                work.set(col, c, v);
                let v = inv.get(col, c) * pivot_inv;
                inv.set(col, c, v);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = work.get(r, col);
                if factor == Complex64::ZERO {
                    continue;
                }
                for c in 0..n {
                    let v = work.get(r, c) - factor * work.get(col, c);
                    work.set(r, c, v);
                    let v = inv.get(r, c) - factor * inv.get(col, c);
                    inv.set(r, c, v);
                }
            }
        }
        Ok(inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn multiply_against_hand_computed_2x2() {
        let a = CMatrix::from_fn(2, 2, |r, c_| c((r * 2 + c_) as f64, 1.0));
        let b = CMatrix::identity(2).scale(c(0.0, 1.0));
        let ab = a.mul(&b).unwrap();
        // (x + j) * j = -1 + jx
        assert_eq!(ab.get(0, 0), c(-1.0, 0.0));
        assert_eq!(ab.get(1, 0), c(-1.0, 2.0));
    }

    #[test]
    fn inverse_recovers_identity() {
        let a = CMatrix::from_fn(4, 4, |r, c_| {
            if r == c_ {
                c(2.0 + r as f64, 0.5)
            } else {
                c(0.3 * (r as f64 - c_ as f64), 0.1 * (r + c_) as f64)
            }
        });
        let inv = a.inverse().unwrap();
        let prod = a.mul(&inv).unwrap();
        let err = prod.sub(&CMatrix::identity(4)).unwrap().frobenius_norm();
        assert!(err < 1e-12, "‖A·A⁻¹ − I‖ = {err}");
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut a = CMatrix::zeros(3, 3);
        a.set(0, 0, c(1.0, 0.0));
        a.set(1, 1, c(1.0, 0.0));
        // third row/column all zero
        assert!(matches!(a.inverse(), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let a = CMatrix::from_fn(2, 3, |r, c_| c(r as f64, c_ as f64));
        let ah = a.adjoint();
        assert_eq!(ah.rows(), 3);
        assert_eq!(ah.cols(), 2);
        assert_eq!(ah.get(2, 1), c(1.0, -2.0));
    }

    #[test]
    fn mismatched_product_errors() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(2, 3);
        assert!(matches!(
            a.mul(&b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }
}
