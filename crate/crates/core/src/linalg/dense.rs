//! Column-major dense matrices and the direct solver used for reduced systems.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = data[i * ncols + j];
            }
        }
        Ok(m)
    }

    /// Stack equal-length column vectors side by side.
    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for (c, col) in columns.iter().enumerate() {
            if col.len() != nrows {
                return Err(Error::DimensionMismatch(format!(
                    "column {c} has length {}, expected {nrows}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(Self { nrows, ncols: columns.len(), data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    pub fn push_column(&mut self, col: &[f64]) -> Result<()> {
        if self.ncols > 0 && col.len() != self.nrows {
            return Err(Error::DimensionMismatch("pushed column length".into()));
        }
        if self.ncols == 0 {
            self.nrows = col.len();
        }
        self.data.extend_from_slice(col);
        self.ncols += 1;
        Ok(())
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> DenseMatrix {
        assert!(k <= self.ncols);
        Self { nrows: self.nrows, ncols: k, data: self.data[..k * self.nrows].to_vec() }
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hcat(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.nrows != other.nrows {
            return Err(Error::DimensionMismatch("hcat row counts differ".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { nrows: self.nrows, ncols: self.ncols + other.ncols, data })
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec: x length");
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, aij) in y.iter_mut().zip(self.col(j)) {
                    *yi += aij * xj;
                }
            }
        }
        y
    }

    /// `selfᵀ * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "tr_mul_vec: x length");
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul: inner dimension");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let y = self.mul_vec(other.col(j));
            out.col_mut(j).copy_from_slice(&y);
        }
        out
    }

    /// `selfᵀ * other`.
    pub fn tr_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.nrows, other.nrows, "tr_matmul: inner dimension");
        let mut out = Self::zeros(self.ncols, other.ncols);
        for j in 0..other.ncols {
            for i in 0..self.ncols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        out
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Pivots below this fraction of the largest column entry are treated as zero.
const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

/// Solve `A x = rhs` by LU factorization with partial pivoting.
pub fn solve_dense(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs length {} vs {n}", rhs.len())));
    }
    let mut lu = a.clone();
    let mut x = rhs.to_vec();
    let scale = lu.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if n > 0 && scale == 0.0 {
        return Err(Error::SingularMatrix { column: 0, pivot: 0.0 });
    }

    for k in 0..n {
        let (p, pivot_abs) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > SINGULAR_PIVOT_RTOL * scale) {
            return Err(Error::SingularMatrix { column: k, pivot: pivot_abs });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            x.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let ukj = lu[(k, j)];
                lu[(i, j)] -= factor * ukj;
            }
            x[i] -= factor * x[k];
        }
    }

    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc -= lu[(k, j)] * x[j];
        }
        x[k] = acc / lu[(k, k)];
    }
    Ok(x)
}

/// Assemble the bordered matrix `[[a, col], [rowᵀ, corner]]`.
pub fn border_system(a: &DenseMatrix, col: &[f64], row: &[f64], corner: f64) -> Result<DenseMatrix> {
    let m = a.nrows();
    if a.ncols() != m || col.len() != m || row.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "bordering a {}x{} block with col {} / row {}",
            m,
            a.ncols(),
            col.len(),
            row.len()
        )));
    }
    let mut out = DenseMatrix::zeros(m + 1, m + 1);
    for j in 0..m {
        out.col_mut(j)[..m].copy_from_slice(a.col(j));
        out[(m, j)] = row[j];
    }
    out.col_mut(m)[..m].copy_from_slice(col);
    out[(m, m)] = corner;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let a = DenseMatrix::from_row_major(1, 1, &[2.0]).unwrap();
        assert_eq!(solve_dense(&a, &[4.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity_returns_rhs() {
        let rhs = vec![1.0, -2.0, 3.5, 0.25];
        let x = solve_dense(&DenseMatrix::identity(4), &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_row_major(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let x = solve_dense(&a, &[3.0, 7.0]).unwrap();
        assert_eq!(x, vec![7.0, 3.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(solve_dense(&a, &[1.0, 1.0]), Err(Error::SingularMatrix { .. })));
        let z = DenseMatrix::zeros(3, 3);
        assert!(matches!(solve_dense(&z, &[1.0, 1.0, 1.0]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn border_of_empty_block() {
        let b = border_system(&DenseMatrix::zeros(0, 0), &[], &[], 3.0).unwrap();
        assert_eq!((b.nrows(), b.ncols()), (1, 1));
        assert_eq!(b[(0, 0)], 3.0);
    }

    #[test]
    fn border_identity() {
        let b = border_system(&DenseMatrix::identity(3), &[0.0; 3], &[0.0; 3], 1.0).unwrap();
        assert_eq!(b, DenseMatrix::identity(4));
    }

    #[test]
    fn border_places_blocks() {
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = border_system(&a, &[5.0, 6.0], &[7.0, 8.0], 9.0).unwrap();
        let expected =
            DenseMatrix::from_row_major(3, 3, &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        assert_eq!(b, expected);
        assert!(border_system(&a, &[1.0], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn tr_matmul_matches_transpose_then_matmul() {
        let a = DenseMatrix::from_row_major(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DenseMatrix::from_row_major(3, 2, &[0.5, -1.0, 2.0, 0.0, 1.0, 3.0]).unwrap();
        assert_eq!(a.tr_matmul(&b), a.transpose().matmul(&b));
    }
}
