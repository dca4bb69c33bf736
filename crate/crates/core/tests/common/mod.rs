#![allow(dead_code)]

use apod_core::linalg::{DenseMatrix, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.nrows(), a.ncols(), a.as_slice())
}

pub fn sparse_to_na(a: &SparseMatrix) -> DMatrix<f64> {
    to_na(&a.to_dense())
}

pub fn from_na(a: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_col_major(a.nrows(), a.ncols(), a.as_slice().to_vec()).unwrap()
}

/// Orthonormal `n × m` matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseMatrix {
    let g = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng));
    from_na(&g.qr().q())
}

pub fn random_dense(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseMatrix {
    let data = (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_col_major(n, m, data).unwrap()
}

/// Galerkin solve on the columns of `v` with previous state `r α_prev`:
/// `(VᵀAV) x = Vᵀ(b + C r α_prev)`, assembled densely from scratch.
pub fn galerkin_oracle(
    a: &SparseMatrix,
    b: &[f64],
    c: &SparseMatrix,
    v: &DenseMatrix,
    r: &DenseMatrix,
    alpha_prev: &[f64],
) -> Vec<f64> {
    let (a, c, v, r) = (sparse_to_na(a), sparse_to_na(c), to_na(v), to_na(r));
    let lhs = v.transpose() * &a * &v;
    let rhs = v.transpose() * (DVector::from_column_slice(b) + c * (r * DVector::from_column_slice(alpha_prev)));
    lhs.lu().solve(&rhs).expect("oracle system is nonsingular").as_slice().to_vec()
}

pub fn max_rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal matrices of equal width.
pub fn max_principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let (qa, qb) = (to_na(a), to_na(b));
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let sv = residual.singular_values();
    sv.iter().cloned().fold(0.0, f64::max).min(1.0).asin()
}
