//! Thin SVD of tall matrices (`N × s`, `s ≪ N`) by one-sided Jacobi.
//!
//! Each sweep costs `O(s² N)`. A symmetric Jacobi eigensolver is kept for
//! small dense eigenproblems.

use crate::linalg::dense::{axpy, dot, norm2, DenseMatrix};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RANK_THRESHOLD: f64 = 1e-14;

const JACOBI_TOL: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `N × r` with orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// Nonincreasing, strictly positive.
    pub singular_values: Vec<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen: square input");
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let total: f64 = m.frobenius_norm();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * total || total == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    (values, vectors)
}

/// Left singular vectors and singular values of a tall matrix.
///
/// One-sided (Hestenes) Jacobi: column pairs of a working copy are rotated
/// until mutually orthogonal, so `σᵢ` are the column norms and the left
/// vectors the normalized columns. Accuracy is relative to each `σᵢ`, unlike
/// the Gram route. Singular values with `σ² ≤ RANK_THRESHOLD · σ₁²` are dropped.
pub fn thin_svd(u: &DenseMatrix) -> SvdResult {
    let n = u.nrows();
    let s = u.ncols();
    let mut cols: Vec<Vec<f64>> = u.columns().map(|c| c.to_vec()).collect();
    let mut sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..s {
            for q in (p + 1)..s {
                let apq = dot(&cols[p], &cols[q]);
                let (app, aqq) = (sq[p], sq[q]);
                if app == 0.0 || aqq == 0.0 || apq.abs() <= JACOBI_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - sn * yq;
                    *y = sn * xp + c * yq;
                }
                sq[p] = dot(&cols[p], &cols[p]);
                sq[q] = dot(&cols[q], &cols[q]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| sq[j].total_cmp(&sq[i]));
    let lambda_max = order.first().map_or(0.0, |&i| sq[i]);
    let mut left = DenseMatrix::zeros(n, 0);
    let mut sigmas = Vec::new();
    if !(lambda_max > 0.0) {
        return SvdResult { left_vectors: left, singular_values: sigmas };
    }
    for &i in &order {
        if sq[i] <= RANK_THRESHOLD * lambda_max {
            break;
        }
        let sigma = norm2(&cols[i]);
        let mut r: Vec<f64> = cols[i].iter().map(|v| v / sigma).collect();
        for q in left.columns() {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
        let rn = norm2(&r);
        r.iter_mut().for_each(|v| *v /= rn);
        left.push_column(&r).expect("consistent column length");
        sigmas.push(sigma);
    }
    SvdResult { left_vectors: left, singular_values: sigmas }
}
