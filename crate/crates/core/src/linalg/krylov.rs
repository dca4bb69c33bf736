//! Restarted GMRES with right Jacobi preconditioning.
//!
//! Right preconditioning keeps the Arnoldi residual equal to the true
//! residual of the original system, so the stopping test is on
//! `‖b − A x‖₂ / ‖b‖₂` directly.

use crate::error::{Error, Result};
use crate::linalg::dense::{axpy, dot, norm2};
use crate::linalg::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 40, max_iter: 4000 }
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Solve `A x = rhs` to relative residual `rel_tol`, starting from zero.
pub fn solve_sparse(a: &SparseMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    solve_sparse_with(a, rhs, None, rel_tol, GmresConfig::default())
}

/// Like [`solve_sparse`] with an optional initial guess and explicit limits.
pub fn solve_sparse_with(
    a: &SparseMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    rel_tol: f64,
    cfg: GmresConfig,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs length {} vs {n}", rhs.len())));
    }
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(_) => return Err(Error::DimensionMismatch("initial guess length".into())),
        None => vec![0.0; n],
    };
    let restart = cfg.restart.clamp(1, n.max(1));
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;

    loop {
        a.matvec_into(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let r_norm = norm2(&r);
        let rel = r_norm / b_norm;
        if rel <= rel_tol {
            return Ok(x);
        }
        if iterations >= cfg.max_iter {
            return Err(Error::SolverFailure { iterations, residual: rel });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / r_norm).collect());
        // Hessenberg columns, h[j][i] = H(i, j).
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = r_norm;

        let mut used = 0;
        for j in 0..restart {
            iterations += 1;
            for ((zi, vi), di) in z.iter_mut().zip(&basis[j]).zip(&inv_diag) {
                *zi = vi * di;
            }
            a.matvec_into(&z, &mut w);

            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                axpy(-hij, v, &mut w);
            }
            // One reorthogonalization sweep.
            for (i, v) in basis.iter().enumerate() {
                let corr = dot(v, &w);
                col[i] += corr;
                axpy(-corr, v, &mut w);
            }
            let w_norm = norm2(&w);
            col[j + 1] = w_norm;

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);
            used = j + 1;

            let breakdown = w_norm <= 1e-14 * b_norm;
            if g[j + 1].abs() / b_norm <= rel_tol * 0.5 || breakdown || iterations >= cfg.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        // Back substitution on the triangular part.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut acc = g[i];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                acc -= h[k][i] * yk;
            }
            y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut z);
        }
        for ((xi, zi), di) in x.iter_mut().zip(&z).zip(&inv_diag) {
            *xi += zi * di;
        }
    }
}
