//! Error indicators for the reduced solution: residual, two-grid, and the
//! augmented-subspace indicator with one auxiliary mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, border_system, dot, norm2, DenseMatrix, SparseMatrix};
use crate::pod::PodBasis;

/// Relative size below which a Gram–Schmidt residual counts as zero.
pub const DROP_TOL: f64 = 1e-10;

/// One indicator evaluation at a check instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSample {
    /// Fine time index of the check.
    pub k: usize,
    /// Coarse time index `k / w`.
    pub l: usize,
    pub t: f64,
    pub eta: f64,
    pub marked: bool,
    pub cos_theta: Option<f64>,
    pub aux_degenerate: bool,
}

/// Outcome of orthonormalizing a candidate auxiliary direction.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxMode {
    Unit(Vec<f64>),
    Degenerate,
}

impl AuxMode {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, AuxMode::Degenerate)
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            AuxMode::Unit(v) => Some(v),
            AuxMode::Degenerate => None,
        }
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedIndicator(format!("{what}: zero reference norm")));
    }
    Ok(num / den)
}

/// `‖A R̃α_k − b − C R̃α_prev‖₂ / ‖b + C R̃α_prev‖₂`.
pub fn residual_indicator(
    a: &SparseMatrix,
    basis: &PodBasis,
    alpha_k: &[f64],
    alpha_prev: &[f64],
    b: &[f64],
    c: &SparseMatrix,
) -> Result<f64> {
    if alpha_k.len() != basis.m() || alpha_prev.len() != basis.m() || b.len() != a.nrows() {
        return Err(Error::DimensionMismatch("residual indicator inputs".into()));
    }
    let mut rhs = c.matvec(&basis.expand(alpha_prev));
    linalg::axpy(1.0, b, &mut rhs);
    let mut r = a.matvec(&basis.expand(alpha_k));
    linalg::axpy(-1.0, &rhs, &mut r);
    ratio(norm2(&r), norm2(&rhs), "residual indicator")
}

/// `‖u_H − u_{H,POD}‖₂ / ‖u_H‖₂`.
pub fn two_grid_indicator(u_h: &[f64], u_h_pod: &[f64]) -> Result<f64> {
    relative_gap(u_h, u_h_pod, "two-grid indicator")
}

fn relative_gap(reference: &[f64], approx: &[f64], what: &str) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::DimensionMismatch(format!("{what}: vector lengths differ")));
    }
    let diff: f64 = reference.iter().zip(approx).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    ratio(diff, norm2(reference), what)
}

/// Modified Gram–Schmidt of `d` against the basis columns, with one
/// re-orthogonalization sweep, then normalization.
pub fn orthonormalize_against(d: &[f64], basis: &PodBasis, drop_tol: f64) -> Result<AuxMode> {
    if d.len() != basis.num_dofs() {
        return Err(Error::DimensionMismatch("auxiliary mode length".into()));
    }
    let original = norm2(d);
    if original == 0.0 || !original.is_finite() {
        return Ok(AuxMode::Degenerate);
    }
    let mut v = d.to_vec();
    for _ in 0..2 {
        for col in basis.modes().columns() {
            let c = dot(col, &v);
            linalg::axpy(-c, col, &mut v);
        }
    }
    let rest = norm2(&v);
    if rest < drop_tol * original {
        return Ok(AuxMode::Degenerate);
    }
    v.iter_mut().for_each(|x| *x /= rest);
    Ok(AuxMode::Unit(v))
}

/// Reproducible standard-normal vector of length `n`.
pub fn random_aux_mode(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Interpolate a coarse solution to the fine space and orthonormalize it.
pub fn coarse_aux_mode(u_coarse: &[f64], interpolation: &SparseMatrix, basis: &PodBasis) -> Result<AuxMode> {
    if u_coarse.len() != interpolation.ncols() || interpolation.nrows() != basis.num_dofs() {
        return Err(Error::DimensionMismatch("coarse auxiliary mode".into()));
    }
    orthonormalize_against(&interpolation.matvec(u_coarse), basis, DROP_TOL)
}

/// `dᵀu / ‖u‖`.
pub fn cos_angle(d: &[f64], u_ref: &[f64]) -> Result<f64> {
    if d.len() != u_ref.len() {
        return Err(Error::DimensionMismatch("cos_angle lengths".into()));
    }
    ratio(dot(d, u_ref), norm2(u_ref), "cos_angle")
}

/// Reduced data at one time index, as used by the bordered solve.
#[derive(Debug, Clone, Copy)]
pub struct ReducedStep<'a> {
    pub a_bar: &'a DenseMatrix,
    pub b_bar: &'a [f64],
    pub c_bar: &'a DenseMatrix,
}

/// Solve the Galerkin system on `[R̃, d]` through the bordered matrix;
/// returns the `m + 1` coefficients.
#[allow(clippy::too_many_arguments)]
pub fn bordered_solve(
    a: &SparseMatrix,
    b: &[f64],
    c: &SparseMatrix,
    reduced: ReducedStep<'_>,
    alpha_prev: &[f64],
    d: &[f64],
    basis: &PodBasis,
) -> Result<Vec<f64>> {
    let m = basis.m();
    if reduced.a_bar.nrows() != m || reduced.b_bar.len() != m || alpha_prev.len() != m || d.len() != a.ncols() {
        return Err(Error::DimensionMismatch("bordered system inputs".into()));
    }
    let ad = a.matvec(d);
    let atd = a.tr_matvec(d);
    let col = basis.project(&ad);
    let row = basis.project(&atd);
    let corner = dot(d, &ad);
    let matrix = border_system(reduced.a_bar, &col, &row, corner)?;

    let mut rhs = reduced.c_bar.mul_vec(alpha_prev);
    linalg::axpy(1.0, reduced.b_bar, &mut rhs);
    let mut fine_rhs = c.matvec(&basis.expand(alpha_prev));
    linalg::axpy(1.0, b, &mut fine_rhs);
    rhs.push(dot(d, &fine_rhs));
    linalg::solve_dense(&matrix, &rhs)
}

/// Augmented indicator and the augmented coefficients, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedOutcome {
    pub eta: f64,
    pub augmented: Option<Vec<f64>>,
}

impl AugmentedOutcome {
    pub fn degenerate(&self) -> bool {
        self.augmented.is_none()
    }
}

/// `η = ‖(ũ_{1:m} − α_k, ũ_{m+1})‖₂ / ‖ũ‖₂` with `ũ` from [`bordered_solve`].
/// A degenerate auxiliary mode gives `η = 0`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_indicator(
    a: &SparseMatrix,
    b: &[f64],
    c: &SparseMatrix,
    reduced: ReducedStep<'_>,
    alpha_prev: &[f64],
    aux: &AuxMode,
    basis: &PodBasis,
    alpha_k: &[f64],
) -> Result<AugmentedOutcome> {
    let d = match aux {
        AuxMode::Degenerate => return Ok(AugmentedOutcome { eta: 0.0, augmented: None }),
        AuxMode::Unit(d) => d,
    };
    if alpha_k.len() != basis.m() {
        return Err(Error::DimensionMismatch("alpha_k length".into()));
    }
    let tilde = bordered_solve(a, b, c, reduced, alpha_prev, d, basis)?;
    let mut padded = alpha_k.to_vec();
    padded.push(0.0);
    let eta = relative_gap(&tilde, &padded, "augmented indicator")?;
    Ok(AugmentedOutcome { eta, augmented: Some(tilde) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_from(n: usize, cols: &[Vec<f64>]) -> PodBasis {
        PodBasis::from_orthonormal(DenseMatrix::from_columns(n, cols).unwrap())
    }

    #[test]
    fn two_grid_arithmetic() {
        assert_eq!(two_grid_indicator(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(two_grid_indicator(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((two_grid_indicator(&[3.0, 4.0], &[3.0, 0.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(two_grid_indicator(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::UndefinedIndicator(_))));
    }

    #[test]
    fn orthonormalize_cases() {
        let basis = basis_from(3, &[vec![1.0, 0.0, 0.0]]);
        let out = orthonormalize_against(&[0.0, 0.6, 0.8], &basis, DROP_TOL).unwrap();
        let v = out.vector().unwrap();
        assert!((v[1] - 0.6).abs() < 1e-12 && (v[2] - 0.8).abs() < 1e-12 && v[0] == 0.0);
        assert!(orthonormalize_against(&[2.0, 0.0, 0.0], &basis, DROP_TOL).unwrap().is_degenerate());
        assert!(orthonormalize_against(&[0.0; 3], &basis, DROP_TOL).unwrap().is_degenerate());
        let v = orthonormalize_against(&[1.0, 1.0, 0.0], &basis, DROP_TOL).unwrap();
        assert_eq!(v, AuxMode::Unit(vec![0.0, 1.0, 0.0]));
    }

    #[test]
    fn coarse_mode_with_empty_basis_is_normalized_interpolant() {
        let p = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 1.0)]).unwrap();
        let out = coarse_aux_mode(&[2.0, 2.0], &p, &PodBasis::empty(3)).unwrap();
        let s = 1.0 / 3f64.sqrt();
        for x in out.vector().unwrap() {
            assert!((x - s).abs() < 1e-15);
        }
        assert!(coarse_aux_mode(&[0.0, 0.0], &p, &PodBasis::empty(3)).unwrap().is_degenerate());
    }

    #[test]
    fn random_mode_is_reproducible() {
        assert_eq!(random_aux_mode(100, 7), random_aux_mode(100, 7));
        assert_ne!(random_aux_mode(100, 7), random_aux_mode(100, 8));
    }

    #[test]
    fn cos_angle_cases() {
        let u = [3.0, 4.0];
        assert!((cos_angle(&[0.6, 0.8], &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(cos_angle(&[0.8, -0.6], &u).unwrap().abs() < 1e-15);
        assert!(cos_angle(&[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn residual_vanishes_for_exact_solution() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0), (0, 1, 1.0)]).unwrap();
        let c = SparseMatrix::identity(2);
        let basis = basis_from(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        // A u = b + C u_prev with u = (1, 1), u_prev = (1, 0) gives b = (2, 4).
        let eta = residual_indicator(&a, &basis, &[1.0, 1.0], &[1.0, 0.0], &[2.0, 4.0], &c).unwrap();
        assert_eq!(eta, 0.0);
        let zero = residual_indicator(&a, &basis, &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], &c);
        assert!(zero.is_err());
    }

    #[test]
    fn degenerate_aux_gives_zero() {
        let a = SparseMatrix::identity(2);
        let basis = basis_from(2, &[vec![1.0, 0.0]]);
        let a_bar = DenseMatrix::identity(1);
        let red = ReducedStep { a_bar: &a_bar, b_bar: &[1.0], c_bar: &a_bar };
        let out = augmented_indicator(&a, &[1.0, 0.0], &a, red, &[0.0], &AuxMode::Degenerate, &basis, &[1.0]).unwrap();
        assert_eq!(out.eta, 0.0);
        assert!(out.degenerate());
    }
}
