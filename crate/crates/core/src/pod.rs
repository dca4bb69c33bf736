//! POD bases from snapshots and the reduced Galerkin system.
//!
//! A basis is a Euclidean-orthonormal coefficient matrix `R̃` (`N_g × m`);
//! mode `i` is the finite-element function with nodal values `R̃[:, i]`.
//! The reduced step solves `R̃ᵀA^kR̃ α^k = R̃ᵀb^k + R̃ᵀCR̃ α^{k−1}`.

use crate::error::{Error, Result};
use crate::fem::{FullOrderModel, OperatorSet};
use crate::linalg::{self, thin_svd, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub columns: DenseMatrix,
    pub times: Vec<f64>,
}

impl SnapshotSet {
    pub fn new(columns: DenseMatrix, times: Vec<f64>) -> Result<Self> {
        if columns.ncols() == 0 {
            return Err(Error::InvalidArgument("snapshot set needs at least one column".into()));
        }
        if columns.ncols() != times.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} snapshot columns but {} time stamps",
                columns.ncols(),
                times.len()
            )));
        }
        Ok(Self { columns, times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: DenseMatrix,
}

impl PodBasis {
    /// Wrap a matrix assumed to have orthonormal columns.
    pub fn from_orthonormal(modes: DenseMatrix) -> Self {
        Self { modes }
    }

    pub fn empty(n: usize) -> Self {
        Self { modes: DenseMatrix::zeros(n, 0) }
    }

    pub fn modes(&self) -> &DenseMatrix {
        &self.modes
    }

    pub fn m(&self) -> usize {
        self.modes.ncols()
    }

    pub fn num_dofs(&self) -> usize {
        self.modes.nrows()
    }

    /// `R̃ α`.
    pub fn expand(&self, alpha: &[f64]) -> Vec<f64> {
        self.modes.mul_vec(alpha)
    }

    /// Euclidean projection coefficients `R̃ᵀ u`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.modes.tr_mul_vec(u)
    }

    /// `max |R̃ᵀR̃ − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.modes.tr_matmul(&self.modes);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Column-major text dump: `rows cols` header, then one value per line.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.modes.nrows(), self.modes.ncols())?;
        for v in self.modes.as_slice() {
            writeln!(out, "{v:.17e}")?;
        }
        Ok(())
    }
}

/// Smallest `k` with `σ₁ + … + σ_k > γ Σσ` (strict), or 0 when empty.
pub fn energy_mode_count(singular_values: &[f64], gamma: f64) -> usize {
    let total: f64 = singular_values.iter().sum();
    let mut partial = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        partial += s;
        if partial > gamma * total {
            return i + 1;
        }
    }
    // γ ≥ 1 or rounding: keep everything.
    singular_values.len()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("energy threshold must lie in (0, 1), got {gamma}")))
    }
}

/// Leading left singular vectors of `columns` capturing a `gamma` fraction of
/// the singular-value sum.
pub fn truncated_left_vectors(columns: &DenseMatrix, gamma: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    check_gamma(gamma)?;
    let svd = thin_svd(columns);
    if svd.rank() == 0 {
        return Err(Error::EmptyBasis);
    }
    let m = energy_mode_count(&svd.singular_values, gamma);
    Ok((svd.left_vectors.leading_columns(m), svd.singular_values))
}

/// Build a basis from snapshots with the energy threshold `gamma`.
pub fn pod_mode(snapshots: &SnapshotSet, gamma: f64) -> Result<PodBasis> {
    let (modes, _) = truncated_left_vectors(&snapshots.columns, gamma)?;
    Ok(PodBasis { modes })
}

/// Merge new snapshots into an existing basis.
///
/// The new window is compressed to `m₁` modes with `gamma2`, concatenated
/// with the current basis, and the concatenation re-truncated with `gamma3`.
pub fn update_pod_mode(window: &SnapshotSet, gamma2: f64, gamma3: f64, old: &PodBasis) -> Result<PodBasis> {
    if window.columns.nrows() != old.num_dofs() && old.m() > 0 {
        return Err(Error::DimensionMismatch("window and basis have different DOF counts".into()));
    }
    let (r1, _) = truncated_left_vectors(&window.columns, gamma2)?;
    let stacked = r1.hcat(&old.modes)?;
    let (modes, _) = truncated_left_vectors(&stacked, gamma3)?;
    Ok(PodBasis { modes })
}

/// `R̃ᵀ X R̃`.
pub fn project_matrix(x: &SparseMatrix, basis: &PodBasis) -> DenseMatrix {
    basis.modes.tr_matmul(&x.mul_dense(&basis.modes))
}

#[derive(Debug, Clone)]
pub struct ProjectedSeparable {
    pub g1: DenseMatrix,
    pub g2: DenseMatrix,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReducedOperators {
    pub mass: DenseMatrix,
    pub stiffness: DenseMatrix,
    pub reaction: DenseMatrix,
    pub separable: Option<ProjectedSeparable>,
}

pub fn project_operators(ops: &OperatorSet, basis: &PodBasis) -> Result<ReducedOperators> {
    if ops.num_dofs() != basis.num_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "operators have {} DOFs, basis has {}",
            ops.num_dofs(),
            basis.num_dofs()
        )));
    }
    Ok(ReducedOperators {
        mass: project_matrix(&ops.mass, basis),
        stiffness: project_matrix(&ops.stiffness, basis),
        reaction: project_matrix(&ops.reaction, basis),
        separable: ops.separable.as_ref().map(|s| ProjectedSeparable {
            g1: project_matrix(&s.g1, basis),
            g2: project_matrix(&s.g2, basis),
            b1: basis.project(&s.b1),
            b2: basis.project(&s.b2),
        }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub k: usize,
    pub t: f64,
    pub alpha: Vec<f64>,
}

/// A basis together with its projected operators.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub basis: PodBasis,
    pub ops: ReducedOperators,
}

impl ReducedModel {
    pub fn new(fom: &FullOrderModel, basis: PodBasis) -> Result<Self> {
        let ops = project_operators(&fom.ops, &basis)?;
        Ok(Self { basis, ops })
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    /// `Ā^k`, `b̄^k`: composed from projected parts when separable, otherwise
    /// projected from the freshly assembled fine system.
    pub fn system_at(&self, fom: &FullOrderModel, k: usize) -> (DenseMatrix, Vec<f64>) {
        let dt = fom.dt;
        let t = fom.time(k);
        match (&self.ops.separable, &fom.problem.separable) {
            (Some(parts), Some(sep)) => {
                let (b3, f3) = ((sep.b3)(t), (sep.f3)(t));
                let mut a = self.ops.mass.clone();
                a.add_scaled(dt * fom.problem.epsilon, &self.ops.stiffness);
                a.add_scaled(dt, &parts.g1);
                a.add_scaled(dt * b3, &parts.g2);
                a.add_scaled(dt, &self.ops.reaction);
                let b = parts.b1.iter().zip(&parts.b2).map(|(x, y)| dt * (x + f3 * y)).collect();
                (a, b)
            }
            _ => {
                let (a, b) = fom.system(k);
                (project_matrix(&a, &self.basis), self.basis.project(&b))
            }
        }
    }

    /// Advance `α^{k−1}` to `α^k`.
    pub fn step(&self, fom: &FullOrderModel, k: usize, alpha_prev: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.system_at(fom, k);
        pod_step(&a, &b, &self.ops.mass, alpha_prev)
    }
}

/// Solve `Ā α = b̄ + C̄ α_prev`.
pub fn pod_step(a_bar: &DenseMatrix, b_bar: &[f64], c_bar: &DenseMatrix, alpha_prev: &[f64]) -> Result<Vec<f64>> {
    let mut rhs = c_bar.mul_vec(alpha_prev);
    if rhs.len() != b_bar.len() {
        return Err(Error::DimensionMismatch("reduced load length".into()));
    }
    linalg::axpy(1.0, b_bar, &mut rhs);
    linalg::solve_dense(a_bar, &rhs)
}
