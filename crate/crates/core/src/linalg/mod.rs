//! Sparse and dense linear algebra.

pub mod dense;
pub mod krylov;
pub mod sparse;
pub mod svd;

pub use dense::{axpy, border_system, dot, norm2, solve_dense, DenseMatrix};
pub use krylov::{solve_sparse, solve_sparse_with, GmresConfig, DEFAULT_REL_TOL};
pub use sparse::SparseMatrix;
pub use svd::{symmetric_eigen, thin_svd, SvdResult};
