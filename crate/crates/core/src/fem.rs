//! P1 finite elements and implicit Euler for periodic advection–diffusion.
//!
//! The fine system at step `k` is
//! `A^k u^k = b^k + C u^{k−1}` with `A^k = C + δt (εK + G(t_k) + M_c)` and
//! `b^k = δt (f(t_k), φ_i)`. Every operator lives on the mesh's P1 pattern.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, SparseMatrix};
use crate::mesh3d::{Element, Mesh};
use crate::problems::ProblemSpec;

/// 4-point degree-2 rule on the tetrahedron, barycentric points, equal weights.
const QUAD_A: f64 = 0.585_410_196_624_968_5;
const QUAD_B: f64 = 0.138_196_601_125_010_5;
pub const QUADRATURE_POINTS: [[f64; 4]; 4] = [
    [QUAD_A, QUAD_B, QUAD_B, QUAD_B],
    [QUAD_B, QUAD_A, QUAD_B, QUAD_B],
    [QUAD_B, QUAD_B, QUAD_A, QUAD_B],
    [QUAD_B, QUAD_B, QUAD_B, QUAD_A],
];
pub const QUADRATURE_WEIGHT: f64 = 0.25;

/// Exact P1 element mass matrix: `|τ|/10` on the diagonal, `|τ|/20` off it.
pub fn local_mass(volume: f64) -> [[f64; 4]; 4] {
    let mut m = [[volume / 20.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = volume / 10.0;
    }
    m
}

pub fn local_stiffness(e: &Element) -> [[f64; 4]; 4] {
    let g = e.barycentric_gradients();
    let vol = e.volume();
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = vol * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
        }
    }
    k
}

/// `(B·∇φ_j, φ_i)` on one element by quadrature.
pub fn local_advection<F: Fn(&[f64; 3]) -> [f64; 3]>(e: &Element, velocity: F) -> [[f64; 4]; 4] {
    let g = e.barycentric_gradients();
    let vol = e.volume();
    let mut out = [[0.0; 4]; 4];
    for lam in &QUADRATURE_POINTS {
        let b = velocity(&e.point(lam));
        let bg: Vec<f64> = g.iter().map(|gj| b[0] * gj[0] + b[1] * gj[1] + b[2] * gj[2]).collect();
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += QUADRATURE_WEIGHT * vol * bg[j] * lam[i];
            }
        }
    }
    out
}

fn local_reaction<F: Fn(&[f64; 3]) -> f64>(e: &Element, c: F) -> [[f64; 4]; 4] {
    let vol = e.volume();
    let mut out = [[0.0; 4]; 4];
    for lam in &QUADRATURE_POINTS {
        let cq = c(&e.point(lam));
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += QUADRATURE_WEIGHT * vol * cq * lam[i] * lam[j];
            }
        }
    }
    out
}

fn local_load<F: Fn(&[f64; 3]) -> f64>(e: &Element, f: F) -> [f64; 4] {
    let vol = e.volume();
    let mut out = [0.0; 4];
    for lam in &QUADRATURE_POINTS {
        let fq = f(&e.point(lam));
        for i in 0..4 {
            out[i] += QUADRATURE_WEIGHT * vol * fq * lam[i];
        }
    }
    out
}

/// Zero-valued matrix with the P1 connectivity of `mesh`.
pub fn p1_pattern(mesh: &Mesh) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(16 * mesh.elements().len());
    for e in mesh.elements() {
        for &i in &e.nodes {
            for &j in &e.nodes {
                triplets.push((i, j, 0.0));
            }
        }
    }
    let n = mesh.num_dofs();
    SparseMatrix::from_triplets(n, n, &triplets).expect("element nodes within range")
}

/// Element-by-element accumulation into a fixed pattern. Elements are visited
/// in mesh order, so each entry sums its contributions in a fixed order.
fn assemble_matrix<L: Fn(&Element) -> [[f64; 4]; 4]>(mesh: &Mesh, pattern: &SparseMatrix, local: L) -> SparseMatrix {
    let mut out = pattern.zeros_like();
    let offsets = pattern.row_offsets().to_vec();
    let cols = pattern.col_indices().to_vec();
    let values = out.values_mut();
    for e in mesh.elements() {
        let loc = local(e);
        for (a, &i) in e.nodes.iter().enumerate() {
            let row = &cols[offsets[i]..offsets[i + 1]];
            for (b, &j) in e.nodes.iter().enumerate() {
                let pos = row.binary_search(&j).expect("entry in P1 pattern");
                values[offsets[i] + pos] += loc[a][b];
            }
        }
    }
    out
}

fn assemble_vector<L: Fn(&Element) -> [f64; 4]>(mesh: &Mesh, local: L) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_dofs()];
    for e in mesh.elements() {
        let loc = local(e);
        for (a, &i) in e.nodes.iter().enumerate() {
            out[i] += loc[a];
        }
    }
    out
}

pub fn assemble_mass(mesh: &Mesh, pattern: &SparseMatrix) -> SparseMatrix {
    assemble_matrix(mesh, pattern, |e| local_mass(e.volume()))
}

pub fn assemble_stiffness(mesh: &Mesh, pattern: &SparseMatrix) -> SparseMatrix {
    assemble_matrix(mesh, pattern, local_stiffness)
}

pub fn assemble_advection<F: Fn(&[f64; 3]) -> [f64; 3]>(mesh: &Mesh, pattern: &SparseMatrix, velocity: F) -> SparseMatrix {
    assemble_matrix(mesh, pattern, |e| local_advection(e, &velocity))
}

pub fn assemble_reaction<F: Fn(&[f64; 3]) -> f64>(mesh: &Mesh, pattern: &SparseMatrix, c: F) -> SparseMatrix {
    assemble_matrix(mesh, pattern, |e| local_reaction(e, &c))
}

/// `((f, φ_i))_i` by quadrature.
pub fn assemble_load<F: Fn(&[f64; 3]) -> f64>(mesh: &Mesh, f: F) -> Vec<f64> {
    assemble_vector(mesh, |e| local_load(e, &f))
}

/// Time-invariant pieces of the separable fast path.
#[derive(Debug, Clone)]
pub struct SeparableParts {
    pub g1: SparseMatrix,
    pub g2: SparseMatrix,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub reaction: SparseMatrix,
    /// Present when the problem is separable in time and space.
    pub separable: Option<SeparableParts>,
}

impl OperatorSet {
    pub fn num_dofs(&self) -> usize {
        self.mass.nrows()
    }
}

/// Assemble everything that does not depend on time.
pub fn assemble_invariant(mesh: &Mesh, problem: &ProblemSpec) -> OperatorSet {
    let pattern = p1_pattern(mesh);
    let mass = assemble_mass(mesh, &pattern);
    let stiffness = assemble_stiffness(mesh, &pattern);
    let reaction = match &problem.reaction {
        Some(c) => assemble_reaction(mesh, &pattern, |x| c(x)),
        None => pattern.zeros_like(),
    };
    let separable = problem.separable.as_ref().map(|s| SeparableParts {
        g1: assemble_advection(mesh, &pattern, |x| (s.b1)(x)),
        g2: assemble_advection(mesh, &pattern, |x| (s.b2)(x)),
        b1: assemble_load(mesh, |x| (s.f1)(x)),
        b2: assemble_load(mesh, |x| (s.f2)(x)),
    });
    OperatorSet { mass, stiffness, reaction, separable }
}

/// `A^k` and `b^k` at time `t` by the separable fast path when available.
pub fn system_at(ops: &OperatorSet, mesh: &Mesh, problem: &ProblemSpec, t: f64, dt: f64) -> (SparseMatrix, Vec<f64>) {
    match (&ops.separable, &problem.separable) {
        (Some(parts), Some(sep)) => {
            let b3 = (sep.b3)(t);
            let f3 = (sep.f3)(t);
            let mut a = ops.mass.clone();
            add(&mut a, dt * problem.epsilon, &ops.stiffness);
            add(&mut a, dt, &parts.g1);
            add(&mut a, dt * b3, &parts.g2);
            add(&mut a, dt, &ops.reaction);
            let b = parts.b1.iter().zip(&parts.b2).map(|(x, y)| dt * (x + f3 * y)).collect();
            (a, b)
        }
        _ => system_at_general(ops, mesh, problem, t, dt),
    }
}

/// `A^k` and `b^k` by re-running quadrature on `B(·, t)` and `f(·, t)`.
pub fn system_at_general(ops: &OperatorSet, mesh: &Mesh, problem: &ProblemSpec, t: f64, dt: f64) -> (SparseMatrix, Vec<f64>) {
    let g = assemble_advection(mesh, &ops.mass, |x| problem.velocity_at(x, t));
    let mut a = ops.mass.clone();
    add(&mut a, dt * problem.epsilon, &ops.stiffness);
    add(&mut a, dt, &g);
    add(&mut a, dt, &ops.reaction);
    let b = assemble_load(mesh, |x| problem.source_at(x, t)).into_iter().map(|v| dt * v).collect();
    (a, b)
}

fn add(a: &mut SparseMatrix, alpha: f64, other: &SparseMatrix) {
    if alpha != 0.0 {
        a.add_scaled(alpha, other).expect("operators share the P1 pattern");
    }
}

/// One implicit Euler step: solve `A u = b + C u_prev`.
pub fn fem_step(a: &SparseMatrix, mass: &SparseMatrix, u_prev: &[f64], b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let rhs = step_rhs(mass, u_prev, b)?;
    let u = linalg::solve_sparse_with(a, &rhs, Some(u_prev), rel_tol, Default::default())?;
    debug_assert!({
        let r: Vec<f64> = a.matvec(&u).iter().zip(&rhs).map(|(x, y)| x - y).collect();
        linalg::norm2(&r) <= rel_tol * linalg::norm2(&rhs) * (1.0 + 1e-8) || linalg::norm2(&rhs) == 0.0
    });
    Ok(u)
}

pub(crate) fn step_rhs(mass: &SparseMatrix, u_prev: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if u_prev.len() != mass.ncols() || b.len() != mass.nrows() {
        return Err(Error::DimensionMismatch("fem_step vector lengths".into()));
    }
    let mut rhs = mass.matvec(u_prev);
    linalg::axpy(1.0, b, &mut rhs);
    Ok(rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub k: usize,
    pub t: f64,
    pub u: Vec<f64>,
}

/// Mesh, problem, and invariant operators for one fine (or coarse) space.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    pub mesh: Mesh,
    pub problem: ProblemSpec,
    pub ops: OperatorSet,
    pub dt: f64,
    pub rel_tol: f64,
}

impl FullOrderModel {
    pub fn new(mesh: Mesh, problem: ProblemSpec, dt: f64, rel_tol: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        if (mesh.kappa() - problem.kappa).abs() > 1e-12 * problem.kappa {
            return Err(Error::InvalidArgument("mesh period differs from problem period".into()));
        }
        let ops = assemble_invariant(&mesh, &problem);
        Ok(Self { mesh, problem, ops, dt, rel_tol })
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn system(&self, k: usize) -> (SparseMatrix, Vec<f64>) {
        system_at(&self.ops, &self.mesh, &self.problem, self.time(k), self.dt)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.mesh.interpolate(|x| (self.problem.initial)(x))
    }

    /// Advance `u^{k−1}` to `u^k`.
    pub fn step(&self, k: usize, u_prev: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.system(k);
        fem_step(&a, &self.ops.mass, u_prev, &b, self.rel_tol)
    }

    /// `‖u‖_C = √(uᵀ C u)`, the discrete L² norm.
    pub fn mass_norm(&self, u: &[f64]) -> f64 {
        linalg::dot(u, &self.ops.mass.matvec(u)).max(0.0).sqrt()
    }
}

/// Streaming full-order time integration.
#[derive(Debug, Clone)]
pub struct FemStepper<'a> {
    model: &'a FullOrderModel,
    state: FullState,
}

impl<'a> FemStepper<'a> {
    pub fn new(model: &'a FullOrderModel) -> Self {
        let u = model.initial_state();
        Self { model, state: FullState { k: 0, t: 0.0, u } }
    }

    pub fn from_state(model: &'a FullOrderModel, k: usize, u: Vec<f64>) -> Self {
        Self { model, state: FullState { k, t: model.time(k), u } }
    }

    pub fn state(&self) -> &FullState {
        &self.state
    }

    pub fn advance(&mut self) -> Result<&FullState> {
        let k = self.state.k + 1;
        let u = self.model.step(k, &self.state.u)?;
        self.state = FullState { k, t: self.model.time(k), u };
        Ok(&self.state)
    }

    /// Step until index `k` (no-op when already there).
    pub fn advance_to(&mut self, k: usize) -> Result<&FullState> {
        while self.state.k < k {
            self.advance()?;
        }
        Ok(&self.state)
    }
}

#[derive(Debug, Clone)]
pub struct FemRun {
    pub trajectory: Vec<FullState>,
    /// States at indices `0, δM, 2δM, …`.
    pub snapshots: DenseMatrix,
    pub snapshot_times: Vec<f64>,
}

/// Number of `dt` steps in `span`, requiring integer divisibility up to rounding.
pub fn steps_in(span: f64, dt: f64) -> Result<usize> {
    let ratio = span / dt;
    let rounded = ratio.round();
    if !(ratio >= -1e-9) || (ratio - rounded).abs() > 1e-8 * rounded.max(1.0) {
        return Err(Error::InvalidArgument(format!("{span} is not a multiple of the step {dt}")));
    }
    Ok(rounded as usize)
}

/// Integrate on `[0, t_end]` keeping the whole trajectory.
pub fn run_fem(model: &FullOrderModel, t_end: f64, snapshot_stride: usize) -> Result<FemRun> {
    if snapshot_stride == 0 {
        return Err(Error::InvalidArgument("snapshot stride must be >= 1".into()));
    }
    let steps = steps_in(t_end, model.dt)?;
    let mut stepper = FemStepper::new(model);
    let mut trajectory = vec![stepper.state().clone()];
    let mut snapshots = DenseMatrix::zeros(model.num_dofs(), 0);
    let mut snapshot_times = Vec::new();
    snapshots.push_column(&stepper.state().u)?;
    snapshot_times.push(0.0);
    for _ in 0..steps {
        let s = stepper.advance()?.clone();
        if s.k % snapshot_stride == 0 {
            snapshots.push_column(&s.u)?;
            snapshot_times.push(s.t);
        }
        trajectory.push(s);
    }
    Ok(FemRun { trajectory, snapshots, snapshot_times })
}
