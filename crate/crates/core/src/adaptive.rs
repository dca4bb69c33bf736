//! The Solve / Estimate / Mark / Update loop for static and adaptive POD.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{steps_in, FemStepper, FullOrderModel};
use crate::indicators::{
    self, augmented_indicator, coarse_aux_mode, cos_angle, orthonormalize_against, random_aux_mode,
    residual_indicator, two_grid_indicator, AuxMode, IndicatorSample, ReducedStep,
};
use crate::linalg::{norm2, DenseMatrix, SparseMatrix};
use crate::mesh3d::{build_mesh, interpolation_matrix};
use crate::pod::{pod_mode, pod_step, update_pod_mode, PodBasis, ReducedModel, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorKind {
    Residual,
    TwoGrid,
    AugRandom,
    AugCoarse,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 4] =
        [IndicatorKind::Residual, IndicatorKind::TwoGrid, IndicatorKind::AugRandom, IndicatorKind::AugCoarse];

    pub fn name(self) -> &'static str {
        match self {
            IndicatorKind::Residual => "residual",
            IndicatorKind::TwoGrid => "two-grid",
            IndicatorKind::AugRandom => "aug-random",
            IndicatorKind::AugCoarse => "aug-coarse",
        }
    }

    pub fn needs_coarse(self) -> bool {
        matches!(self, IndicatorKind::TwoGrid | IndicatorKind::AugCoarse)
    }
}

impl fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndicatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown indicator `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveConfig {
    pub dt: f64,
    pub coarse_dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub update_window: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub snapshot_stride: usize,
    pub eta0: f64,
    pub indicator: Option<IndicatorKind>,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            dt: 5e-3,
            coarse_dt: 0.2,
            t0: 5.0,
            t_end: 100.0,
            update_window: 4.0,
            gamma1: 0.999,
            gamma2: 0.999,
            gamma3: 1.0 - 1e-8,
            snapshot_stride: 20,
            eta0: 1e-5,
            indicator: None,
            rel_tol: crate::linalg::DEFAULT_REL_TOL,
            seed: 0,
        }
    }
}

/// Integer time indices derived from an [`AdaptiveConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    /// Last index of the initial FEM window.
    pub k0: usize,
    /// Final index.
    pub nt: usize,
    /// Fine steps per coarse step.
    pub w: usize,
    /// Fine steps per update window.
    pub nw: usize,
}

impl AdaptiveConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("gamma3", self.gamma3)] {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {g}")));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidArgument("snapshot stride must be >= 1".into()));
        }
        if self.eta0.is_nan() || self.eta0 < 0.0 {
            return Err(Error::InvalidArgument("eta0 must be nonnegative".into()));
        }
        let k0 = steps_in(self.t0, self.dt)?;
        let nt = steps_in(self.t_end, self.dt)?;
        let w = steps_in(self.coarse_dt, self.dt)?;
        let nw = steps_in(self.update_window, self.dt)?;
        if k0 > nt {
            return Err(Error::InvalidArgument("T0 exceeds T".into()));
        }
        if w == 0 || nw == 0 {
            return Err(Error::InvalidArgument("coarse step and update window must be positive".into()));
        }
        Ok(Schedule { k0, nt, w, nw })
    }
}

/// Coarse space for the two-grid and coarse-grid augmented indicators.
#[derive(Debug, Clone)]
pub struct CoarseContext {
    pub model: FullOrderModel,
    /// Coarse-to-fine interpolation.
    pub interpolation: SparseMatrix,
}

impl CoarseContext {
    pub fn new(fine: &FullOrderModel, coarse_n: usize, coarse_dt: f64) -> Result<Self> {
        let mesh = build_mesh(coarse_n, fine.problem.kappa)?;
        let interpolation = interpolation_matrix(&mesh, &fine.mesh)?;
        let model = FullOrderModel::new(mesh, fine.problem.clone(), coarse_dt, fine.rel_tol)?;
        Ok(Self { model, interpolation })
    }

    /// Coarse FEM states at indices `0..=steps`.
    pub fn trajectory(&self, steps: usize) -> Result<Vec<Vec<f64>>> {
        let mut stepper = FemStepper::new(&self.model);
        let mut out = Vec::with_capacity(steps + 1);
        out.push(stepper.state().u.clone());
        for _ in 0..steps {
            out.push(stepper.advance()?.u.clone());
        }
        Ok(out)
    }
}

/// One emitted time instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    /// Live basis size, or `N_g` for fine steps.
    pub m: usize,
    pub fine: bool,
    /// Euclidean norm of the (expanded) state.
    pub norm: f64,
    pub eta: Option<f64>,
    pub marked: bool,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub fem_window: f64,
    pub reduced: f64,
    pub estimate: f64,
    pub update: f64,
    pub coarse: f64,
    pub reference: f64,
}

impl PhaseTimes {
    /// Wall time of the method itself, without the reference run.
    pub fn method_total(&self) -> f64 {
        self.fem_window + self.reduced + self.estimate + self.update + self.coarse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub num_dofs: usize,
    pub update_times: usize,
    /// `(k, m)` at the start of each reduced phase.
    pub m_history: Vec<(usize, usize)>,
    /// Mean basis size over reduced steps.
    pub m_average: f64,
    pub reduced_steps: usize,
    pub fine_steps: usize,
    pub checks: usize,
    pub times: PhaseTimes,
    pub final_error: Option<f64>,
    pub average_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub records: Vec<StepRecord>,
    pub samples: Vec<IndicatorSample>,
    pub stats: RunStats,
    pub basis: PodBasis,
    pub final_state: Vec<f64>,
}

/// `‖u_fem − u_approx‖₂ / ‖u_fem‖₂`.
pub fn relative_error(u_fem: &[f64], u_approx: &[f64]) -> Result<f64> {
    if u_fem.len() != u_approx.len() {
        return Err(Error::DimensionMismatch("relative_error lengths".into()));
    }
    let den = norm2(u_fem);
    if den == 0.0 {
        return Err(Error::InvalidArgument("relative error undefined for a zero reference".into()));
    }
    let num = u_fem.iter().zip(u_approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

struct Reference<'a> {
    stepper: FemStepper<'a>,
    seconds: f64,
}

impl<'a> Reference<'a> {
    fn state_at(&mut self, k: usize) -> Result<&[f64]> {
        let clock = Instant::now();
        self.stepper.advance_to(k)?;
        self.seconds += clock.elapsed().as_secs_f64();
        Ok(&self.stepper.state().u)
    }

    fn error_at(&mut self, k: usize, u: &[f64]) -> Result<Option<f64>> {
        let r = self.state_at(k)?;
        if norm2(r) == 0.0 {
            return Ok(None);
        }
        relative_error(r, u).map(Some)
    }
}

/// Coarse-space copy of the POD process supplying `u_{H,POD}`.
struct CoarseReplica<'a> {
    model: &'a FullOrderModel,
    trajectory: &'a [Vec<f64>],
    reduced: ReducedModel,
    l: usize,
    alpha: Vec<f64>,
}

impl<'a> CoarseReplica<'a> {
    fn new(
        model: &'a FullOrderModel,
        trajectory: &'a [Vec<f64>],
        l0: usize,
        stride: usize,
        gamma1: f64,
    ) -> Result<Self> {
        let ls: Vec<usize> = (0..=l0).step_by(stride).collect();
        let snaps = coarse_snapshots(model, trajectory, &ls)?;
        let basis = pod_mode(&snaps, gamma1)?;
        let alpha = basis.project(&trajectory[l0]);
        let reduced = ReducedModel::new(model, basis)?;
        Ok(Self { model, trajectory, reduced, l: l0, alpha })
    }

    fn state_at(&mut self, l: usize) -> Result<Vec<f64>> {
        while self.l < l {
            self.l += 1;
            self.alpha = self.reduced.step(self.model, self.l, &self.alpha)?;
        }
        Ok(self.reduced.basis.expand(&self.alpha))
    }

    /// Mirror a fine update over fine indices `(from, to]`.
    fn update(&mut self, from: usize, to: usize, w: usize, gamma2: f64, gamma3: f64) -> Result<()> {
        let ls: Vec<usize> = (from / w + 1..=to / w).collect();
        if !ls.is_empty() {
            let snaps = coarse_snapshots(self.model, self.trajectory, &ls)?;
            let basis = update_pod_mode(&snaps, gamma2, gamma3, &self.reduced.basis)?;
            self.reduced = ReducedModel::new(self.model, basis)?;
        }
        self.l = to / w;
        self.alpha = self.reduced.basis.project(&self.trajectory[self.l]);
        Ok(())
    }
}

fn coarse_snapshots(model: &FullOrderModel, trajectory: &[Vec<f64>], ls: &[usize]) -> Result<SnapshotSet> {
    let cols: Vec<Vec<f64>> = ls.iter().map(|&l| trajectory[l].clone()).collect();
    let times = ls.iter().map(|&l| model.time(l)).collect();
    SnapshotSet::new(DenseMatrix::from_columns(model.num_dofs(), &cols)?, times)
}

fn aux_seed(seed: u64, l: usize) -> u64 {
    seed ^ (l as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Static POD: FEM on `[0, T0]`, one basis, reduced stepping to `T`.
pub fn run_static_pod(cfg: &AdaptiveConfig, fom: &FullOrderModel, with_reference: bool) -> Result<AdaptiveRun> {
    let cfg = AdaptiveConfig { indicator: None, ..cfg.clone() };
    run_adaptive(&cfg, fom, None, with_reference)
}

/// Adaptive POD driven by `cfg.indicator`; without an indicator this is
/// static POD.
pub fn run_adaptive(
    cfg: &AdaptiveConfig,
    fom: &FullOrderModel,
    coarse: Option<&CoarseContext>,
    with_reference: bool,
) -> Result<AdaptiveRun> {
    let sched = cfg.schedule()?;
    if (fom.dt - cfg.dt).abs() > 1e-14 * cfg.dt {
        return Err(Error::InvalidArgument("model time step differs from config dt".into()));
    }
    let kind = cfg.indicator;
    let coarse = match (kind, coarse) {
        (Some(k), None) if k.needs_coarse() => {
            return Err(Error::InvalidArgument(format!("indicator `{k}` requires a coarse mesh")))
        }
        (Some(k), Some(c)) if k.needs_coarse() => {
            if (c.model.dt - cfg.coarse_dt).abs() > 1e-14 * cfg.coarse_dt {
                return Err(Error::InvalidArgument("coarse model step differs from coarse_dt".into()));
            }
            Some(c)
        }
        _ => None,
    };
    let n_g = fom.num_dofs();
    let mut times = PhaseTimes::default();
    let mut records = Vec::with_capacity(sched.nt + 1);
    let mut samples = Vec::new();

    let clock = Instant::now();
    let coarse_traj = match coarse {
        Some(c) => Some(c.trajectory(sched.nt / sched.w)?),
        None => None,
    };
    times.coarse = clock.elapsed().as_secs_f64();

    // Initial FEM window and snapshots.
    let clock = Instant::now();
    let mut stepper = FemStepper::new(fom);
    let mut snap_cols = Vec::new();
    let mut snap_times = Vec::new();
    loop {
        let s = stepper.state();
        if s.k.is_multiple_of(cfg.snapshot_stride) {
            snap_cols.push(s.u.clone());
            snap_times.push(s.t);
        }
        let norm = norm2(&s.u);
        let rel_error = (with_reference && norm > 0.0).then_some(0.0);
        records.push(StepRecord { k: s.k, t: s.t, m: n_g, fine: true, norm, eta: None, marked: false, rel_error });
        if s.k == sched.k0 {
            break;
        }
        stepper.advance()?;
    }
    let u_k0 = stepper.state().u.clone();
    times.fem_window += clock.elapsed().as_secs_f64();
    let mut fine_steps = sched.k0;

    let clock = Instant::now();
    let snaps = SnapshotSet::new(DenseMatrix::from_columns(n_g, &snap_cols)?, snap_times)?;
    drop(snap_cols);
    let basis = pod_mode(&snaps, cfg.gamma1)?;
    let mut reduced = ReducedModel::new(fom, basis)?;
    let mut alpha = reduced.basis.project(&u_k0);
    times.update += clock.elapsed().as_secs_f64();

    let mut reference = with_reference.then(|| Reference { stepper: FemStepper::from_state(fom, sched.k0, u_k0.clone()), seconds: 0.0 });
    let mut last_fine = Some((sched.k0, u_k0));
    let mut m_history = vec![(sched.k0, reduced.m())];

    let mut replica = match (kind, &coarse_traj, coarse) {
        (Some(IndicatorKind::TwoGrid), Some(traj), Some(c)) => {
            let clock = Instant::now();
            let l0 = sched.k0 / sched.w;
            let stride = (cfg.snapshot_stride as f64 / sched.w as f64).round().max(1.0) as usize;
            let r = CoarseReplica::new(&c.model, traj, l0, stride, cfg.gamma1)?;
            times.estimate += clock.elapsed().as_secs_f64();
            Some(r)
        }
        _ => None,
    };

    let mut update_times = 0;
    let mut reduced_steps = 0;
    let mut m_sum = 0usize;
    let mut checks = 0;
    let mut k = sched.k0;
    while k < sched.nt {
        let kn = k + 1;
        let clock = Instant::now();
        let (a_bar, b_bar) = reduced.system_at(fom, kn);
        let alpha_new = pod_step(&a_bar, &b_bar, &reduced.ops.mass, &alpha)?;
        times.reduced += clock.elapsed().as_secs_f64();
        reduced_steps += 1;

        let mut sample = None;
        if let Some(kind) = kind.filter(|_| kn % sched.w == 0) {
            let l = kn / sched.w;
            let clock = Instant::now();
            let mut aux_dir: Option<Vec<f64>> = None;
            let mut degenerate = false;
            let eta = match kind {
                IndicatorKind::Residual => {
                    let (a, b) = fom.system(kn);
                    residual_indicator(&a, &reduced.basis, &alpha_new, &alpha, &b, &fom.ops.mass)?
                }
                IndicatorKind::TwoGrid => {
                    let traj = coarse_traj.as_ref().expect("coarse trajectory");
                    let u_pod = replica.as_mut().expect("coarse replica").state_at(l)?;
                    two_grid_indicator(&traj[l], &u_pod)?
                }
                IndicatorKind::AugRandom | IndicatorKind::AugCoarse => {
                    let aux = if kind == IndicatorKind::AugRandom {
                        let d = random_aux_mode(n_g, aux_seed(cfg.seed, l));
                        orthonormalize_against(&d, &reduced.basis, indicators::DROP_TOL)?
                    } else {
                        let traj = coarse_traj.as_ref().expect("coarse trajectory");
                        let c = coarse.expect("coarse context");
                        coarse_aux_mode(&traj[l], &c.interpolation, &reduced.basis)?
                    };
                    let (a, b) = fom.system(kn);
                    let red = ReducedStep { a_bar: &a_bar, b_bar: &b_bar, c_bar: &reduced.ops.mass };
                    let out = augmented_indicator(&a, &b, &fom.ops.mass, red, &alpha, &aux, &reduced.basis, &alpha_new)?;
                    degenerate = out.degenerate();
                    if let AuxMode::Unit(d) = aux {
                        aux_dir = Some(d);
                    }
                    out.eta
                }
            };
            times.estimate += clock.elapsed().as_secs_f64();
            checks += 1;
            if degenerate {
                log::debug!("degenerate auxiliary mode at k = {kn}");
            }
            let cos_theta = match (&aux_dir, reference.as_mut()) {
                (Some(d), Some(r)) => {
                    let u = r.state_at(kn)?;
                    if norm2(u) > 0.0 { Some(cos_angle(d, u)?) } else { None }
                }
                _ => None,
            };
            sample = Some(IndicatorSample {
                k: kn,
                l,
                t: fom.time(kn),
                eta,
                marked: eta > cfg.eta0,
                cos_theta,
                aux_degenerate: degenerate,
            });
        }

        let marked = sample.as_ref().is_some_and(|s| s.marked);
        if let Some(s) = sample.take() {
            samples.push(s);
        }
        if !marked {
            let u = reduced.basis.expand(&alpha_new);
            let rel_error = match reference.as_mut() {
                Some(r) => r.error_at(kn, &u)?,
                None => None,
            };
            let eta = samples.last().filter(|s| s.k == kn).map(|s| s.eta);
            records.push(StepRecord { k: kn, t: fom.time(kn), m: reduced.m(), fine: false, norm: norm2(&u), eta, marked: false, rel_error });
            m_sum += reduced.m();
            alpha = alpha_new;
            k = kn;
            continue;
        }

        // Roll back to k and run the fine window (k, end].
        let eta = samples.last().map(|s| s.eta);
        let end = (k + sched.nw).min(sched.nt);
        let clock = Instant::now();
        let start_u = match last_fine.take() {
            Some((kk, u)) if kk == k => u,
            _ => reduced.basis.expand(&alpha),
        };
        let len = end - k;
        let ref_before = reference.as_ref().map_or(0.0, |r| r.seconds);
        let mut window = FemStepper::from_state(fom, k, start_u);
        let mut cols = Vec::new();
        let mut col_times = Vec::new();
        for i in 1..=len {
            let s = window.advance()?;
            if (len - i) % cfg.snapshot_stride == 0 {
                cols.push(s.u.clone());
                col_times.push(s.t);
            }
            let rel_error = match reference.as_mut() {
                Some(r) => r.error_at(s.k, &s.u)?,
                None => None,
            };
            let (eta, marked) = if i == 1 { (eta, true) } else { (None, false) };
            records.push(StepRecord { k: s.k, t: s.t, m: n_g, fine: true, norm: norm2(&s.u), eta, marked, rel_error });
        }
        let u_end = window.state().u.clone();
        let ref_spent = reference.as_ref().map_or(0.0, |r| r.seconds) - ref_before;
        times.fem_window += clock.elapsed().as_secs_f64() - ref_spent;
        fine_steps += len;

        let clock = Instant::now();
        let window_snaps = SnapshotSet::new(DenseMatrix::from_columns(n_g, &cols)?, col_times)?;
        let basis = update_pod_mode(&window_snaps, cfg.gamma2, cfg.gamma3, &reduced.basis)?;
        reduced = ReducedModel::new(fom, basis)?;
        alpha = reduced.basis.project(&u_end);
        times.update += clock.elapsed().as_secs_f64();
        if let Some(r) = replica.as_mut() {
            let clock = Instant::now();
            r.update(k, end, sched.w, cfg.gamma2, cfg.gamma3)?;
            times.estimate += clock.elapsed().as_secs_f64();
        }
        update_times += 1;
        m_history.push((end, reduced.m()));
        log::info!("update {update_times} at k = {kn}: window to {end}, m = {}", reduced.m());
        last_fine = Some((end, u_end));
        k = end;
    }

    let final_state = match last_fine {
        Some((kk, u)) if kk == sched.nt => u,
        _ => reduced.basis.expand(&alpha),
    };
    if let Some(r) = &reference {
        times.reference = r.seconds;
    }
    let errors: Vec<f64> = records.iter().filter_map(|r| r.rel_error).collect();
    let average_error = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    let final_error = records.last().and_then(|r| r.rel_error);
    let reduced_records = records.iter().filter(|r| !r.fine).count();
    let m_average = if reduced_records > 0 { m_sum as f64 / reduced_records as f64 } else { m_history[0].1 as f64 };
    let stats = RunStats {
        num_dofs: n_g,
        update_times,
        m_history,
        m_average,
        reduced_steps,
        fine_steps,
        checks,
        times,
        final_error,
        average_error,
    };
    Ok(AdaptiveRun { records, samples, stats, basis: reduced.basis, final_state })
}
