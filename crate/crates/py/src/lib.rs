//! Python bindings: meshes, full-order models, POD, indicators and experiment runs.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use apod_core::adaptive::{relative_error as core_relative_error, IndicatorKind};
use apod_core::cli::{parse_config, print_config, run_experiment as core_run_experiment};
use apod_core::fem::{FemStepper, FullOrderModel};
use apod_core::indicators::{cos_angle as core_cos_angle, two_grid_indicator as core_two_grid};
use apod_core::linalg::{thin_svd as core_thin_svd, DenseMatrix};
use apod_core::mesh3d::{build_mesh, Mesh as CoreMesh};
use apod_core::pod::{energy_mode_count as core_energy_mode_count, pod_mode as core_pod_mode, SnapshotSet};
use apod_core::problems::problem_by_name;

fn err(e: apod_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn columns_to_matrix(columns: &[Vec<f64>]) -> PyResult<DenseMatrix> {
    let n = columns.first().map_or(0, Vec::len);
    DenseMatrix::from_columns(n, columns).map_err(err)
}

fn matrix_to_columns(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.columns().map(|c| c.to_vec()).collect()
}

/// Periodic Kuhn tetrahedral mesh of the cube `[0, kappa)^3`.
#[pyclass(unsendable)]
struct Mesh {
    inner: CoreMesh,
}

#[pymethods]
impl Mesh {
    #[new]
    #[pyo3(signature = (n, kappa = 2.0 * std::f64::consts::PI))]
    fn new(n: usize, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: build_mesh(n, kappa).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_dofs(&self) -> usize {
        self.inner.num_dofs()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.elements().len()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn total_volume(&self) -> f64 {
        self.inner.total_volume()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().to_vec()
    }
}

/// P1 finite-element model with implicit Euler time stepping.
#[pyclass(unsendable)]
struct Model {
    inner: FullOrderModel,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (problem, epsilon, n, dt, abc_w = 1.0, rel_tol = 1e-10))]
    fn new(problem: &str, epsilon: f64, n: usize, dt: f64, abc_w: f64, rel_tol: f64) -> PyResult<Self> {
        let spec = problem_by_name(problem, epsilon, abc_w).map_err(err)?;
        let mesh = build_mesh(n, spec.kappa).map_err(err)?;
        Ok(Self { inner: FullOrderModel::new(mesh, spec, dt, rel_tol).map_err(err)? })
    }

    #[getter]
    fn num_dofs(&self) -> usize {
        self.inner.num_dofs()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn initial_state(&self) -> Vec<f64> {
        self.inner.initial_state()
    }

    fn mass_norm(&self, u: Vec<f64>) -> PyResult<f64> {
        if u.len() != self.inner.num_dofs() {
            return Err(PyValueError::new_err("state length does not match the number of DOFs"));
        }
        Ok(self.inner.mass_norm(&u))
    }

    /// States `u^0 .. u^steps` with `stride` spacing, as `(times, states)`.
    #[pyo3(signature = (steps, stride = 1))]
    fn trajectory(&self, steps: usize, stride: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        if stride == 0 {
            return Err(PyValueError::new_err("stride must be positive"));
        }
        let mut stepper = FemStepper::new(&self.inner);
        let (mut times, mut states) = (vec![0.0], vec![self.inner.initial_state()]);
        for k in 1..=steps {
            let s = stepper.advance().map_err(err)?;
            if k % stride == 0 {
                times.push(s.t);
                states.push(s.u.clone());
            }
        }
        Ok((times, states))
    }
}

/// Singular values and left singular vectors (as columns) of a snapshot matrix.
#[pyfunction]
fn thin_svd(columns: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let svd = core_thin_svd(&columns_to_matrix(&columns)?);
    Ok((svd.singular_values.clone(), matrix_to_columns(&svd.left_vectors)))
}

#[pyfunction]
fn energy_mode_count(singular_values: Vec<f64>, gamma: f64) -> usize {
    core_energy_mode_count(&singular_values, gamma)
}

/// POD modes (as columns) of snapshot columns at energy level `gamma`.
#[pyfunction]
#[pyo3(signature = (columns, gamma = 0.999))]
fn pod_mode(columns: Vec<Vec<f64>>, gamma: f64) -> PyResult<Vec<Vec<f64>>> {
    let times = (0..columns.len()).map(|i| i as f64).collect();
    let set = SnapshotSet::new(columns_to_matrix(&columns)?, times).map_err(err)?;
    Ok(matrix_to_columns(core_pod_mode(&set, gamma).map_err(err)?.modes()))
}

#[pyfunction]
fn relative_error(u_fem: Vec<f64>, u_approx: Vec<f64>) -> PyResult<f64> {
    core_relative_error(&u_fem, &u_approx).map_err(err)
}

#[pyfunction]
fn two_grid_indicator(u_h: Vec<f64>, u_h_pod: Vec<f64>) -> PyResult<f64> {
    core_two_grid(&u_h, &u_h_pod).map_err(err)
}

#[pyfunction]
fn cos_angle(d: Vec<f64>, u_ref: Vec<f64>) -> PyResult<f64> {
    core_cos_angle(&d, &u_ref).map_err(err)
}

#[pyfunction]
fn indicator_names() -> Vec<&'static str> {
    IndicatorKind::ALL.iter().map(|k| k.name()).collect()
}

/// Parse and validate a config, returning it with defaults filled in.
#[pyfunction]
fn check_config(text: &str) -> PyResult<String> {
    Ok(print_config(&parse_config(text).map_err(err)?))
}

/// Run every configured method, write result files to `out_dir` and return one summary dict per method.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, text: &str, out_dir: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = parse_config(text).map_err(err)?;
    let results = core_run_experiment(&cfg, Path::new(out_dir)).map_err(err)?;
    results
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method.name())?;
            d.set_item("wall_seconds", r.wall_seconds)?;
            d.set_item("dofs", r.dofs())?;
            match &r.outcome {
                Ok(run) => {
                    d.set_item("ok", true)?;
                    d.set_item("update_times", run.stats.update_times)?;
                    d.set_item("final_error", run.stats.final_error)?;
                    d.set_item("average_error", run.stats.average_error)?;
                }
                Err(msg) => {
                    d.set_item("ok", false)?;
                    d.set_item("error", msg)?;
                }
            }
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn rom_apod(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Mesh>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(thin_svd, m)?)?;
    m.add_function(wrap_pyfunction!(energy_mode_count, m)?)?;
    m.add_function(wrap_pyfunction!(pod_mode, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(two_grid_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(cos_angle, m)?)?;
    m.add_function(wrap_pyfunction!(indicator_names, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
