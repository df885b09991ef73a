//! Python bindings. Specs and configs cross the boundary as dicts (or JSON
//! strings) with the same schema as the CLI config files.

use std::sync::Arc;

use eikograph::config::RunConfig;
use eikograph::graph::{self, epsilon_schedule, mark_boundary};
use eikograph::harness::{self, mc_cover_probability, resolve_k1, run_convergence, McConfig, SweepConfig};
use eikograph::kernel::{self, cfl_bound, kernel_constants, make_kernel, KernelConstants, DEFAULT_GRID_STEP};
use eikograph::manifold::{self, BoundarySpec, Density, ManifoldSpec};
use eikograph::reference::{check_uniform_regime, closed_form_fields, local_solution_uniform, sup_error};
use eikograph::solver::{self, SolverConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: eikograph::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if let Ok(s) = obj.cast::<PyString>() {
        s.to_string()
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Kernel", frozen)]
struct PyKernel {
    kernel: kernel::Kernel,
    constants: KernelConstants,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (profile, params = vec![], a = None))]
    fn new(profile: &str, params: Vec<f64>, a: Option<f64>) -> PyResult<Self> {
        let kernel = make_kernel(profile, &params, a).map_err(err)?;
        let constants = kernel_constants(&kernel, DEFAULT_GRID_STEP).map_err(err)?;
        Ok(Self { kernel, constants })
    }

    fn eval(&self, t: f64) -> f64 {
        self.kernel.eval(t)
    }

    #[getter]
    fn r_eta(&self) -> f64 {
        self.kernel.r_eta
    }

    #[getter]
    fn a(&self) -> f64 {
        self.kernel.a
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.constants)
    }

    fn cfl_bound(&self, epsilon: f64) -> f64 {
        cfl_bound(&self.constants, epsilon)
    }

    fn weight(&self, epsilon: f64, dtilde: f64) -> f64 {
        kernel::weight(&self.constants, &self.kernel, epsilon, dtilde)
    }
}

#[pyclass(name = "PointCloud", frozen)]
struct PyPointCloud {
    cloud: Arc<manifold::PointCloud>,
}

#[pymethods]
impl PyPointCloud {
    fn __len__(&self) -> usize {
        self.cloud.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.cloud.dim
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cloud.seed
    }

    fn point(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.cloud.len() {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(self.cloud.point(i).to_vec())
    }

    fn coords(&self) -> Vec<Vec<f64>> {
        self.cloud.points().map(<[f64]>::to_vec).collect()
    }

    fn manifold<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.cloud.spec)
    }
}

#[pyfunction]
#[pyo3(signature = (manifold, n, seed, density = None))]
fn sample_points(manifold: &Bound<'_, PyAny>, n: usize, seed: u64, density: Option<&Bound<'_, PyAny>>) -> PyResult<PyPointCloud> {
    let spec: ManifoldSpec = from_py(manifold)?;
    let density: Density = density.map(from_py).transpose()?.unwrap_or_default();
    let cloud = manifold::sample_points(&spec, n, density, seed).map_err(err)?;
    Ok(PyPointCloud { cloud: Arc::new(cloud) })
}

#[pyfunction]
fn point_cloud(manifold: &Bound<'_, PyAny>, coords: Vec<Vec<f64>>) -> PyResult<PyPointCloud> {
    let spec: ManifoldSpec = from_py(manifold)?;
    let cloud = manifold::PointCloud::from_coords(spec, coords.concat()).map_err(err)?;
    Ok(PyPointCloud { cloud: Arc::new(cloud) })
}

#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    graph: graph::Graph,
}

#[pymethods]
impl PyGraph {
    fn __len__(&self) -> usize {
        self.graph.len()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.graph.epsilon()
    }

    #[getter]
    fn directed_edge_count(&self) -> usize {
        self.graph.directed_edge_count()
    }

    #[getter]
    fn boundary_count(&self) -> usize {
        self.graph.boundary_count()
    }

    fn boundary_mask(&self) -> Vec<bool> {
        self.graph.boundary_mask().to_vec()
    }

    /// `(index, d̃, weight)` triples of the out-neighbors of `i`.
    fn neighbors(&self, i: usize) -> PyResult<Vec<(usize, f64, f64)>> {
        if i >= self.graph.len() {
            return Err(PyValueError::new_err(format!("vertex {i} out of range")));
        }
        Ok(self.graph.neighbors(i).map(|nb| (nb.index, nb.dtilde, nb.weight)).collect())
    }

    fn cfl_bound(&self) -> f64 {
        cfl_bound(self.graph.constants(), self.graph.epsilon())
    }

    fn nonlocal_gradient(&self, values: Vec<f64>, i: usize) -> PyResult<f64> {
        if values.len() != self.graph.len() || i >= self.graph.len() {
            return Err(PyValueError::new_err("values must have one entry per vertex and i must be a vertex"));
        }
        Ok(solver::nonlocal_gradient(&self.graph, &values, i))
    }
}

/// Builds the ε-graph and, when `boundary` is given, marks the vertices within
/// `a·ε^(1+ν)/2` of it.
#[pyfunction]
#[pyo3(signature = (cloud, kernel, epsilon, boundary = None, nu = 0.5))]
fn build_graph(
    cloud: &PyPointCloud,
    kernel: &PyKernel,
    epsilon: f64,
    boundary: Option<&Bound<'_, PyAny>>,
    nu: f64,
) -> PyResult<PyGraph> {
    let mut g = graph::build_graph(Arc::clone(&cloud.cloud), &kernel.kernel, &kernel.constants, epsilon).map_err(err)?;
    if let Some(b) = boundary {
        let gamma: BoundarySpec = from_py(b)?;
        let marking = mark_boundary(&cloud.cloud, &gamma, kernel.kernel.a, epsilon, nu).map_err(err)?;
        g.set_boundary_mask(marking.mask).map_err(err)?;
    }
    Ok(PyGraph { graph: g })
}

#[pyclass(name = "Solution", frozen)]
struct PySolution {
    solution: solver::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn dt(&self) -> f64 {
        self.solution.dt
    }

    #[getter]
    fn steps(&self) -> usize {
        self.solution.steps
    }

    #[getter]
    fn dt_clamped(&self) -> bool {
        self.solution.dt_clamped
    }

    #[getter]
    fn steady_state_step(&self) -> Option<usize> {
        self.solution.steady_state_step
    }

    fn times(&self) -> Vec<f64> {
        self.solution.trajectory.iter().map(|f| f.time).collect()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.solution.trajectory.iter().map(|f| f.values.clone()).collect()
    }

    fn final_values(&self) -> Vec<f64> {
        self.solution.final_field().values.clone()
    }
}

/// Runs the explicit scheme; `config` follows the solver config schema
/// (`dt` and `horizon` required).
#[pyfunction]
fn solve(py: Python<'_>, graph: &PyGraph, config: &Bound<'_, PyAny>) -> PyResult<PySolution> {
    let cfg: SolverConfig = from_py(config)?;
    let solution = py.detach(|| solver::solve(&graph.graph, &cfg)).map_err(err)?;
    Ok(PySolution { solution })
}

/// Sup error of a solution against `min(t, d(x, boundary))`.
#[pyfunction]
fn closed_form_error(graph: &PyGraph, solution: &PySolution, boundary: &Bound<'_, PyAny>) -> PyResult<f64> {
    let gamma: BoundarySpec = from_py(boundary)?;
    let s = &solution.solution;
    let (p, f0) = (uniform_spec(&s.potential)?, uniform_spec(&s.initial)?);
    check_uniform_regime(&p, &f0).map_err(err)?;
    let times: Vec<f64> = s.trajectory.iter().map(|f| f.time).collect();
    let oracle = closed_form_fields(graph.graph.cloud(), &gamma, &p, &f0, &times).map_err(err)?;
    sup_error(&s.trajectory, &oracle).map_err(err)
}

fn uniform_spec(values: &[f64]) -> PyResult<solver::FieldSpec> {
    match values.first() {
        Some(&v) if values.iter().all(|x| *x == v) => Ok(solver::FieldSpec::Constant { value: v }),
        _ => Err(PyValueError::new_err("the closed form needs constant potential and initial data")),
    }
}

#[pyfunction]
fn local_solution(manifold: &Bound<'_, PyAny>, boundary: &Bound<'_, PyAny>, x: Vec<f64>, t: f64) -> PyResult<f64> {
    let spec: ManifoldSpec = from_py(manifold)?;
    let gamma: BoundarySpec = from_py(boundary)?;
    local_solution_uniform(&spec, &gamma, &x, t).map_err(err)
}

#[pyfunction]
fn epsilon_n(n: usize, m_star: usize, nu: f64, tau: f64, k1: f64) -> PyResult<f64> {
    Ok(epsilon_schedule(n, m_star, nu, tau, k1).map_err(err)?.epsilon_n)
}

fn run_config(config: &Bound<'_, PyAny>) -> PyResult<RunConfig> {
    let cfg: RunConfig = from_py(config)?;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Convergence sweep from a run config; returns the table as a dict.
#[pyfunction]
fn convergence<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(config)?;
    let table = py
        .detach(|| {
            let k1 = resolve_k1(&cfg)?;
            run_convergence(&SweepConfig::from_run(&cfg, k1))
        })
        .map_err(err)?;
    let out = to_py(py, &table)?;
    out.set_item("summary", harness::summary_text(&table))?;
    Ok(out)
}

/// Monte-Carlo cover and boundary-tracking frequencies from a run config.
#[pyfunction]
fn mc_cover<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(config)?;
    let report = py
        .detach(|| {
            let k1 = resolve_k1(&cfg)?;
            mc_cover_probability(&McConfig {
                problem: cfg.problem.clone(),
                n: cfg.mc.n,
                trials: cfg.mc.trials,
                nu: cfg.nu,
                tau: cfg.tau,
                m_star: cfg.problem.m_star(cfg.m_star),
                k1,
                probes: cfg.probes,
                seed_base: cfg.seed,
                epsilon: cfg.mc.epsilon,
            })
        })
        .map_err(err)?;
    to_py(py, &report)
}

#[pymodule(name = "eikograph")]
fn eikograph_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(sample_points, m)?)?;
    m.add_function(wrap_pyfunction!(point_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(build_graph, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_error, m)?)?;
    m.add_function(wrap_pyfunction!(local_solution, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_n, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(mc_cover, m)?)?;
    Ok(())
}
