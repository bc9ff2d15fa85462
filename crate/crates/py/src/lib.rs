//! Python bindings: graphs, the oscillator simulator, model fitting and
//! scoring. Matrices cross the boundary as lists of rows.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sindyg::experiment::{run_simple_case, ExperimentConfig};
use sindyg::{
    compute_penalty, fit_coefficients, predict_derivs, simulate_model, CoefficientMatrix,
    FeatureLibrary, Method, ModelFile, SindyError, SlNetwork, SlParams, SolverConfig,
    StateVariableMap, WeightedGraph,
};

fn to_py(e: SindyError) -> PyErr {
    match e {
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e @ SindyError::Io { .. } => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("expected a nonempty rectangular list of rows"));
    }
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn planar_library(n_vars: usize, degree: u32) -> PyResult<FeatureLibrary> {
    if !n_vars.is_multiple_of(2) {
        return Err(PyValueError::new_err(format!("{n_vars} state columns do not form (x, y) pairs")));
    }
    let svmap = StateVariableMap::planar(n_vars / 2).map_err(to_py)?;
    FeatureLibrary::build(svmap, degree).map_err(to_py)
}

/// Weighted adjacency matrix; entry `[m][n]` couples node `m` into node `n`.
#[pyclass(name = "Graph", module = "sindyg_py")]
struct PyGraph {
    inner: WeightedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (adjacency, directed = false))]
    fn new(adjacency: Vec<Vec<f64>>, directed: bool) -> PyResult<Self> {
        let a = to_matrix(&adjacency)?;
        Ok(Self { inner: WeightedGraph::new(a, directed).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n_nodes, edge_prob, weight_min, weight_max, seed = 0))]
    fn erdos_renyi(n_nodes: usize, edge_prob: f64, weight_min: f64, weight_max: f64, seed: u64) -> PyResult<Self> {
        let inner = sindyg::generate_er(n_nodes, edge_prob, (weight_min, weight_max), seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n_nodes, m_attach, weight_min, weight_max, seed = 0))]
    fn scale_free(n_nodes: usize, m_attach: usize, weight_min: f64, weight_max: f64, seed: u64) -> PyResult<Self> {
        let inner = sindyg::generate_sf(n_nodes, m_attach, (weight_min, weight_max), seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: sindyg::load_graph(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        sindyg::save_graph(&self.inner, path).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn adjacency(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.adjacency())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n_nodes={}, edges={})", self.inner.n_nodes(), self.inner.edge_count())
    }
}

/// Coupled Stuart–Landau oscillators on a graph.
#[pyclass(name = "Network", module = "sindyg_py")]
struct PyNetwork {
    inner: SlNetwork,
}

#[pymethods]
impl PyNetwork {
    #[new]
    fn new(sigma: Vec<f64>, omega: Vec<f64>, graph: &PyGraph) -> PyResult<Self> {
        let params = SlParams::new(sigma, omega).map_err(to_py)?;
        Ok(Self { inner: SlNetwork::new(params, graph.inner.clone()).map_err(to_py)? })
    }

    /// Three nodes with one weighted edge between nodes 1 and 2.
    #[staticmethod]
    #[pyo3(signature = (coupling = 0.2))]
    fn simple_case(coupling: f64) -> PyResult<Self> {
        Ok(Self { inner: sindyg::experiment::simple_case_network(coupling).map_err(to_py)? })
    }

    /// RK4 run; returns a dict with `times`, `states` and `derivs`.
    fn simulate<'py>(&self, py: Python<'py>, x0: Vec<f64>, t_end: f64, dt: f64) -> PyResult<Bound<'py, PyDict>> {
        let traj = self.inner.simulate(&x0, t_end, dt).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("times", traj.times.clone())?;
        out.set_item("states", to_rows(&traj.states))?;
        out.set_item("derivs", to_rows(&traj.derivs))?;
        Ok(out)
    }

    fn rhs(&self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.sl_rhs(&state).map_err(to_py)
    }

    #[pyo3(signature = (degree = 3))]
    fn true_model(&self, degree: u32) -> PyResult<PyModel> {
        let library = FeatureLibrary::build(self.inner.svmap(), degree).map_err(to_py)?;
        let coefficients = self.inner.true_coefficients(&library).map_err(to_py)?;
        Ok(PyModel { coefficients, library, method: None, config: SolverConfig::default() })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.params.n_nodes()
    }
}

/// Sparse coefficient matrix over a polynomial library.
#[pyclass(name = "Model", module = "sindyg_py")]
struct PyModel {
    coefficients: CoefficientMatrix,
    library: FeatureLibrary,
    method: Option<Method>,
    config: SolverConfig,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn term_names(&self) -> Vec<String> {
        self.coefficients.term_names.clone()
    }

    #[getter]
    fn var_names(&self) -> Vec<String> {
        self.coefficients.var_names.clone()
    }

    /// Terms × variables.
    #[getter]
    fn coefficients(&self) -> Vec<Vec<f64>> {
        to_rows(&self.coefficients.xi)
    }

    #[getter]
    fn gamma(&self) -> usize {
        sindyg::complexity(&self.coefficients, 0.0)
    }

    #[pyo3(signature = (precision = 4))]
    fn equations(&self, precision: usize) -> Vec<String> {
        self.coefficients.equations(precision)
    }

    fn predict(&self, states: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = to_matrix(&states)?;
        Ok(to_rows(&predict_derivs(&self.coefficients, &self.library, &x).map_err(to_py)?))
    }

    /// Integrates the model; returns the state rows.
    fn simulate(&self, x0: Vec<f64>, t_end: f64, dt: f64) -> PyResult<Vec<Vec<f64>>> {
        let traj = simulate_model(&self.coefficients, &self.library, &x0, t_end, dt).map_err(to_py)?;
        Ok(to_rows(&traj.states))
    }

    fn to_json(&self) -> PyResult<String> {
        let method = self.method.unwrap_or(Method::Sindy);
        ModelFile::new(&self.coefficients, &self.config, method).to_json().map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (text, degree = 3))]
    fn from_json(text: &str, degree: u32) -> PyResult<Self> {
        let file = ModelFile::from_json(text).map_err(to_py)?;
        let coefficients = file.coefficients().map_err(to_py)?;
        let library = planar_library(coefficients.n_vars(), degree)?;
        coefficients.check_library(&library).map_err(to_py)?;
        Ok(Self { coefficients, library, method: Some(file.method), config: file.config })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(terms={}, vars={}, gamma={})",
            self.coefficients.n_terms(),
            self.coefficients.n_vars(),
            self.gamma()
        )
    }
}

/// Fits a sparse model to sampled states and derivatives. Passing a graph
/// selects the connectivity-penalized solver.
#[pyfunction]
#[pyo3(signature = (states, derivs, graph = None, degree = 3, lam = 1e-4, eta = 0.01, penalty_l = 4.0, max_iters = 20, normalize_columns = false))]
#[allow(clippy::too_many_arguments)]
fn fit(
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
    graph: Option<&PyGraph>,
    degree: u32,
    lam: f64,
    eta: f64,
    penalty_l: f64,
    max_iters: usize,
    normalize_columns: bool,
) -> PyResult<PyModel> {
    let x = to_matrix(&states)?;
    let xdot = to_matrix(&derivs)?;
    let config = SolverConfig { lambda: lam, eta, penalty_l, max_iters, normalize_columns, ..Default::default() };
    let library = planar_library(x.ncols(), degree)?;
    let theta = library.evaluate(&x).map_err(to_py)?;
    let penalty = graph.map(|g| compute_penalty(&library, &g.inner, &config)).transpose().map_err(to_py)?;
    let xi = fit_coefficients(&theta, &xdot, penalty.as_ref(), &config).map_err(to_py)?;
    let method = if penalty.is_some() { Method::Sindyg } else { Method::Sindy };
    let coefficients = CoefficientMatrix::new(xi, library.term_names(), library.svmap().var_names());
    Ok(PyModel { coefficients, library, method: Some(method), config })
}

/// Mean absolute coefficient difference.
#[pyfunction]
fn cei(predicted: &PyModel, truth: &PyModel) -> PyResult<f64> {
    sindyg::cei(&predicted.coefficients, &truth.coefficients).map_err(to_py)
}

#[pyfunction]
fn r_squared(predicted: Vec<Vec<f64>>, observed: Vec<Vec<f64>>) -> PyResult<f64> {
    sindyg::r_squared(&to_matrix(&predicted)?, &to_matrix(&observed)?).map_err(to_py)
}

#[pyfunction]
fn mse(predicted: Vec<Vec<f64>>, observed: Vec<Vec<f64>>) -> PyResult<f64> {
    sindyg::mse(&to_matrix(&predicted)?, &to_matrix(&observed)?).map_err(to_py)
}

#[pyfunction]
fn penalty_value(m: f64, n_sources: usize, penalty_l: f64) -> f64 {
    sindyg::penalty_value(m, n_sources, penalty_l)
}

/// Runs the three-node study with default settings; returns per-method metrics.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn simple_case<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let report = run_simple_case(&ExperimentConfig { seed, ..Default::default() }).map_err(to_py)?;
    let out = PyDict::new(py);
    for r in [&report.sindy, &report.sindyg] {
        let m = PyDict::new(py);
        m.set_item("gamma", r.metrics.gamma)?;
        m.set_item("cei", r.metrics.cei)?;
        m.set_item("train_r2", r.metrics.train_r2)?;
        m.set_item("test_r2", r.test_r2.clone())?;
        out.set_item(r.method.to_string(), m)?;
    }
    Ok(out)
}

#[pymodule]
fn sindyg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cei, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_value, m)?)?;
    m.add_function(wrap_pyfunction!(simple_case, m)?)?;
    Ok(())
}
