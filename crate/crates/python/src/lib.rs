//! Python bindings. Matrices are passed as lists of rows, the same layout as
//! the CSV files: `X` is `d` rows of `n` values.

use dictapprox as core;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn signals(rows: Vec<Vec<f64>>) -> PyResult<core::SignalMatrix> {
    core::SignalMatrix::from_rows(&rows).map_err(to_py)
}

#[pyclass(name = "DictModel", module = "dictapprox_py", from_py_object)]
#[derive(Clone)]
struct PyDictModel {
    inner: core::DictModel,
}

#[pymethods]
impl PyDictModel {
    /// Atoms as unit vectors.
    #[getter]
    fn atoms(&self) -> Vec<Vec<f64>> {
        self.inner.atoms.clone()
    }

    /// Per signal, the `(atom_index, coefficient)` pairs in application order.
    #[getter]
    fn codes(&self) -> Vec<Vec<(usize, f64)>> {
        self.inner.codes.clone()
    }

    fn atom_count(&self) -> usize {
        self.inner.atom_count()
    }

    fn max_code_len(&self) -> usize {
        self.inner.max_code_len()
    }

    /// `‖X − A'Y'‖_F²`.
    fn residual_frob_sq(&self, x: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.residual_frob_sq(&signals(x)?).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "DictModel(atoms={}, signals={}, max_code_len={})",
            self.inner.atom_count(),
            self.inner.codes.len(),
            self.inner.max_code_len()
        )
    }
}

#[pyclass(name = "LearnConfig", module = "dictapprox_py", from_py_object)]
#[derive(Clone)]
struct PyLearnConfig {
    inner: core::LearnConfig,
}

#[pymethods]
impl PyLearnConfig {
    #[new]
    #[pyo3(signature = (k, m, lambda_, epsilon, max_iters=None))]
    fn new(k: usize, m: usize, lambda_: f64, epsilon: f64, max_iters: Option<u64>) -> PyResult<Self> {
        let mut inner = core::LearnConfig::new(k, m, lambda_, epsilon).map_err(to_py)?;
        if let Some(n) = max_iters {
            inner = inner.with_max_iters(n);
            inner.validate().map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn iteration_budget(&self) -> u64 {
        self.inner.iteration_budget()
    }

    #[getter]
    fn sparsity_cap(&self) -> u64 {
        self.inner.sparsity_cap()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("LearnConfig(k={}, m={}, lambda_={}, epsilon={})", c.k, c.m, c.lambda, c.epsilon)
    }
}

fn json_value<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Learns a dictionary. Returns `(model, trace)` where `trace` is a dict with
/// the per-iteration records and the termination reason.
#[pyfunction]
fn dict_approx<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    config: &PyLearnConfig,
) -> PyResult<(PyDictModel, Bound<'py, PyAny>)> {
    let x = signals(x)?;
    let (model, trace) = py.detach(|| core::dict_approx(&x, &config.inner)).map_err(to_py)?;
    Ok((PyDictModel { inner: model }, json_value(py, &trace)?))
}

/// Learns a dictionary while discarding a ρ fraction of columns. Returns
/// `(model, result)`; `result` holds the outlier indices, ψ̂ and the trace.
#[pyfunction]
fn outlier_dict_approx<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    config: &PyLearnConfig,
    rho: f64,
) -> PyResult<(PyDictModel, Bound<'py, PyAny>)> {
    let x = signals(x)?;
    let cfg = core::OutlierConfig::new(config.inner, rho).map_err(to_py)?;
    let r = py.detach(|| core::outlier_dict_approx(&x, &cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("outlier_indices", r.outlier_indices.clone())?;
    d.set_item("psi_hat_final", r.psi_hat_final)?;
    d.set_item("initial_psi_hat", r.initial_psi_hat)?;
    d.set_item("termination", json_value(py, &r.termination)?)?;
    d.set_item("trace", json_value(py, &r.trace)?)?;
    Ok((PyDictModel { inner: r.model }, d.into_any()))
}

fn tc_instance(vectors: Vec<Vec<f64>>, weights: Option<Vec<f64>>, tau: f64) -> PyResult<core::TcInstance> {
    let w = weights.unwrap_or_else(|| vec![1.0; vectors.len()]);
    core::TcInstance::new(&vectors, w, tau).map_err(to_py)
}

/// Bi-criteria τ-TC solve. `vectors` is a list of vectors in the unit ball.
#[pyfunction]
#[pyo3(signature = (vectors, tau, weights=None))]
fn solve_tc<'py>(
    py: Python<'py>,
    vectors: Vec<Vec<f64>>,
    tau: f64,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = tc_instance(vectors, weights, tau)?;
    json_value(py, &core::solve_bicriteria(&inst))
}

/// Thresholded objective at a unit vector: `(value, hit_set)`.
#[pyfunction]
#[pyo3(signature = (vectors, x, threshold, weights=None))]
fn evaluate_tc(
    vectors: Vec<Vec<f64>>,
    x: Vec<f64>,
    threshold: f64,
    weights: Option<Vec<f64>>,
) -> PyResult<(f64, Vec<usize>)> {
    let inst = tc_instance(vectors, weights, threshold.clamp(0.0, 1.0))?;
    let e = core::evaluate(&inst, &x, threshold).map_err(to_py)?;
    Ok((e.value, e.hit_set))
}

/// `‖Ax‖_p / ‖x‖₂` with `A` given by its rows.
#[pyfunction]
fn eval_2_to_p(rows: Vec<Vec<f64>>, p: f64, x: Vec<f64>) -> PyResult<f64> {
    core::eval_2_to_p(&rows, p, &x).map_err(to_py)
}

/// Certified lower bound on `‖A‖_{2→p}`: dict with value, witness, level, row_scale.
#[pyfunction]
fn lower_bound_2_to_p<'py>(py: Python<'py>, rows: Vec<Vec<f64>>, p: f64) -> PyResult<Bound<'py, PyAny>> {
    let inst = core::NormInstance::new(rows, p).map_err(to_py)?;
    json_value(py, &core::lower_bound_2_to_p(&inst))
}

/// Planted instance. Returns a dict with `X` (rows) and the truth record.
#[pyfunction]
#[pyo3(signature = (d, n, m, k, noise_ratio=0.0, rho=0.0, dict_kind="orthonormal", seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    m: usize,
    k: usize,
    noise_ratio: f64,
    rho: f64,
    dict_kind: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = core::SynthParams {
        d,
        n,
        m,
        k,
        noise_ratio,
        rho,
        dict_kind: dict_kind.parse().map_err(to_py)?,
        seed,
    };
    let inst = core::generate(&params).map_err(to_py)?;
    let out = json_value(py, &inst.truth_record())?;
    out.set_item("X", inst.x.to_rows())?;
    out.set_item("inliers", inst.inliers.clone())?;
    Ok(out)
}

/// Sum of the `n − ⌊ρn⌋` smallest squared residual norms.
#[pyfunction]
fn psi_hat(sq_norms: Vec<f64>, rho: f64) -> PyResult<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(PyValueError::new_err(format!("rho must lie in [0, 1), got {rho}")));
    }
    if sq_norms.is_empty() {
        return Ok(0.0);
    }
    Ok(core::outlier::psi_hat_from_sq_norms(&sq_norms, rho))
}

#[pymodule]
fn dictapprox_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDictModel>()?;
    m.add_class::<PyLearnConfig>()?;
    m.add_function(wrap_pyfunction!(dict_approx, m)?)?;
    m.add_function(wrap_pyfunction!(outlier_dict_approx, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_tc, m)?)?;
    m.add_function(wrap_pyfunction!(eval_2_to_p, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_2_to_p, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(psi_hat, m)?)?;
    Ok(())
}
