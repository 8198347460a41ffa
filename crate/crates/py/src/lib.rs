//! Python bindings for `ssl_lab`. Matrices cross the boundary as lists of
//! rows; configs and run records as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ssl_lab::datasets::{gaussian_clusters as clusters, split_ssl, Dataset as CoreDataset};
use ssl_lab::harness;
use ssl_lab::losses::{self, Method, MethodConfig};
use ssl_lab::matrix::Matrix;
use ssl_lab::model::{self, ParameterSet as CoreParams};
use ssl_lab::report::{self, Extent};
use ssl_lab::rng::RngStream;
use ssl_lab::training::{self, TrainConfig};

fn to_py(e: ssl_lab::Error) -> PyErr {
    if e.is_configuration() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("expected a non-empty list of equal-length rows"));
    }
    Ok(Matrix::from_rows(&rows))
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(|e: ssl_lab::Error| PyValueError::new_err(e.to_string()))
}

/// A labeled 2-D dataset.
#[pyclass(name = "Dataset", module = "ssl_lab_py", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().to_rows()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Weights and biases of an MLP.
#[pyclass(name = "ParameterSet", module = "ssl_lab_py", skip_from_py_object)]
#[derive(Clone)]
struct ParameterSet {
    inner: CoreParams,
}

#[pymethods]
impl ParameterSet {
    /// Glorot-initialized MLP with the given layer sizes.
    #[new]
    fn new(layer_sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(ParameterSet { inner: model::mlp_init(&layer_sizes, seed).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(ParameterSet { inner: CoreParams::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes().to_vec()
    }

    fn logits(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.logits(&matrix(x)?).map_err(to_py)?.to_rows())
    }

    fn probabilities(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.probabilities(&matrix(x)?).map_err(to_py)?.to_rows())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        self.inner.predict(&matrix(x)?).map_err(to_py)
    }

    fn error_rate(&self, x: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
        self.inner.error_rate(&matrix(x)?, &labels).map_err(to_py)
    }
}

#[pyfunction]
#[pyo3(signature = (n, noise=0.1, seed=0))]
fn two_moons(n: usize, noise: f64, seed: u64) -> PyResult<Dataset> {
    Ok(Dataset { inner: ssl_lab::datasets::two_moons(n, noise, seed).map_err(to_py)? })
}

#[pyfunction]
#[pyo3(signature = (classes, per_class, radius=3.0, std=0.5, seed=0))]
fn gaussian_clusters(classes: usize, per_class: usize, radius: f64, std: f64, seed: u64) -> PyResult<Dataset> {
    Ok(Dataset { inner: clusters(classes, per_class, radius, std, seed).map_err(to_py)? })
}

/// Names of the supported methods.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    Method::ALL.iter().map(|m| m.name()).collect()
}

/// Default method config as JSON.
#[pyfunction]
fn method_defaults(name: &str) -> PyResult<String> {
    serde_json::to_string(&MethodConfig::defaults(method(name)?)).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Default training config as JSON.
#[pyfunction]
fn train_defaults() -> PyResult<String> {
    serde_json::to_string(&TrainConfig::default()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Splits `data`, trains one method and returns `(run_record_json, best_params)`.
/// `method_json` / `train_json` override the defaults when given.
#[pyfunction]
#[pyo3(signature = (data, method_name, sizes=(6, 500, 100, 394), seed=0, method_json=None, train_json=None))]
fn train(
    py: Python<'_>,
    data: &Dataset,
    method_name: &str,
    sizes: (usize, usize, usize, usize),
    seed: u64,
    method_json: Option<&str>,
    train_json: Option<&str>,
) -> PyResult<(String, ParameterSet)> {
    let bad_json = |e: serde_json::Error| PyValueError::new_err(e.to_string());
    let method = match method_json {
        Some(text) => serde_json::from_str(text).map_err(bad_json)?,
        None => MethodConfig::defaults(method(method_name)?),
    };
    let config: TrainConfig = match train_json {
        Some(text) => serde_json::from_str(text).map_err(bad_json)?,
        None => TrainConfig::default(),
    };
    let data = data.inner.clone();
    let outcome = py
        .detach(move || {
            let split = split_ssl(&data, sizes.0, sizes.1, sizes.2, sizes.3, seed)?;
            training::train_full(&split, &method, &config, seed, None)
        })
        .map_err(to_py)?;
    Ok((outcome.record.to_json().map_err(to_py)?, ParameterSet { inner: outcome.best_params }))
}

/// VAT adversarial perturbation for each row of `x`.
#[pyfunction]
#[pyo3(signature = (params, x, epsilon, xi=1e-6, seed=0))]
fn vat_perturbation(params: &ParameterSet, x: Vec<Vec<f64>>, epsilon: f64, xi: f64, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let mut rng = RngStream::new(seed);
    let pert = losses::vat_perturbation(&params.inner, &matrix(x)?, epsilon, xi, &mut rng).map_err(to_py)?;
    Ok(pert.r_adv.to_rows())
}

/// Bias-corrected temporal-ensembling targets after feeding `outputs` in order.
#[pyfunction]
fn ensemble_targets(outputs: Vec<Vec<Vec<f64>>>, decay: f64) -> PyResult<Vec<Vec<f64>>> {
    let first = outputs.first().ok_or_else(|| PyValueError::new_err("no outputs"))?;
    let (rows, cols) = (first.len(), first.first().map_or(0, Vec::len));
    let mut state = losses::EnsembleState::new(rows, cols, decay).map_err(to_py)?;
    for z in outputs {
        state.update(&matrix(z)?).map_err(to_py)?;
    }
    Ok(state.targets().to_rows())
}

#[pyfunction]
fn ramp_weight(step: usize, ramp_length: usize, max: f64) -> f64 {
    losses::ramp_weight(step, ramp_length, max)
}

/// Smallest validation size for which an accuracy gap `p` is detected with
/// confidence `c`.
#[pyfunction]
fn hoeffding_n(c: f64, p: f64) -> PyResult<u64> {
    harness::hoeffding_n(c, p).map_err(to_py)
}

#[pyfunction]
fn hoeffding_confidence(n: u64, p: f64) -> f64 {
    harness::hoeffding_confidence(n, p)
}

/// Boundary grid as CSV text (`x,y,p_0..,argmax`).
#[pyfunction]
#[pyo3(signature = (params, resolution=100, extent=None))]
fn boundary_csv(params: &ParameterSet, resolution: usize, extent: Option<(f64, f64, f64, f64)>) -> PyResult<String> {
    let extent = extent.map_or_else(Extent::default, |(x_min, x_max, y_min, y_max)| Extent { x_min, x_max, y_min, y_max });
    Ok(report::boundary_grid(&params.inner, &extent, resolution).map_err(to_py)?.to_csv())
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(move || ssl_lab::cli::run_cli(std::iter::once("ssl-lab".to_string()).chain(args)))
}

#[pymodule]
pub fn ssl_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<ParameterSet>()?;
    m.add_function(wrap_pyfunction!(two_moons, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add_function(wrap_pyfunction!(method_defaults, m)?)?;
    m.add_function(wrap_pyfunction!(train_defaults, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(vat_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_targets, m)?)?;
    m.add_function(wrap_pyfunction!(ramp_weight, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_n, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_confidence, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
