use std::collections::BTreeMap;
use std::path::PathBuf;

use hnn_core::bounds::{self, KamOutcome, LinfBound};
use hnn_core::diagnostics;
use hnn_core::dynamics::{self, StructureMatrix};
use hnn_core::integrators::{self, GradientDataset, Sampler, Trajectory};
use hnn_core::nn::{self, Architecture, NormProfile, Readout};
use hnn_core::training::{self, LossConfig, LossTarget, TrainConfig, TrainedModel};
use hnn_core::HnnError;
use pyo3::exceptions::{PyIOError, PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: HnnError) -> PyErr {
    if e.is_numerical() {
        return PyArithmeticError::new_err(e.to_string());
    }
    match e {
        HnnError::Io(_) | HnnError::Json(_) | HnnError::Format(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

/// One of the built-in Hamiltonian systems.
#[pyclass(module = "hnn", name = "ReferenceSystem", skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: dynamics::ReferenceSystem,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (name, params = None))]
    fn new(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let inner = dynamics::ReferenceSystem::from_params(name, &params.unwrap_or_default()).map_err(py_err)?;
        Ok(PySystem { inner })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name().as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn params(&self) -> BTreeMap<String, f64> {
        self.inner.params()
    }

    fn field(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.field(&u).map_err(py_err)
    }

    fn hamiltonian(&self, u: Vec<f64>) -> PyResult<f64> {
        self.inner.hamiltonian(&u).map_err(py_err)
    }

    /// Dense states of the true flow at `times` (DoPri5(4)).
    #[pyo3(signature = (u0, times, rtol = 1e-8, atol = 1e-10))]
    fn integrate(&self, u0: Vec<f64>, times: Vec<f64>, rtol: f64, atol: f64) -> PyResult<Vec<Vec<f64>>> {
        let tr = integrators::integrate_system(&self.inner, &u0, &times, rtol, atol).map_err(py_err)?;
        Ok(tr.states)
    }

    fn __repr__(&self) -> String {
        format!("ReferenceSystem({:?}, dim={})", self.name(), self.dim())
    }
}

/// Sampled `(t, u, du/dt)` triples from a reference system.
#[pyclass(module = "hnn", name = "Dataset", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: GradientDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: GradientDataset::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path, None).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn input_radius(&self) -> f64 {
        self.inner.input_radius
    }

    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states()
    }

    fn derivatives(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.dudt.clone()).collect()
    }
}

#[pyfunction]
#[pyo3(signature = (system, n_traj, t_span, n_points, seed = 0))]
fn generate_dataset(system: &PySystem, n_traj: usize, t_span: (f64, f64), n_points: usize, seed: u64) -> PyResult<PyDataset> {
    let sampler = Sampler::default_for(&system.inner);
    let inner = integrators::generate_dataset(&system.inner, n_traj, t_span, n_points, &sampler, seed).map_err(py_err)?;
    Ok(PyDataset { inner })
}

/// Scalar network `H_NN`.
#[pyclass(module = "hnn", name = "NeuralHamiltonian", skip_from_py_object)]
#[derive(Clone)]
struct PyHamiltonian {
    inner: nn::NeuralHamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    /// Tanh MLP with a scalar output, Glorot init.
    #[staticmethod]
    #[pyo3(signature = (input_dim, hidden, seed = 0))]
    fn mlp(input_dim: usize, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        let arch = Architecture::mlp(input_dim, &hidden, 1, Readout::FinalScalar);
        Ok(PyHamiltonian { inner: nn::init_network(&arch, seed).map_err(py_err)? })
    }

    /// Circular-convolution energy density on a periodic grid, summed.
    #[staticmethod]
    #[pyo3(signature = (grid, channels, kernels, seed = 0))]
    fn conv(grid: usize, channels: Vec<usize>, kernels: Vec<usize>, seed: u64) -> PyResult<Self> {
        let arch = Architecture::conv(grid, &channels, &kernels);
        Ok(PyHamiltonian { inner: nn::init_network(&arch, seed).map_err(py_err)? })
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn set_params(&mut self, p: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&p).map_err(py_err)
    }

    fn __call__(&self, u: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&u).map_err(py_err)
    }

    fn gradient(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.input_gradient(&u).map_err(py_err)
    }

    /// The per-layer constants of the covering-number bound.
    #[pyo3(signature = (input_radius, loss_lipschitz, n))]
    fn norm_profile<'py>(&self, py: Python<'py>, input_radius: f64, loss_lipschitz: f64, n: usize) -> PyResult<Bound<'py, PyAny>> {
        let p = nn::norm_profile(&self.inner, input_radius, loss_lipschitz, n).map_err(py_err)?;
        to_py(py, &serde_json::to_value(p).expect("profile serializes"))
    }
}

/// A trained vector field: naive HNN, coordinate-transformed HNN or neural ODE.
#[pyclass(module = "hnn", name = "Model", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: TrainedModel::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path, None).map_err(py_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn hamiltonian(&self) -> Option<PyHamiltonian> {
        self.inner.hamiltonian().map(|h| PyHamiltonian { inner: h.clone() })
    }

    fn field(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.vector_field(&u).map_err(py_err)
    }

    #[pyo3(signature = (u0, times, rtol = 1e-8, atol = 1e-10))]
    fn simulate(&self, u0: Vec<f64>, times: Vec<f64>, rtol: f64, atol: f64) -> PyResult<Vec<Vec<f64>>> {
        let (t0, t1) = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(PyValueError::new_err("times must be nonempty")),
        };
        let m = &self.inner;
        let tr = integrators::dopri45(|u| m.vector_field(u), &u0, (t0, t1), rtol, atol, &times).map_err(py_err)?;
        Ok(tr.states)
    }
}

fn structure_for(system: &dynamics::ReferenceSystem) -> PyResult<StructureMatrix> {
    match system.structure() {
        Some(s) => Ok(s),
        None if system.dim().is_multiple_of(2) => StructureMatrix::canonical(system.dim() / 2).map_err(py_err),
        None => Err(PyValueError::new_err("odd state dimension has no canonical structure")),
    }
}

/// Fits `S∇H_NN` to the dataset's time derivatives with Adam. Returns the
/// trained model and its per-iteration loss history.
#[pyfunction]
#[pyo3(signature = (net, dataset, iterations = 1000, lr = 1e-3, batch_size = 200, seed = 0))]
fn train_hnn(
    net: &PyHamiltonian,
    dataset: &PyDataset,
    iterations: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let structure = structure_for(&dataset.inner.provenance.system)?;
    let loss = LossConfig::mse(LossTarget::SymplecticGradient(structure.clone()));
    let mut cfg = TrainConfig { iterations, batch_size, seed, ..TrainConfig::default() };
    cfg.adam.lr = lr;
    let (h, report) = training::train(&net.inner, &dataset.inner, &loss, &cfg).map_err(|f| py_err(f.error))?;
    let model = TrainedModel::NaiveHnn { hamiltonian: h, structure };
    Ok((PyModel { inner: model }, report.loss_history))
}

/// `{series, max_abs, mean_abs, abs_slope}` of `H(u(t)) − H(u(0))`.
#[pyfunction]
fn energy_drift<'py>(py: Python<'py>, system: &PySystem, times: Vec<f64>, states: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let tr = Trajectory { times, states, meta: Default::default() };
    let d = diagnostics::energy_drift(&tr, |u| system.inner.hamiltonian(u)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("series", d.series)?;
    out.set_item("max_abs", d.max_abs)?;
    out.set_item("mean_abs", d.mean_abs)?;
    out.set_item("abs_slope", d.abs_slope)?;
    Ok(out)
}

#[pyfunction]
fn covering_constant(profile: Bound<'_, PyAny>) -> PyResult<f64> {
    let text: String = profile.py().import("json")?.call_method1("dumps", (profile,))?.extract()?;
    let p: NormProfile = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    bounds::covering_constant(&p).map_err(py_err)
}

/// `(alpha, beta, R_n)`.
#[pyfunction]
fn rademacher_bound(k: f64, c_loss: f64, n: usize) -> PyResult<(f64, f64, f64)> {
    let r = bounds::rademacher_bound(k, c_loss, n).map_err(py_err)?;
    Ok((r.alpha, r.beta, r.rademacher))
}

#[pyfunction]
fn generalization_bound(l_train: f64, r_n: f64, c_loss: f64, delta: f64, n: usize) -> PyResult<f64> {
    bounds::generalization_bound(l_train, r_n, c_loss, delta, n).map_err(py_err)
}

/// `None` when `p <= 2m` and the embedding does not apply.
#[pyfunction]
fn linf_hamiltonian_bound(gen: f64, c_sobolev: f64, inf_density: f64, p: f64, m: usize) -> PyResult<Option<f64>> {
    match bounds::linf_hamiltonian_bound(gen, c_sobolev, inf_density, p, m).map_err(py_err)? {
        LinfBound::Bound { value } => Ok(Some(value)),
        LinfBound::NotApplicable { .. } => Ok(None),
    }
}

/// `None` when `eps0 <= c1 L + c2 R` (no guarantee).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn kam_probability(eps0: f64, c1: f64, c2: f64, c3: f64, l_train: f64, r_n: f64, n: usize) -> PyResult<Option<f64>> {
    Ok(match bounds::kam_probability(eps0, c1, c2, c3, l_train, r_n, n).map_err(py_err)? {
        KamOutcome::NoGuarantee { .. } => None,
        o => o.delta(),
    })
}

#[pymodule]
fn hnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_hnn, m)?)?;
    m.add_function(wrap_pyfunction!(energy_drift, m)?)?;
    m.add_function(wrap_pyfunction!(covering_constant, m)?)?;
    m.add_function(wrap_pyfunction!(rademacher_bound, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_bound, m)?)?;
    m.add_function(wrap_pyfunction!(linf_hamiltonian_bound, m)?)?;
    m.add_function(wrap_pyfunction!(kam_probability, m)?)?;
    Ok(())
}
