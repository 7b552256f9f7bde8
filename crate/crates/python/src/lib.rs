//! Python module `infoloop`: loop construction, the rate decomposition and
//! Monte Carlo validation from `infoloop-core`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

use infoloop_core::decomposition::{self, LogBase};
use infoloop_core::montecarlo::{self, SimulationConfig, WelchParams};
use infoloop_core::{spectral, FrequencyGrid, RateInputs};

create_exception!(
    infoloop,
    InfoloopError,
    PyException,
    "Raised for any failure in infoloop-core."
);

fn err(e: infoloop_core::Error) -> PyErr {
    InfoloopError::new_err(e.to_string())
}

fn grid(n: usize) -> PyResult<FrequencyGrid> {
    FrequencyGrid::new(n).map_err(err)
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => PyFloat::new(py, n.as_f64().unwrap_or(f64::NAN)).into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// Serializable report to a plain dict. Non-finite floats become `None`.
fn report_dict<'py>(py: Python<'py>, r: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(r).map_err(|e| InfoloopError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Rational map `num(d) / den(d)` in the delay variable, coefficients in
/// ascending powers.
#[pyclass(name = "TransferFunction", module = "infoloop", frozen, from_py_object)]
#[derive(Clone)]
struct PyTransferFunction {
    inner: infoloop_core::TransferFunction,
}

#[pymethods]
impl PyTransferFunction {
    #[new]
    fn new(num: Vec<f64>, den: Vec<f64>) -> PyResult<Self> {
        infoloop_core::TransferFunction::from_coeffs(&num, &den)
            .map(|inner| PyTransferFunction { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn gain(k: f64) -> Self {
        PyTransferFunction {
            inner: infoloop_core::TransferFunction::gain(k),
        }
    }

    #[getter]
    fn num(&self) -> Vec<f64> {
        self.inner.num().coeffs().to_vec()
    }

    #[getter]
    fn den(&self) -> Vec<f64> {
        self.inner.den().coeffs().to_vec()
    }

    fn poles(&self) -> Vec<Complex64> {
        self.inner.poles()
    }

    fn zeros(&self) -> Vec<Complex64> {
        self.inner.zeros()
    }

    fn is_stable(&self) -> bool {
        self.inner.is_stable()
    }

    fn is_strictly_proper(&self) -> bool {
        self.inner.is_strictly_proper()
    }

    /// Value at `d = exp(-j omega)`.
    fn freq_response(&self, omega: f64) -> PyResult<Complex64> {
        self.inner.freq_response(omega).map_err(err)
    }

    fn __mul__(&self, other: &PyTransferFunction) -> PyResult<Self> {
        self.inner
            .mul(&other.inner)
            .map(|inner| PyTransferFunction { inner })
            .map_err(err)
    }

    fn __eq__(&self, other: &PyTransferFunction) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "TransferFunction(num={:?}, den={:?})",
            self.num(),
            self.den()
        )
    }
}

/// White or shaped Gaussian noise source.
#[pyclass(name = "NoiseSpec", module = "infoloop", frozen, from_py_object)]
#[derive(Clone)]
struct PyNoiseSpec {
    inner: spectral::NoiseSpec,
}

#[pymethods]
impl PyNoiseSpec {
    #[staticmethod]
    fn white(variance: f64) -> PyResult<Self> {
        spectral::NoiseSpec::white(variance)
            .map(|inner| PyNoiseSpec { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn colored(variance: f64, shaping: &PyTransferFunction) -> PyResult<Self> {
        spectral::NoiseSpec::colored(variance, shaping.inner.clone())
            .map(|inner| PyNoiseSpec { inner })
            .map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            spectral::NoiseKind::White => "white",
            spectral::NoiseKind::Colored => "colored",
        }
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    #[getter]
    fn shaping(&self) -> Option<PyTransferFunction> {
        self.inner
            .shaping()
            .map(|g| PyTransferFunction { inner: g.clone() })
    }

    fn psd_at(&self, omega: f64) -> PyResult<f64> {
        self.inner.psd_at(omega).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseSpec(kind={:?}, variance={})",
            self.kind(),
            self.variance()
        )
    }
}

/// Plant, controller, feedback filter, channel noise and output
/// disturbance. Loop gain is `P K H` with positive feedback.
#[pyclass(name = "LoopModel", module = "infoloop", frozen, from_py_object)]
#[derive(Clone)]
struct PyLoopModel {
    inner: infoloop_core::LoopModel,
}

#[pymethods]
impl PyLoopModel {
    #[new]
    #[pyo3(signature = (plant, controller, channel_noise, output_disturbance, feedback_filter=None, initial_state=None))]
    fn new(
        plant: &PyTransferFunction,
        controller: &PyTransferFunction,
        channel_noise: &PyNoiseSpec,
        output_disturbance: &PyNoiseSpec,
        feedback_filter: Option<&PyTransferFunction>,
        initial_state: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let h = feedback_filter
            .map(|h| h.inner.clone())
            .unwrap_or_else(infoloop_core::TransferFunction::unity);
        let model = infoloop_core::LoopModel::new(
            plant.inner.clone(),
            controller.inner.clone(),
            h,
            channel_noise.inner.clone(),
            output_disturbance.inner.clone(),
        )
        .and_then(|m| m.with_initial_state(initial_state.unwrap_or_default()))
        .map_err(err)?;
        Ok(PyLoopModel { inner: model })
    }

    /// Loads a JSON loop config file.
    #[staticmethod]
    fn from_config(path: &str) -> PyResult<Self> {
        let cfg = infoloop_core::LoopConfigFile::load(path).map_err(err)?;
        cfg.to_model()
            .map(|inner| PyLoopModel { inner })
            .map_err(err)
    }

    fn to_config_json(&self) -> String {
        infoloop_core::LoopConfigFile::from_model(&self.inner, Default::default()).to_json()
    }

    #[getter]
    fn plant(&self) -> PyTransferFunction {
        PyTransferFunction {
            inner: self.inner.plant().clone(),
        }
    }

    #[getter]
    fn controller(&self) -> PyTransferFunction {
        PyTransferFunction {
            inner: self.inner.controller().clone(),
        }
    }

    #[getter]
    fn feedback_filter(&self) -> PyTransferFunction {
        PyTransferFunction {
            inner: self.inner.feedback_filter().clone(),
        }
    }

    fn with_controller(&self, controller: &PyTransferFunction) -> PyResult<Self> {
        self.inner
            .with_controller(controller.inner.clone())
            .map(|inner| PyLoopModel { inner })
            .map_err(err)
    }

    /// Dict with `stabilizing`, `closed_loop_poles`, `offending_poles` and
    /// `unstable_cancellations` (poles as `[re, im]` pairs).
    fn stability<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        report_dict(py, &infoloop_core::is_stabilizing(&self.inner))
    }

    fn is_stabilizing(&self) -> bool {
        infoloop_core::is_stabilizing(&self.inner).stabilizing
    }
}

#[pyfunction]
fn poly_roots(coeffs: Vec<f64>) -> PyResult<Vec<Complex64>> {
    infoloop_core::poly_roots(&coeffs).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, grid_points=spectral::DEFAULT_GRID_POINTS, bits=false))]
fn decompose<'py>(
    py: Python<'py>,
    model: &PyLoopModel,
    grid_points: usize,
    bits: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let report =
        decomposition::decompose(&RateInputs::new(model.inner.clone(), grid(grid_points)?))
            .map_err(err)?;
    let base = if bits { LogBase::Bits } else { LogBase::Nats };
    report_dict(py, &report.in_base(base))
}

#[pyfunction]
#[pyo3(signature = (model, grid_points=spectral::DEFAULT_GRID_POINTS))]
fn directed_info_rate(model: &PyLoopModel, grid_points: usize) -> PyResult<f64> {
    decomposition::directed_info_rate(&RateInputs::new(model.inner.clone(), grid(grid_points)?))
        .map_err(err)
}

#[pyfunction]
fn white_noise_disturbance_term(sigma_v2: f64, sigma_w2: f64) -> PyResult<f64> {
    decomposition::white_noise_disturbance_term(sigma_v2, sigma_w2).map_err(err)
}

#[pyfunction]
fn bode_term_analytic(plant: &PyTransferFunction) -> f64 {
    decomposition::bode_term_analytic(&plant.inner)
}

#[pyfunction]
#[pyo3(signature = (model, controllers, grid_points=spectral::DEFAULT_GRID_POINTS))]
fn controller_independence_check<'py>(
    py: Python<'py>,
    model: &PyLoopModel,
    controllers: Vec<PyTransferFunction>,
    grid_points: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let ks: Vec<_> = controllers.into_iter().map(|k| k.inner).collect();
    let report =
        decomposition::controller_independence_check(&model.inner, &ks, grid(grid_points)?)
            .map_err(err)?;
    report_dict(py, &report)
}

/// Simulated signals after burn-in, as a dict of float lists.
#[pyfunction]
#[pyo3(signature = (model, seed=1, n_samples=montecarlo::DEFAULT_SAMPLES, burn_in=montecarlo::DEFAULT_BURN_IN))]
fn simulate<'py>(
    py: Python<'py>,
    model: &PyLoopModel,
    seed: u64,
    n_samples: usize,
    burn_in: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SimulationConfig::new(model.inner.clone(), n_samples, burn_in, seed).map_err(err)?;
    let traj = py.detach(|| montecarlo::simulate_loop(&cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("w", traj.w)?;
    d.set_item("v", traj.v)?;
    d.set_item("z", traj.z)?;
    d.set_item("y", traj.y)?;
    d.set_item("u", traj.u)?;
    d.set_item("seed", traj.seed)?;
    d.set_item("sample_count", traj.sample_count)?;
    Ok(d)
}

/// Empirical against analytic rate; returns the comparison record.
#[pyfunction]
#[pyo3(signature = (
    model,
    seed=1,
    tolerance=montecarlo::DEFAULT_TOLERANCE,
    n_samples=montecarlo::DEFAULT_SAMPLES,
    burn_in=montecarlo::DEFAULT_BURN_IN,
    segment_length=1024,
    overlap=0.5,
    grid_points=spectral::DEFAULT_GRID_POINTS,
))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    model: &PyLoopModel,
    seed: u64,
    tolerance: f64,
    n_samples: usize,
    burn_in: usize,
    segment_length: usize,
    overlap: f64,
    grid_points: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SimulationConfig::new(model.inner.clone(), n_samples, burn_in, seed).map_err(err)?;
    let params = WelchParams::new(segment_length, overlap).map_err(err)?;
    let g = grid(grid_points)?;
    let record = py
        .detach(|| montecarlo::compare_report(&cfg, &params, g, tolerance))
        .map_err(err)?;
    report_dict(py, &record)
}

#[pymodule]
pub fn infoloop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfoloopError", m.py().get_type::<InfoloopError>())?;
    m.add_class::<PyTransferFunction>()?;
    m.add_class::<PyNoiseSpec>()?;
    m.add_class::<PyLoopModel>()?;
    m.add_function(wrap_pyfunction!(poly_roots, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(directed_info_rate, m)?)?;
    m.add_function(wrap_pyfunction!(white_noise_disturbance_term, m)?)?;
    m.add_function(wrap_pyfunction!(bode_term_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(controller_independence_check, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
