//! Python bindings: connection functions, windows, sampled graphs, census,
//! functionals, moment integrals, distances and scenario runs.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rcmlab::analysis::{self, FunctionalSpec, Statistic};
use rcmlab::census::{self, GraphClass};
use rcmlab::experiments::{self, Command, Scenario};
use rcmlab::moments::{self, MomentEstimate, MomentOptions};
use rcmlab::{ConnectionFunction, PairMarkSource, RcmError, RcmGraph, Window};

fn err(e: RcmError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn estimate(e: MomentEstimate) -> (f64, f64) {
    (e.value, e.std_error)
}

#[pyclass(name = "Phi", frozen)]
struct PyPhi(ConnectionFunction);

#[pymethods]
impl PyPhi {
    #[staticmethod]
    fn gilbert(r: f64) -> PyResult<Self> {
        ConnectionFunction::gilbert(r).map(PyPhi).map_err(err)
    }

    #[staticmethod]
    fn scaled_indicator(p: f64, r: f64) -> PyResult<Self> {
        ConnectionFunction::scaled_indicator(p, r).map(PyPhi).map_err(err)
    }

    #[staticmethod]
    fn exponential(theta: f64) -> PyResult<Self> {
        ConnectionFunction::exponential(theta).map(PyPhi).map_err(err)
    }

    #[staticmethod]
    fn gaussian(s: f64) -> PyResult<Self> {
        ConnectionFunction::gaussian(s).map(PyPhi).map_err(err)
    }

    /// phi at distance `t`.
    fn __call__(&self, t: f64) -> f64 {
        self.0.eval_radial(t)
    }

    fn m_phi(&self, dim: usize) -> f64 {
        self.0.m_phi(dim)
    }

    fn dominates(&self, psi: &PyPhi) -> bool {
        self.0.dominates(&psi.0)
    }

    fn __repr__(&self) -> String {
        format!("Phi({})", self.0)
    }
}

#[pyclass(name = "Window", frozen)]
struct PyWindow(Window);

#[pymethods]
impl PyWindow {
    /// Cube `[-extent, extent]^dim`.
    #[staticmethod]
    fn cube(dim: usize, extent: f64) -> PyResult<Self> {
        Window::centered_box(dim, extent).map(PyWindow).map_err(err)
    }

    #[staticmethod]
    fn ball(dim: usize, radius: f64) -> PyResult<Self> {
        Window::centered_ball(dim, radius).map(PyWindow).map_err(err)
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.0.volume()
    }

    #[getter]
    fn inradius(&self) -> f64 {
        self.0.inradius()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        x.len() == self.0.dim() && self.0.contains(&x)
    }

    fn __repr__(&self) -> String {
        format!("Window({:?}, dim={}, extent={})", self.0.shape(), self.0.dim(), self.0.extent())
    }
}

#[pyclass(name = "Graph", frozen)]
struct PyGraph(RcmGraph);

#[pymethods]
impl PyGraph {
    /// Samples the RCM on `window` grown by `padding`.
    #[staticmethod]
    #[pyo3(signature = (window, phi, beta, padding, seed=0))]
    fn sample(window: &PyWindow, phi: &PyPhi, beta: f64, padding: f64, seed: u64) -> PyResult<Self> {
        let pts = rcmlab::sample_poisson(&window.0, padding, beta, rcmlab::derive_seed(seed, 0)).map_err(err)?;
        rcmlab::build_rcm(pts, phi.0, PairMarkSource::new(rcmlab::derive_seed(seed, 1)))
            .map(PyGraph)
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.0.points().iter().map(|p| p.to_vec()).collect()
    }

    fn ids(&self) -> Vec<i64> {
        self.0.points().ids().to_vec()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn degree(&self, i: usize) -> PyResult<usize> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err(format!("no point {i}")));
        }
        Ok(self.0.degree(i))
    }

    /// Component counts in `window`, keyed like the census report.
    #[pyo3(signature = (window, k_max=8))]
    fn census<'py>(&self, py: Python<'py>, window: &PyWindow, k_max: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = census::census(&self.0, &window.0, k_max).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("total_inside", r.total_inside)?;
        d.set_item("boundary_touching", r.boundary_touching)?;
        d.set_item("points_in_window", r.points_in_window)?;
        d.set_item("lexmin_by_order", r.lexmin_by_order.clone())?;
        d.set_item("inside_by_order", r.inside_by_order.clone())?;
        let by_class = |m: &std::collections::BTreeMap<GraphClass, u64>| -> Vec<(String, u64)> {
            m.iter().map(|(c, n)| (c.id(), *n)).collect()
        };
        d.set_item("lexmin_by_class", by_class(&r.lexmin_by_class).into_iter().collect::<Vec<_>>())?;
        d.set_item("inside_by_class", by_class(&r.inside_by_class).into_iter().collect::<Vec<_>>())?;
        Ok(d)
    }
}

/// A statistic of the RCM in a window. `statistic` is the JSON object used
/// in scenario files, e.g. `{"kind": "count_order", "k": 1, "mode": "lexmin"}`.
#[pyclass(name = "Functional", frozen)]
struct PyFunctional(FunctionalSpec);

#[pymethods]
impl PyFunctional {
    #[new]
    fn new(statistic: &str, window: &PyWindow, phi: &PyPhi, beta: f64) -> PyResult<Self> {
        let st: Statistic = serde_json::from_str(statistic).map_err(|e| PyValueError::new_err(e.to_string()))?;
        FunctionalSpec::new(st, window.0.clone(), phi.0, beta)
            .map(PyFunctional)
            .map_err(err)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.statistic.label()
    }

    /// Independent evaluations on `n` samples.
    #[pyo3(signature = (n, seed=0))]
    fn sample_values(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        py.detach(|| self.0.sample_values(n, seed)).map_err(err)
    }

    /// `Delta_x F` on the sample drawn with `seed`.
    #[pyo3(signature = (x, seed=0))]
    fn difference(&self, x: Vec<f64>, seed: u64) -> PyResult<f64> {
        let g = self.0.sample_graph(seed).map_err(err)?;
        analysis::difference(&self.0, &g, &x).map_err(err)
    }

    /// Monte Carlo Poincare bound `(value, std_error)` on `Var F`.
    #[pyo3(signature = (outer=2000, probe_points=4, seed=0))]
    fn poincare_bound(&self, py: Python<'_>, outer: u64, probe_points: usize, seed: u64) -> PyResult<(f64, f64)> {
        py.detach(|| analysis::poincare_bound(&self.0, outer, probe_points, seed))
            .map(estimate)
            .map_err(err)
    }
}

/// `(rho, std_error)` with `E eta_G(W) = rho * vol(W)` for a class id such
/// as `"k2-00000001"`.
#[pyfunction]
#[pyo3(signature = (class_id, phi, beta, dim=2, samples=200_000, seed=0))]
fn expected_intensity(
    py: Python<'_>,
    class_id: &str,
    phi: &PyPhi,
    beta: f64,
    dim: usize,
    samples: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let class: GraphClass = class_id.parse().map_err(err)?;
    let opts = MomentOptions::new(dim).with_samples(samples).with_seed(seed);
    py.detach(|| moments::expected_count_intensity(&class, &phi.0, beta, &opts))
        .map(estimate)
        .map_err(err)
}

/// Asymptotic covariance of the numbers of `k`- and `l`-components.
#[pyfunction]
#[pyo3(signature = (k, l, phi, beta, dim=2, samples=200_000, seed=0))]
fn asy_cov_kl(
    py: Python<'_>,
    k: usize,
    l: usize,
    phi: &PyPhi,
    beta: f64,
    dim: usize,
    samples: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let opts = MomentOptions::new(dim).with_samples(samples).with_seed(seed);
    py.detach(|| moments::asy_cov_kl(k, l, &phi.0, &phi.0, beta, &opts))
        .map(estimate)
        .map_err(err)
}

#[pyfunction]
fn class_id(edges: Vec<(usize, usize)>, order: usize) -> PyResult<String> {
    GraphClass::from_edges(order, &edges).map(|c| c.id()).map_err(err)
}

#[pyfunction]
fn kolmogorov_distance(samples: Vec<f64>) -> PyResult<f64> {
    analysis::kolmogorov_distance(&samples).map_err(err)
}

#[pyfunction]
fn wasserstein_distance(samples: Vec<f64>) -> PyResult<f64> {
    analysis::wasserstein_distance(&samples).map_err(err)
}

/// Runs a scenario file and writes its outputs; returns the scenario
/// directory.
#[pyfunction]
#[pyo3(signature = (config, command, out="results", seed=None))]
fn run_scenario(py: Python<'_>, config: PathBuf, command: &str, out: &str, seed: Option<u64>) -> PyResult<String> {
    let command: Command = serde_json::from_value(serde_json::Value::String(command.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown command {command:?}")))?;
    let mut scenario = Scenario::load(&config).map_err(err)?;
    if let Some(s) = seed {
        scenario = scenario.with_seed(s);
    }
    let out = PathBuf::from(out);
    py.detach(|| {
        let e = experiments::run_scenario(&scenario, command)?;
        experiments::emit(&e, &out)
    })
    .map(|p| p.display().to_string())
    .map_err(err)
}

#[pymodule]
fn pyrcmlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPhi>()?;
    m.add_class::<PyWindow>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyFunctional>()?;
    m.add_function(wrap_pyfunction!(expected_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(asy_cov_kl, m)?)?;
    m.add_function(wrap_pyfunction!(class_id, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_distance, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("__version__", experiments::VERSION)?;
    Ok(())
}
