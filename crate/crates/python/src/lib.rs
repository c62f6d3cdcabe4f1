//! Python module `qdesc`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use qdesc_core::circuit_file::{parse_circuit, to_text};
use qdesc_core::engine::{evolve, run_with_trace, Circuit, DescriptorSet, FlowTrace};
use qdesc_core::experiments::{
    build_eta_experiment, build_telephone_with, build_teleportation, differential_check, random_circuit,
    run_experiment as run_core_experiment, trace_rows, Axis, ExperimentParams, TelephoneOptions,
};
use qdesc_core::oracle::simulate;
use qdesc_core::provenance::{audit, flow_dot, DEFAULT_PROBES};
use qdesc_core::tomography::{bloch_components, reduced_density};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: Result<Value, serde_json::Error>) -> PyResult<Bound<'py, PyAny>> {
    let text = value.map_err(err)?.to_string();
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix_rows(m: &qdesc_core::pauli::Matrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

#[pyclass(name = "Circuit", frozen)]
struct PyCircuit(Circuit);

#[pymethods]
impl PyCircuit {
    /// Parse the text circuit format; raises ValueError with `line:column` on bad input.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_circuit(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn empty(n: usize) -> PyResult<Self> {
        Circuit::empty(n).map(Self).map_err(err)
    }

    #[staticmethod]
    fn teleportation(phi: [f64; 3]) -> PyResult<Self> {
        build_teleportation(phi).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (phi, chain=0, decohere=false, scramble=None))]
    fn telephone(phi: [f64; 3], chain: usize, decohere: bool, scramble: Option<u64>) -> PyResult<Self> {
        build_telephone_with(phi, &TelephoneOptions { chain, decohere, scramble }).map(Self).map_err(err)
    }

    /// `prerotation` is `(axis, angle)` with axis one of "x", "y", "z".
    #[staticmethod]
    #[pyo3(signature = (alpha, beta, eta, prerotation=None))]
    fn eta(alpha: f64, beta: Complex64, eta: Complex64, prerotation: Option<(String, f64)>) -> PyResult<Self> {
        let pre = match prerotation {
            Some((axis, angle)) => Some((axis.parse::<Axis>().map_err(err)?, angle)),
            None => None,
        };
        build_eta_experiment(alpha, beta, eta, pre).map(Self).map_err(err)
    }

    /// Same circuit as `qdesc fuzz` produces for this seed.
    #[staticmethod]
    fn random(n: usize, depth: usize, seed: u64) -> PyResult<Self> {
        random_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn gates(&self) -> Vec<String> {
        self.0.gates().iter().map(|g| g.to_string()).collect()
    }

    fn parameters(&self) -> Vec<String> {
        self.0.parameter_table().into_keys().collect()
    }

    fn to_text(&self) -> String {
        to_text(&self.0)
    }

    fn evolve(&self) -> PyResult<PyDescriptors> {
        evolve(&self.0).map(PyDescriptors).map_err(err)
    }

    fn trace(&self) -> PyResult<PyTrace> {
        run_with_trace(&self.0).map(PyTrace).map_err(err)
    }

    /// Final state vector from the dense oracle; wire 1 is the most significant bit.
    fn state(&self) -> PyResult<Vec<Complex64>> {
        simulate(&self.0).map(|s| s.amplitudes().to_vec()).map_err(err)
    }

    fn compare_oracle<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = differential_check(&self.0).map_err(err)?;
        to_py(py, serde_json::to_value(&r))
    }

    #[pyo3(signature = (probes=DEFAULT_PROBES, seed=0))]
    fn audit<'py>(&self, py: Python<'py>, probes: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let r = audit(&self.0, probes, seed).map_err(err)?;
        to_py(py, serde_json::to_value(&r))
    }

    fn __repr__(&self) -> String {
        format!("Circuit(n={}, depth={}, gates={})", self.0.n(), self.0.depth(), self.0.gates().len())
    }

    fn __str__(&self) -> String {
        to_text(&self.0)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

/// Descriptors of every wire at one time step.
#[pyclass(name = "Descriptors", frozen)]
struct PyDescriptors(DescriptorSet);

impl PyDescriptors {
    fn wire(&self, wire: usize) -> PyResult<&qdesc_core::engine::Descriptor> {
        self.0.get(wire).ok_or_else(|| err(format!("wire {wire} out of range for {} wires", self.0.n())))
    }
}

#[pymethods]
impl PyDescriptors {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn time(&self) -> usize {
        self.0.time()
    }

    fn x(&self, wire: usize) -> PyResult<String> {
        Ok(self.wire(wire)?.x().to_string())
    }

    fn z(&self, wire: usize) -> PyResult<String> {
        Ok(self.wire(wire)?.z().to_string())
    }

    fn y(&self, wire: usize) -> PyResult<String> {
        self.wire(wire)?.y().map(|s| s.to_string()).map_err(err)
    }

    fn bloch(&self, wire: usize) -> PyResult<(f64, f64, f64)> {
        let [x, y, z] = bloch_components(&self.0, wire).map_err(err)?;
        Ok((x, y, z))
    }

    /// Reduced density matrix; `wires[0]` is the leftmost tensor factor.
    fn reduced_density(&self, wires: Vec<usize>) -> PyResult<Vec<Vec<Complex64>>> {
        reduced_density(&self.0, &wires).map(|d| matrix_rows(d.matrix())).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Descriptors(n={}, time={})", self.0.n(), self.0.time())
    }
}

/// Descriptor snapshots after every step, with provenance tags.
#[pyclass(name = "Trace", frozen)]
struct PyTrace(FlowTrace);

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.0.snapshots.len()
    }

    fn at(&self, time: usize) -> PyResult<PyDescriptors> {
        self.0.at(time).cloned().map(PyDescriptors).ok_or_else(|| err(format!("no snapshot at t={time}")))
    }

    fn last(&self) -> PyDescriptors {
        PyDescriptors(self.0.last().clone())
    }

    /// Per (time, wire) rows with descriptor text and component tags.
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, serde_json::to_value(trace_rows(&self.0)))
    }

    fn dot(&self) -> String {
        flow_dot(&self.0)
    }
}

/// Run a named experiment ("teleport", "telephone", "eta") and return its report as a dict.
/// `params` takes the same keys as the `parameters` field of the report.
#[pyfunction]
#[pyo3(signature = (name, params=None))]
fn run_experiment<'py>(py: Python<'py>, name: &str, params: Option<Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let params: ExperimentParams = match params {
        Some(p) => {
            let text: String = py.import("json")?.call_method1("dumps", (p,))?.extract()?;
            serde_json::from_str(&text).map_err(err)?
        }
        None => ExperimentParams::default(),
    };
    let report = run_core_experiment(name, &params).map_err(err)?;
    to_py(py, serde_json::to_value(&report))
}

#[pymodule]
fn qdesc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyDescriptors>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
