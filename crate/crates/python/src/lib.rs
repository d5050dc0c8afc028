//! Python bindings: operators, the spin chain, OTOC protocols, quasiprobabilities,
//! nonclassicality timescales and the experiment driver.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array2;
use otoc_core::experiment::{
    emit_plot as core_emit_plot, run_experiment as core_run_experiment, ConfigBuilder, PlotKind,
};
use otoc_core::operator::{self, hermitian_eigendecompose, EigenDecomposition, PauliAxis};
use otoc_core::protocols::{protocol_otoc, Decoherence, ProtocolKind};
use otoc_core::qpd::{
    compute_qpd, extract_timescales_with_threshold, nonclassicality_series, otoc_from_qpd, qpd_series,
    total_nonclassicality, NonclassicalitySeries, Qpd, QpdKey, SeriesOptions, TimeGrid, TimescaleReport,
};
use otoc_core::spin_chain::{
    build_hamiltonian, butterfly_operators, InitialState, SpinChainParams, PAPER_G_OVER_J, PAPER_J, PAPER_N_QUBITS,
    PAPER_T2_STAR_US,
};
use otoc_core::state::DensityMatrix;
use otoc_core::{CMatrix, Error, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    if err.is_config_error() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn matrix_from_rows(rows: Vec<Vec<C64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

fn rows_from_matrix(m: &CMatrix) -> Vec<Vec<C64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn qpd_dict(qpd: &Qpd) -> BTreeMap<String, C64> {
    QpdKey::all().map(|k| (k.label(), qpd.get(k))).collect()
}

/// A square complex matrix on 2^k dimensions.
#[pyclass(name = "QubitOperator", module = "otoc_lab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQubitOperator {
    inner: operator::QubitOperator,
}

#[pymethods]
impl PyQubitOperator {
    #[new]
    fn new(rows: Vec<Vec<C64>>) -> PyResult<Self> {
        let inner = operator::QubitOperator::new(matrix_from_rows(rows)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Pauli matrix for axis "x", "y" or "z".
    #[staticmethod]
    fn pauli(axis: &str) -> PyResult<Self> {
        let axis = match axis.to_ascii_lowercase().as_str() {
            "x" => PauliAxis::X,
            "y" => PauliAxis::Y,
            "z" => PauliAxis::Z,
            other => return Err(PyValueError::new_err(format!("unknown Pauli axis `{other}`"))),
        };
        Ok(Self { inner: operator::pauli(axis) })
    }

    #[staticmethod]
    fn identity(dim: usize) -> PyResult<Self> {
        Ok(Self { inner: operator::QubitOperator::identity(dim).map_err(to_py)? })
    }

    /// Places `self` on `site` (1-based) of an `n`-qubit register.
    fn embed(&self, site: usize, n: usize) -> PyResult<Self> {
        Ok(Self { inner: operator::embed_at_site(&self.inner, site, n).map_err(to_py)? })
    }

    /// Tensor product with `self` as the more significant factor.
    fn tensor(&self, other: &PyQubitOperator) -> Self {
        Self { inner: operator::tensor(&self.inner, &other.inner) }
    }

    fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    fn trace(&self) -> C64 {
        self.inner.trace()
    }

    fn hermiticity_error(&self) -> f64 {
        self.inner.hermiticity_error()
    }

    fn unitarity_error(&self) -> f64 {
        self.inner.unitarity_error()
    }

    /// Sorted eigenvalues of a Hermitian operator.
    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        Ok(hermitian_eigendecompose(&self.inner).map_err(to_py)?.eigenvalues().to_vec())
    }

    /// exp(-iHt) for a Hermitian `self`.
    fn propagator(&self, t: f64) -> PyResult<Self> {
        Ok(Self { inner: hermitian_eigendecompose(&self.inner).map_err(to_py)?.propagator(t) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn to_list(&self) -> Vec<Vec<C64>> {
        rows_from_matrix(self.inner.matrix())
    }

    fn __matmul__(&self, other: &PyQubitOperator) -> PyResult<Self> {
        Ok(Self { inner: self.inner.dot(&other.inner).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("QubitOperator(dim={})", self.inner.dim())
    }
}

/// Ising chain with W = sz on site 1, V = sz on site N and a chosen initial state.
#[pyclass(name = "SpinChain", module = "otoc_lab", frozen)]
struct PySpinChain {
    params: SpinChainParams,
    eig: EigenDecomposition,
    hamiltonian: operator::QubitOperator,
    w: operator::QubitOperator,
    v: operator::QubitOperator,
    rho: DensityMatrix,
    decoherence: Option<Decoherence>,
}

impl PySpinChain {
    fn grid(&self, t_max_us: f64, dt_grid_us: f64) -> PyResult<TimeGrid> {
        TimeGrid::new(t_max_us, dt_grid_us).map_err(to_py)
    }

    fn series(&self, t_max_us: f64, dt_grid_us: f64, workers: usize) -> PyResult<NonclassicalitySeries> {
        let grid = self.grid(t_max_us, dt_grid_us)?;
        let options = SeriesOptions { workers, ..SeriesOptions::default() };
        nonclassicality_series(&self.rho, &self.w, &self.v, &self.eig, &grid, self.decoherence.as_ref(), &options)
            .map_err(to_py)
    }
}

#[pymethods]
impl PySpinChain {
    /// `t2_star_us=None` gives the closed system; `temperature_over_j=None` the
    /// infinite-temperature state.
    #[new]
    #[pyo3(signature = (
        h_over_j = 0.5,
        n_qubits = PAPER_N_QUBITS,
        g_over_j = PAPER_G_OVER_J,
        t2_star_us = Some(PAPER_T2_STAR_US),
        temperature_over_j = Some(1.0),
        dt_integration_us = 0.1,
    ))]
    fn new(
        h_over_j: f64,
        n_qubits: usize,
        g_over_j: f64,
        t2_star_us: Option<f64>,
        temperature_over_j: Option<f64>,
        dt_integration_us: f64,
    ) -> PyResult<Self> {
        let params = SpinChainParams::new(n_qubits, PAPER_J, h_over_j, g_over_j).map_err(to_py)?;
        let hamiltonian = build_hamiltonian(&params).map_err(to_py)?;
        let eig = hermitian_eigendecompose(&hamiltonian).map_err(to_py)?;
        let (w, v) = butterfly_operators(&params).map_err(to_py)?;
        let initial = match temperature_over_j {
            Some(t) => InitialState::Gibbs { temperature_over_j: t },
            None => InitialState::InfiniteTemperature,
        };
        let rho = initial.build(&params, &eig).map_err(to_py)?;
        let decoherence = t2_star_us.map(|t2| Decoherence::new(t2, dt_integration_us)).transpose().map_err(to_py)?;
        Ok(Self { params, eig, hamiltonian, w, v, rho, decoherence })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.params.n_qubits
    }

    #[getter]
    fn j_coupling(&self) -> f64 {
        self.params.j_coupling
    }

    #[getter]
    fn h_over_j(&self) -> f64 {
        self.params.h_over_j
    }

    fn hamiltonian(&self) -> PyQubitOperator {
        PyQubitOperator { inner: self.hamiltonian.clone() }
    }

    /// The butterfly operators (W, V).
    fn butterfly_operators(&self) -> (PyQubitOperator, PyQubitOperator) {
        (PyQubitOperator { inner: self.w.clone() }, PyQubitOperator { inner: self.v.clone() })
    }

    fn initial_state(&self) -> Vec<Vec<C64>> {
        rows_from_matrix(self.rho.matrix())
    }

    /// F(t) from one of "ideal", "weak", "interferometric", "clock".
    #[pyo3(signature = (t_us, protocol = "ideal"))]
    fn otoc(&self, t_us: f64, protocol: &str) -> PyResult<C64> {
        let kind: ProtocolKind = protocol.parse().map_err(to_py)?;
        let point = protocol_otoc(kind, &self.w, &self.v, &self.rho, &self.eig, t_us, self.decoherence.as_ref())
            .map_err(to_py)?;
        Ok(point.value)
    }

    /// The 16 quasiprobabilities at `t_us`, keyed "abcd" with v1, w2, v2, w3 = (-1)^a, (-1)^b, (-1)^c, (-1)^d.
    fn qpd(&self, t_us: f64) -> PyResult<BTreeMap<String, C64>> {
        let qpd =
            compute_qpd(&self.rho, &self.w, &self.v, &self.eig, t_us, self.decoherence.as_ref()).map_err(to_py)?;
        Ok(qpd_dict(&qpd))
    }

    /// Quasiprobabilities along the grid 0, dt, ..., t_max.
    #[pyo3(signature = (t_max_us, dt_grid_us = 0.1, workers = 1))]
    fn qpd_series(&self, t_max_us: f64, dt_grid_us: f64, workers: usize) -> PyResult<Vec<BTreeMap<String, C64>>> {
        let grid = self.grid(t_max_us, dt_grid_us)?;
        let options = SeriesOptions { workers, ..SeriesOptions::default() };
        let qpds = qpd_series(&self.rho, &self.w, &self.v, &self.eig, &grid, self.decoherence.as_ref(), &options)
            .map_err(to_py)?;
        Ok(qpds.iter().map(qpd_dict).collect())
    }

    /// (times, n_tilde) along the grid.
    #[pyo3(signature = (t_max_us, dt_grid_us = 0.1, workers = 1))]
    fn nonclassicality(&self, t_max_us: f64, dt_grid_us: f64, workers: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let s = self.series(t_max_us, dt_grid_us, workers)?;
        Ok((s.times().to_vec(), s.values().to_vec()))
    }

    /// Onset, first maximum and zero return of the nonclassicality.
    #[pyo3(signature = (t_max_us, dt_grid_us = 0.1, threshold = None, workers = 1))]
    fn timescales(
        &self,
        t_max_us: f64,
        dt_grid_us: f64,
        threshold: Option<f64>,
        workers: usize,
    ) -> PyResult<BTreeMap<String, Option<f64>>> {
        let s = self.series(t_max_us, dt_grid_us, workers)?;
        let mut report =
            extract_timescales_with_threshold(&s, threshold.unwrap_or(dt_grid_us * dt_grid_us)).map_err(to_py)?;
        report.h_over_j = Some(self.params.h_over_j);
        Ok(report_dict(&report))
    }
}

fn report_dict(r: &TimescaleReport) -> BTreeMap<String, Option<f64>> {
    BTreeMap::from([
        ("t_star_us".to_string(), r.t_star),
        ("t_m_us".to_string(), r.t_m),
        ("t_z_us".to_string(), r.t_z),
        ("ratio".to_string(), r.ratio),
        ("threshold".to_string(), Some(r.threshold)),
        ("h_over_j".to_string(), r.h_over_j),
    ])
}

/// F = sum of v1 w2 v2 w3 p over a QPD dict.
#[pyfunction]
fn otoc_from_quasiprobabilities(qpd: BTreeMap<String, C64>) -> PyResult<C64> {
    Ok(otoc_from_qpd(&qpd_from_dict(&qpd)?))
}

/// Sum of |p| minus one over a QPD dict.
#[pyfunction]
fn nonclassicality_of(qpd: BTreeMap<String, C64>) -> PyResult<f64> {
    Ok(total_nonclassicality(&qpd_from_dict(&qpd)?))
}

fn qpd_from_dict(qpd: &BTreeMap<String, C64>) -> PyResult<Qpd> {
    let mut values = [C64::new(0.0, 0.0); 16];
    for key in QpdKey::all() {
        let label = key.label();
        values[key.index()] =
            *qpd.get(&label).ok_or_else(|| PyValueError::new_err(format!("missing quasiprobability `{label}`")))?;
    }
    Ok(Qpd { values, t: 0.0, decoherent: false })
}

/// Timescales of a sampled nonclassicality curve on a uniform grid.
#[pyfunction]
#[pyo3(signature = (times, values, threshold = None))]
fn extract_timescales(
    times: Vec<f64>,
    values: Vec<f64>,
    threshold: Option<f64>,
) -> PyResult<BTreeMap<String, Option<f64>>> {
    let s = NonclassicalitySeries::new(times, values).map_err(to_py)?;
    let threshold = threshold.unwrap_or(s.dt() * s.dt());
    Ok(report_dict(&extract_timescales_with_threshold(&s, threshold).map_err(to_py)?))
}

/// Runs an experiment from a dict of config keys; returns the written paths.
#[pyfunction]
fn run_experiment(config: BTreeMap<String, String>) -> PyResult<Vec<PathBuf>> {
    let mut builder = ConfigBuilder::new();
    for (k, v) in &config {
        builder.set(k, v).map_err(to_py)?;
    }
    let env = std::env::var(otoc_core::experiment::OUTPUT_DIR_ENV).ok();
    let cfg = builder.resolve(env.as_deref()).map_err(to_py)?;
    let outcome = core_run_experiment(&cfg).map_err(to_py)?;
    let mut files = outcome.files;
    files.push(outcome.manifest);
    Ok(files)
}

/// Renders an SVG from a CSV written by `run_experiment`.
#[pyfunction]
#[pyo3(signature = (csv_path, kind, output = None))]
fn emit_plot(csv_path: PathBuf, kind: &str, output: Option<PathBuf>) -> PyResult<PathBuf> {
    let kind: PlotKind = kind.parse().map_err(to_py)?;
    core_emit_plot(&csv_path, kind, output.as_deref()).map_err(to_py)
}

#[pymodule]
fn otoc_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", otoc_core::VERSION)?;
    m.add("PAPER_J", PAPER_J)?;
    m.add("PAPER_T2_STAR_US", PAPER_T2_STAR_US)?;
    m.add_class::<PyQubitOperator>()?;
    m.add_class::<PySpinChain>()?;
    m.add_function(wrap_pyfunction!(otoc_from_quasiprobabilities, m)?)?;
    m.add_function(wrap_pyfunction!(nonclassicality_of, m)?)?;
    m.add_function(wrap_pyfunction!(extract_timescales, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(emit_plot, m)?)?;
    Ok(())
}
