//! Python bindings: spin states, bounds, protocols, drive search and Wigner grids.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sds_core::datasets::{wigner_rows, WignerConfig};
use sds_core::dynamics::{self, effective_zeta};
use sds_core::metrology::{self, SpinStateKind};
use sds_core::optimize::{self, InitialState, SearchSpec};
use sds_core::protocols::{self, FisherValue, Protocol, Route};
use sds_core::{SdsError, C64};

fn to_py(e: SdsError) -> PyErr {
    match e {
        SdsError::InvalidParameter(_)
        | SdsError::NonSymmetricWeights
        | SdsError::UnsupportedParity(_)
        | SdsError::DimensionMismatch { .. }
        | SdsError::Format(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = SdsError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn route(exact: bool) -> Route {
    if exact {
        Route::Exact
    } else {
        Route::Simulated
    }
}

/// Dicke-basis amplitudes of a collective spin state.
#[pyclass(module = "sdsense", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct SpinState {
    inner: metrology::DickeWeights,
}

#[pymethods]
impl SpinState {
    /// `kind` is "ghz" or "coherent_x".
    #[new]
    fn new(kind: &str, n_spins: usize) -> PyResult<Self> {
        let inner = metrology::spin_states(parse::<SpinStateKind>(kind)?, n_spins).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Arbitrary amplitudes ordered from `m = -N/2` to `m = N/2`.
    #[staticmethod]
    fn from_weights(n_spins: usize, weights: Vec<C64>) -> PyResult<Self> {
        let inner = metrology::DickeWeights::new(n_spins, weights).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_spins(&self) -> usize {
        self.inner.n_spins()
    }

    #[getter]
    fn weights(&self) -> Vec<C64> {
        self.inner.weights().to_vec()
    }

    fn mode_occupation(&self, zeta: f64) -> PyResult<f64> {
        metrology::mode_occupation_sds(&self.inner, zeta).map_err(to_py)
    }

    fn qfi_abs(&self, zeta: f64) -> PyResult<f64> {
        metrology::qfi_abs_beta(&self.inner, zeta).map_err(to_py)
    }

    /// 2x2 QFIM for `(β_re, β_im)`.
    fn qfim(&self, zeta: f64) -> PyResult<[[f64; 2]; 2]> {
        let q = metrology::qfim_multiparam_sds(&self.inner, zeta).map_err(to_py)?;
        Ok([[q.get(0, 0), q.get(0, 1)], [q.get(1, 0), q.get(1, 1)]])
    }

    fn incompatibility(&self, zeta: f64) -> PyResult<f64> {
        metrology::incompatibility_sds(&self.inner, zeta).map_err(to_py)
    }

    /// `{"n_mean", "R", "single"|"abs"|"multi": {"qcrb", "sql", "hl"}}`.
    fn bounds<'py>(&self, py: Python<'py>, zeta: f64) -> PyResult<Bound<'py, PyDict>> {
        let report = metrology::bounds_report(&self.inner, zeta).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("n_mean", report.mode_occupation)?;
        out.set_item("R", report.r)?;
        for s in &report.settings {
            let d = PyDict::new(py);
            d.set_item("qcrb", s.qcrb)?;
            d.set_item("sql", s.sql)?;
            d.set_item("hl", s.hl)?;
            out.set_item(s.setting.as_str(), d)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpinState(n_spins={}, weights={:?})",
            self.inner.n_spins(),
            self.inner.weights()
        )
    }
}

/// Stroboscopic drive; frequencies in rad/s.
#[pyclass(module = "sdsense", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct DriveParams {
    inner: dynamics::DriveParams,
}

#[pymethods]
impl DriveParams {
    #[new]
    #[pyo3(signature = (g, delta, phi1, phi2, ell=1, reps=1))]
    fn new(g: f64, delta: f64, phi1: f64, phi2: f64, ell: u32, reps: u32) -> PyResult<Self> {
        let inner = dynamics::DriveParams::new(g, delta, phi1, phi2, ell, reps).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Detuning solved so the schedule reaches squeezing `|ζ| = zeta_abs`.
    #[staticmethod]
    #[pyo3(signature = (g, zeta_abs, phi1=std::f64::consts::PI, ell=1, reps=1))]
    fn for_target(g: f64, zeta_abs: f64, phi1: f64, ell: u32, reps: u32) -> PyResult<Self> {
        let inner = dynamics::DriveParams::for_target(g, zeta_abs, phi1, ell, reps).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn phi1(&self) -> f64 {
        self.inner.phi1
    }

    #[getter]
    fn phi2(&self) -> f64 {
        self.inner.phi2
    }

    #[getter]
    fn ell(&self) -> u32 {
        self.inner.ell
    }

    #[getter]
    fn reps(&self) -> u32 {
        self.inner.reps
    }

    fn segment_duration(&self) -> f64 {
        self.inner.segment_duration()
    }

    fn total_duration(&self) -> f64 {
        self.inner.total_duration()
    }

    fn effective_zeta(&self) -> C64 {
        effective_zeta(&self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "DriveParams(g={}, delta={}, phi1={}, phi2={}, ell={}, reps={})",
            p.g, p.delta, p.phi1, p.phi2, p.ell, p.reps
        )
    }
}

#[pyfunction]
fn target_zeta(z: f64, n_spins: usize) -> f64 {
    dynamics::target_zeta(z, n_spins)
}

#[pyfunction]
fn speed_limit(z: f64, g: f64, n_spins: usize) -> f64 {
    dynamics::speed_limit(z, g, n_spins)
}

#[pyfunction]
fn second_sideband_duration(z: f64, eta: f64, omega: f64) -> f64 {
    dynamics::second_sideband_duration(z, eta, omega)
}

#[pyfunction]
fn squeezing_db(z: f64) -> f64 {
    dynamics::squeezing_db(z)
}

/// Fewest repetitions reaching `threshold` fidelity; returns `(DriveParams, t_min, fidelity, n_max)`.
#[pyfunction]
#[pyo3(signature = (n_spins, z, g=None, threshold=0.99, p_max=512, initial="ghz", rel_tol=1e-8))]
fn min_time_search(
    py: Python<'_>,
    n_spins: usize,
    z: f64,
    g: Option<f64>,
    threshold: f64,
    p_max: u32,
    initial: &str,
    rel_tol: f64,
) -> PyResult<(DriveParams, f64, f64, usize)> {
    let mut spec = SearchSpec {
        n_spins,
        z,
        threshold,
        p_max,
        initial: parse::<InitialState>(initial)?,
        ..SearchSpec::default()
    };
    if let Some(g) = g {
        spec.g = g;
    }
    spec.propagation.rel_tol = rel_tol;
    let r = py.detach(|| optimize::min_time_search(&spec)).map_err(to_py)?;
    Ok((DriveParams { inner: r.params }, r.t_min, r.fidelity, r.n_max))
}

/// Outcome label to probability.
#[pyfunction]
#[pyo3(signature = (protocol, n_spins, zeta, beta, exact=true))]
fn protocol_distribution(
    protocol: &str,
    n_spins: usize,
    zeta: f64,
    beta: C64,
    exact: bool,
) -> PyResult<Vec<(String, f64)>> {
    let d = protocols::protocol_distribution(parse::<Protocol>(protocol)?, n_spins, zeta, beta, route(exact))
        .map_err(to_py)?;
    Ok(d.labels.into_iter().zip(d.probabilities).collect())
}

/// CFI for `|β|` at vanishing signal.
#[pyfunction]
#[pyo3(signature = (protocol, n_spins, zeta, phase=0.0, exact=true))]
fn protocol_cfi(py: Python<'_>, protocol: &str, n_spins: usize, zeta: f64, phase: f64, exact: bool) -> PyResult<f64> {
    let protocol = parse::<Protocol>(protocol)?;
    let r = py
        .detach(|| protocols::protocol_cfi(protocol, n_spins, zeta, phase, route(exact)))
        .map_err(to_py)?;
    match r.value {
        FisherValue::Scalar(v) => Ok(v),
        FisherValue::Matrix(_) => Err(PyRuntimeError::new_err("expected a scalar Fisher information")),
    }
}

/// Large-squeezing limit of the two ancilla readout probabilities.
#[pyfunction]
fn ancilla_probabilities(zeta: f64, g: f64, beta: C64) -> [f64; 2] {
    protocols::ancilla_closed_form(zeta, g, beta)
}

/// Wigner function of the bosonic analogue; returns `(xs, ps, w)` with `w[i][j] = W(xs[i], ps[j])`.
#[pyfunction]
#[pyo3(signature = (state="coherent_x", n_spins=10, zeta=0.3, half_width=6.0, resolution=121))]
fn wigner_grid(
    py: Python<'_>,
    state: &str,
    n_spins: usize,
    zeta: f64,
    half_width: f64,
    resolution: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let cfg = WignerConfig {
        state: parse::<SpinStateKind>(state)?,
        n_spins,
        zeta,
        half_width,
        resolution,
        n_max: None,
    };
    let (_, rows) = py.detach(|| wigner_rows(&cfg)).map_err(to_py)?;
    let n = cfg.resolution;
    let xs: Vec<f64> = rows.iter().step_by(n).map(|r| r.x).collect();
    let ps: Vec<f64> = rows.iter().take(n).map(|r| r.p).collect();
    let w = rows.chunks(n).map(|c| c.iter().map(|r| r.w).collect()).collect();
    Ok((xs, ps, w))
}

#[pymodule]
pub fn sdsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SpinState>()?;
    m.add_class::<DriveParams>()?;
    m.add_function(wrap_pyfunction!(target_zeta, m)?)?;
    m.add_function(wrap_pyfunction!(speed_limit, m)?)?;
    m.add_function(wrap_pyfunction!(second_sideband_duration, m)?)?;
    m.add_function(wrap_pyfunction!(squeezing_db, m)?)?;
    m.add_function(wrap_pyfunction!(min_time_search, m)?)?;
    m.add_function(wrap_pyfunction!(protocol_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(protocol_cfi, m)?)?;
    m.add_function(wrap_pyfunction!(ancilla_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_grid, m)?)?;
    Ok(())
}
