//! Python bindings. Built as the extension module `macrohom`.

use macrohom as core;
use macrohom::trace::fwhm_pedestal;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: core::HomError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "CrystalParams", module = "macrohom", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyCrystal(core::CrystalParams);

#[pymethods]
impl PyCrystal {
    #[new]
    #[pyo3(signature = (l_c = 10.0, walkoff = 0.2))]
    fn new(l_c: f64, walkoff: f64) -> PyResult<Self> {
        core::CrystalParams::new(l_c, walkoff).map(PyCrystal).map_err(err)
    }

    /// Crystal whose spectral FWHM equals `target_fwhm_nm` at the given pump.
    #[staticmethod]
    #[pyo3(signature = (target_fwhm_nm, pump, l_c = 10.0))]
    fn calibrated(target_fwhm_nm: f64, pump: &PyPump, l_c: f64) -> PyResult<Self> {
        core::calibrate_walkoff(target_fwhm_nm, &pump.0, l_c).map(PyCrystal).map_err(err)
    }

    #[getter]
    fn l_c(&self) -> f64 {
        self.0.l_c
    }

    #[getter]
    fn walkoff(&self) -> f64 {
        self.0.walkoff
    }

    fn __repr__(&self) -> String {
        format!("CrystalParams(l_c={}, walkoff={})", self.0.l_c, self.0.walkoff)
    }
}

#[pyclass(name = "PumpParams", module = "macrohom", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyPump(core::PumpParams);

#[pymethods]
impl PyPump {
    #[new]
    #[pyo3(signature = (g_peak = 7.5, t_p = 18.0, lambda_deg = 709.3, lambda_pump = 354.7))]
    fn new(g_peak: f64, t_p: f64, lambda_deg: f64, lambda_pump: f64) -> PyResult<Self> {
        core::PumpParams::new(g_peak, t_p, lambda_deg, lambda_pump).map(PyPump).map_err(err)
    }

    fn with_gain(&self, g_peak: f64) -> PyResult<Self> {
        let p = self.0.with_gain(g_peak);
        p.validate().map_err(err)?;
        Ok(PyPump(p))
    }

    #[getter]
    fn g_peak(&self) -> f64 {
        self.0.g_peak
    }

    #[getter]
    fn t_p(&self) -> f64 {
        self.0.t_p
    }

    #[getter]
    fn lambda_deg(&self) -> f64 {
        self.0.lambda_deg
    }

    #[getter]
    fn lambda_pump(&self) -> f64 {
        self.0.lambda_pump
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "PumpParams(g_peak={}, t_p={}, lambda_deg={}, lambda_pump={})",
            p.g_peak, p.t_p, p.lambda_deg, p.lambda_pump
        )
    }
}

#[pyclass(name = "DetectionModel", module = "macrohom", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyDetection(core::DetectionModel);

#[pymethods]
impl PyDetection {
    #[new]
    #[pyo3(signature = (eta = 0.03, m_spatial = 10, noise_var = 0.0, n_pulses = 30000))]
    fn new(eta: f64, m_spatial: u32, noise_var: f64, n_pulses: usize) -> PyResult<Self> {
        let d = core::DetectionModel { eta, m_spatial, noise_var, n_pulses };
        d.validate().map_err(err)?;
        Ok(PyDetection(d))
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    #[getter]
    fn m_spatial(&self) -> u32 {
        self.0.m_spatial
    }

    #[getter]
    fn noise_var(&self) -> f64 {
        self.0.noise_var
    }

    #[getter]
    fn n_pulses(&self) -> usize {
        self.0.n_pulses
    }
}

#[pyclass(name = "LatticeSpec", module = "macrohom", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyLattice(core::LatticeSpec);

#[pymethods]
impl PyLattice {
    #[new]
    fn new(n_time_slices: usize, n_freq_bins: usize, slice_duration: f64, bin_width: f64) -> Self {
        PyLattice(core::LatticeSpec { n_time_slices, n_freq_bins, slice_duration, bin_width })
    }

    #[staticmethod]
    #[pyo3(signature = (crystal, pump, n_bins = 12, bins_per_fwhm = 8.0))]
    fn for_config(crystal: &PyCrystal, pump: &PyPump, n_bins: usize, bins_per_fwhm: f64) -> PyResult<Self> {
        core::LatticeSpec::with_bins(&crystal.0, &pump.0, n_bins, bins_per_fwhm)
            .map(PyLattice)
            .map_err(err)
    }

    #[getter]
    fn n_time_slices(&self) -> usize {
        self.0.n_time_slices
    }

    #[getter]
    fn n_freq_bins(&self) -> usize {
        self.0.n_freq_bins
    }

    #[getter]
    fn slice_duration(&self) -> f64 {
        self.0.slice_duration
    }

    #[getter]
    fn bin_width(&self) -> f64 {
        self.0.bin_width
    }

    fn mean_photons_per_cell(&self, crystal: &PyCrystal, pump: &PyPump) -> f64 {
        self.0.mean_photons_per_cell(&crystal.0, &pump.0)
    }
}

fn grid(crystal: &PyCrystal, pump: &PyPump, tau: &[f64], single_mode: bool, refine: usize) -> PyResult<core::SpectralGrid> {
    if single_mode {
        return Ok(core::SpectralGrid::single_mode());
    }
    let tau_max = tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    core::SpectralGrid::for_config_scaled(&crystal.0, &pump.0, tau_max, refine).map_err(err)
}

/// Bogoliubov coefficients `(U, V)` at detuning `omega` (rad/ps) and time `t` (ps).
#[pyfunction]
fn uv(omega: f64, t: f64, crystal: &PyCrystal, pump: &PyPump) -> (Complex64, f64) {
    let s = core::uv(omega, t, &crystal.0, &pump.0);
    (s.u, s.v.re)
}

#[pyfunction]
fn spectral_fwhm_nm(crystal: &PyCrystal, pump: &PyPump) -> PyResult<f64> {
    core::spectral_fwhm_nm(&crystal.0, &pump.0).map_err(err)
}

/// Ideal normalized difference variance at each delay.
#[pyfunction]
#[pyo3(signature = (tau, crystal, pump, single_mode = false, refine = 1))]
fn nrf_trace(tau: Vec<f64>, crystal: &PyCrystal, pump: &PyPump, single_mode: bool, refine: usize) -> PyResult<Vec<f64>> {
    let g = grid(crystal, pump, &tau, single_mode, refine)?;
    core::nrf_trace(&tau, &crystal.0, &pump.0, &g).map(|t| t.value).map_err(err)
}

/// Pedestal component of the trace.
#[pyfunction]
#[pyo3(signature = (tau, crystal, pump, single_mode = false, refine = 1))]
fn pedestal_trace(tau: Vec<f64>, crystal: &PyCrystal, pump: &PyPump, single_mode: bool, refine: usize) -> PyResult<Vec<f64>> {
    let g = grid(crystal, pump, &tau, single_mode, refine)?;
    core::pedestal_trace(&tau, &crystal.0, &pump.0, &g).map(|t| t.value).map_err(err)
}

/// Apply detection efficiency: `1 + η(x − 1)`.
#[pyfunction]
fn detected(values: Vec<f64>, det: &PyDetection) -> PyResult<Vec<f64>> {
    let t = core::Trace {
        tau: vec![0.0; values.len()],
        value: values,
        kind: core::TraceKind::NrfIdeal,
        params: Default::default(),
    };
    core::detected_trace(&t, &det.0).map(|t| t.value).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (tau, crystal, pump, det, single_mode = false))]
fn g2_trace<'py>(
    py: Python<'py>,
    tau: Vec<f64>,
    crystal: &PyCrystal,
    pump: &PyPump,
    det: &PyDetection,
    single_mode: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(crystal, pump, &tau, single_mode, 1)?;
    let r = core::g2_trace(&tau, &crystal.0, &pump.0, &g, &det.0).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("g2", r.trace.value)?;
    d.set_item("n_mode", r.n_mode)?;
    d.set_item("fano_total", r.fano_total)?;
    Ok(d)
}

fn trace_of(tau: &[f64], value: Vec<f64>) -> PyResult<core::Trace> {
    if tau.len() != value.len() {
        return Err(PyValueError::new_err("tau and values differ in length"));
    }
    Ok(core::Trace { tau: tau.to_vec(), value, kind: core::TraceKind::NrfIdeal, params: Default::default() })
}

#[pyfunction]
fn visibility(values: Vec<f64>) -> PyResult<f64> {
    let n = values.len();
    core::visibility(&trace_of(&vec![0.0; n], values)?).map_err(err)
}

/// Narrow-peak FWHM from the full and pedestal traces (ps).
#[pyfunction]
fn fwhm_narrow(tau: Vec<f64>, nrf: Vec<f64>, pedestal: Vec<f64>) -> PyResult<f64> {
    core::fwhm_narrow(&trace_of(&tau, nrf)?, &trace_of(&tau, pedestal)?).map_err(err)
}

#[pyfunction]
fn fwhm_pedestal_ps(tau: Vec<f64>, pedestal: Vec<f64>) -> PyResult<f64> {
    fwhm_pedestal(&trace_of(&tau, pedestal)?).map_err(err)
}

#[pyfunction]
fn mode_count_long(tau: Vec<f64>, nrf: Vec<f64>, pedestal: Vec<f64>) -> PyResult<f64> {
    core::mode_count_long(&trace_of(&tau, nrf)?, &trace_of(&tau, pedestal)?).map_err(err)
}

#[pyfunction]
fn mode_count_g2(g2_edge: f64, n_mode: f64) -> PyResult<f64> {
    core::mode_count_g2(g2_edge, n_mode).map_err(err)
}

/// `[(g, fwhm_ps), ...]` with the crystal held fixed.
#[pyfunction]
fn fwhm_vs_gain(g_values: Vec<f64>, crystal: &PyCrystal, pump: &PyPump, tau: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    core::fwhm_vs_gain(&g_values, &crystal.0, &pump.0, &tau).map_err(err)
}

/// Fit `I = scale·sinh²(c√P)`; returns `(c, scale, ssr)`.
#[pyfunction]
fn fit_gain_curve(powers: Vec<f64>, intensities: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = core::fit_gain_curve(&powers, &intensities).map_err(err)?;
    Ok((f.c, f.scale, f.ssr))
}

/// Truncated Fock-space statistics at relative phase `phi`, or with
/// separated arrival when `phi` is None.
#[pyfunction]
#[pyo3(signature = (g, phi = None, n_max = None))]
fn fock_hom_stats<'py>(py: Python<'py>, g: f64, phi: Option<f64>, n_max: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let state = core::tmsv(g, n_max.unwrap_or_else(|| core::fock::default_n_max(g))).map_err(err)?;
    let h = match phi {
        Some(p) => core::hom_stats(&state, p),
        None => core::hom_stats_separated(&state),
    }
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("nrf", h.normalized_variance())?;
    d.set_item("var_diff", h.var_diff)?;
    d.set_item("n_total", h.n_total)?;
    d.set_item("g2_cross", h.g2_cross)?;
    d.set_item("norm", h.norm)?;
    Ok(d)
}

/// Monte-Carlo ensemble at one delay.
#[pyfunction]
#[pyo3(signature = (crystal, pump, det, lattice, tau, seed = 0))]
fn simulate_ensemble<'py>(
    py: Python<'py>,
    crystal: &PyCrystal,
    pump: &PyPump,
    det: &PyDetection,
    lattice: &PyLattice,
    tau: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = py
        .detach(|| core::simulate_ensemble(&crystal.0, &pump.0, &det.0, &lattice.0, tau, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tau", s.tau)?;
    d.set_item("nrf_hat", s.nrf_hat)?;
    d.set_item("se_nrf", s.se_nrf)?;
    d.set_item("g2_hat", s.g2_hat)?;
    d.set_item("se_g2", s.se_g2)?;
    d.set_item("mean_s1", s.mean_s1)?;
    d.set_item("mean_s2", s.mean_s2)?;
    d.set_item("n_pulses", s.n_pulses)?;
    d.set_item("seed", s.seed)?;
    Ok(d)
}

/// Exact expectation of the ensemble estimators on the lattice.
#[pyfunction]
fn lattice_expectation<'py>(
    py: Python<'py>,
    crystal: &PyCrystal,
    pump: &PyPump,
    det: &PyDetection,
    lattice: &PyLattice,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let e = core::lattice_expectation(&crystal.0, &pump.0, &det.0, &lattice.0, tau).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("nrf_detected", e.nrf_detected)?;
    d.set_item("nrf_ideal", e.nrf_ideal)?;
    d.set_item("g2", e.g2)?;
    d.set_item("mean_s", e.mean_s)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "macrohom")]
fn macrohom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCrystal>()?;
    m.add_class::<PyPump>()?;
    m.add_class::<PyDetection>()?;
    m.add_class::<PyLattice>()?;
    m.add_function(wrap_pyfunction!(uv, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_fwhm_nm, m)?)?;
    m.add_function(wrap_pyfunction!(nrf_trace, m)?)?;
    m.add_function(wrap_pyfunction!(pedestal_trace, m)?)?;
    m.add_function(wrap_pyfunction!(detected, m)?)?;
    m.add_function(wrap_pyfunction!(g2_trace, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm_narrow, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm_pedestal_ps, m)?)?;
    m.add_function(wrap_pyfunction!(mode_count_long, m)?)?;
    m.add_function(wrap_pyfunction!(mode_count_g2, m)?)?;
    m.add_function(wrap_pyfunction!(fwhm_vs_gain, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gain_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fock_hom_stats, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_expectation, m)?)?;
    Ok(())
}
