//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use lindeberg_lab::lab::{self, Criteria, ExperimentConfig, PlotKind};
use lindeberg_lab::system::word_string;
use lindeberg_lab::LabError;

fn to_pyerr(e: LabError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn load(config: &Path, seed: Option<u64>) -> Result<(ExperimentConfig, u64), LabError> {
    let cfg = ExperimentConfig::load(config)?;
    let seed = lab::resolve_seed(seed, &cfg)?;
    Ok((cfg, seed))
}

#[derive(Serialize)]
struct CensusLevel {
    l: usize,
    t: f64,
    delta: f64,
    k: u64,
    sigma_sq: f64,
    separated: bool,
    words: Vec<String>,
    periods: Vec<f64>,
}

/// Runs an experiment config and writes the report directory.
/// Returns the run manifest.
#[pyfunction]
#[pyo3(signature = (config, out, seed=None))]
fn run(py: Python<'_>, config: PathBuf, out: PathBuf, seed: Option<u64>) -> PyResult<PyObject> {
    let manifest = py
        .allow_threads(|| {
            let (cfg, seed) = load(&config, seed)?;
            lab::run_to_dir(&cfg, seed, &out).map(|(_, m)| m)
        })
        .map_err(to_pyerr)?;
    to_py(py, &manifest)
}

/// Schedule report for a config; never raises on a failing schedule.
#[pyfunction]
fn validate_schedule(py: Python<'_>, config: PathBuf) -> PyResult<PyObject> {
    let report = py
        .allow_threads(|| {
            let (cfg, _) = load(&config, None)?;
            let inst = cfg.load_instance()?;
            lab::prepare(&cfg, &inst).map(|p| p.report)
        })
        .map_err(to_pyerr)?;
    to_py(py, &report)
}

/// Per-level census: the regular cycles in each period window.
#[pyfunction]
fn census(py: Python<'_>, config: PathBuf) -> PyResult<PyObject> {
    let levels = py
        .allow_threads(|| {
            let (cfg, _) = load(&config, None)?;
            let inst = cfg.load_instance()?;
            let p = lab::prepare(&cfg, &inst)?;
            Ok::<_, LabError>(
                p.entries
                    .iter()
                    .zip(&p.windows)
                    .zip(&p.sigmas)
                    .map(|((e, w), &s2)| CensusLevel {
                        l: e.l,
                        t: e.t,
                        delta: e.delta,
                        k: e.k,
                        sigma_sq: s2,
                        separated: w.separation.separated,
                        words: w.cycles.iter().map(|c| word_string(&c.word)).collect(),
                        periods: w.cycles.iter().map(|c| c.flow_period).collect(),
                    })
                    .collect::<Vec<_>>(),
            )
        })
        .map_err(to_pyerr)?;
    to_py(py, &levels)
}

/// Writes plot_<which>.csv into a finished run directory; returns its path.
#[pyfunction]
fn emit_plot_data(out: PathBuf, which: &str) -> PyResult<String> {
    let kind: PlotKind = serde_json::from_value(serde_json::Value::String(which.to_lowercase()))
        .map_err(|_| PyValueError::new_err(format!("unknown plot kind {which:?}")))?;
    let p = lab::emit_plot_data(&out, kind).map_err(to_pyerr)?;
    Ok(p.display().to_string())
}

/// Evaluates a finished run against a criteria file.
#[pyfunction]
fn check_acceptance(py: Python<'_>, out: PathBuf, criteria: PathBuf) -> PyResult<PyObject> {
    let text = std::fs::read_to_string(&criteria).map_err(|e| to_pyerr(LabError::io(criteria.display().to_string(), e)))?;
    let c = Criteria::from_toml(&text).map_err(to_pyerr)?;
    let report = py.allow_threads(|| lab::check_acceptance(&out, &c)).map_err(to_pyerr)?;
    to_py(py, &report)
}

#[pymodule]
fn lindeberg_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(validate_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(census, m)?)?;
    m.add_function(wrap_pyfunction!(emit_plot_data, m)?)?;
    m.add_function(wrap_pyfunction!(check_acceptance, m)?)?;
    Ok(())
}
