//! Python bindings: scenario runs and the identity verifier.
//!
//! Results cross the boundary as JSON and come back as plain dicts.

use mhd2d::runner::{run, ScenarioConfig};
use mhd2d::verifier::{self, SuiteConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: mhd2d::Error) -> PyErr {
    match e.exit_code() {
        4 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Names of all registered verifier checks.
#[pyfunction]
fn check_names() -> Vec<String> {
    verifier::check_names()
}

/// Run the verifier suite described by a JSON config (empty object = full suite).
#[pyfunction]
#[pyo3(signature = (config = "{}"))]
fn run_suite<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SuiteConfig::from_json(config).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let rep = py.detach(|| verifier::run_suite(&cfg)).map_err(to_py)?;
    let text = serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    loads(py, &text)
}

/// Run a scenario from config text (`fmt` is "toml" or "json").
/// Returns the run summary and the per-step records.
#[pyfunction]
#[pyo3(signature = (config, fmt = "toml"))]
fn run_scenario<'py>(py: Python<'py>, config: &str, fmt: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig::from_str_ext(config, fmt).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let res = py.detach(|| run(&cfg)).map_err(to_py)?;
    let out = serde_json::json!({ "summary": res.summary, "records": res.records });
    loads(py, &out.to_string())
}

#[pymodule]
fn mhd2d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
