use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use delaypde::acceptance;
use delaypde::cli::run_scenario;
use delaypde::config::Scenario;
use delaypde::feedback::{self, ControllerKind};
use delaypde::hyperbolic::HyperbolicSystem;
use delaypde::sampled::{Grid, SampledFn};

fn err(e: delaypde::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Runs a JSON scenario and returns `(exit_code, report_json)`.
///
/// Relative paths inside the scenario resolve against `base_dir`.
#[pyfunction]
#[pyo3(signature = (scenario_json, base_dir = None))]
fn run_scenario_json(scenario_json: &str, base_dir: Option<PathBuf>) -> PyResult<(i32, String)> {
    let mut sc: Scenario = serde_json::from_str(scenario_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    sc.resolve(&base_dir.unwrap_or_else(|| PathBuf::from(".")));
    let out = run_scenario(&sc).map_err(err)?;
    Ok((out.code, out.report.to_string()))
}

/// Runs one acceptance criterion and returns its report as JSON.
#[pyfunction]
#[pyo3(signature = (criterion, seed = 0))]
fn acceptance_report(criterion: usize, seed: u64) -> PyResult<String> {
    let rep = acceptance::run(criterion, seed).map_err(err)?;
    serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Backstepping kernel `k(z)` of the recirculation plant.
#[pyfunction]
fn kernel(g: f64, z: f64) -> f64 {
    feedback::kernel(g, z)
}

/// Kernel control law applied to a profile sampled on `K` cells of `(0, 1]`.
#[pyfunction]
fn control_kernel(g: f64, profile: Vec<f64>) -> PyResult<f64> {
    let grid = HyperbolicSystem::profile_grid(profile.len());
    let x = SampledFn::new(grid, 1, profile).map_err(err)?;
    Ok(feedback::control_kernel(g, &x))
}

/// Closed loop from `profile` without actuator error.
///
/// Returns `(t, sup_z |x(t, z)|)` per step.
#[pyfunction]
#[pyo3(signature = (g, profile, horizon, controller = "kernel"))]
fn closed_loop(g: f64, profile: Vec<f64>, horizon: f64, controller: &str) -> PyResult<Vec<(f64, f64)>> {
    let kind: ControllerKind = controller.parse().map_err(err)?;
    let cells = profile.len();
    let x0 = SampledFn::new(HyperbolicSystem::profile_grid(cells), 1, profile).map_err(err)?;
    let h = 1.0 / cells as f64;
    let steps = (horizon / h).round() as usize;
    let w = SampledFn::zeros(Grid::new(-1.0, h, cells + steps).map_err(err)?, 1);
    let run = feedback::closed_loop(g, &x0, kind, &w, horizon, &[]).map_err(err)?;
    Ok(run.sup_trace)
}

#[pymodule]
#[pyo3(name = "delaypde")]
fn delaypde_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_report, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(control_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop, m)?)?;
    Ok(())
}
