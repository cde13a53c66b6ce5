//! Python bindings: the main phase/gate operations plus the declarative
//! job layer, with matrices rendered as nested lists of `(re, im)` tuples.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use holonomy_core::abelian::{berry_phase, two_level_closed_form, BerryOptions, LevelSign};
use holonomy_core::job::{run_job, Convention, JobConfig, JobError, JobOptions};
use holonomy_core::linalg::CMatrix;
use holonomy_core::models::{latitude_loop, phase_circle_loop, quadrupole_model, spin_half_model, QuadrupoleSpec, SpinRegisterSpec};
use holonomy_core::nonabelian::{holonomy, ConnectionRoute, HolonomyOptions};
use holonomy_core::nonadiabatic::{self, Polarization};
use holonomy_core::propagator::propagate;
use holonomy_core::quadrupole;

type PyMatrix = Vec<Vec<(f64, f64)>>;

fn matrix_out(m: &CMatrix) -> PyMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|s| (m[(r, s)].re, m[(r, s)].im)).collect())
        .collect()
}

fn numeric_err(e: holonomy_core::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.name()))
}

/// Berry phase of a spin-1/2 level around the latitude loop; returns
/// (gamma, winding, principal).
#[pyfunction]
fn berry_phase_latitude(
    b_magnitude: f64,
    theta: f64,
    omega_r: f64,
    steps: usize,
    level: usize,
) -> PyResult<(f64, i64, f64)> {
    let model = spin_half_model();
    let lp = latitude_loop(b_magnitude, theta, omega_r, steps).map_err(numeric_err)?;
    let run = berry_phase(&model, &lp, level, &BerryOptions::default()).map_err(numeric_err)?;
    Ok((run.holonomy.gamma, run.holonomy.winding, run.holonomy.principal))
}

/// Closed-form two-level phase from the spherical solid angle of the
/// latitude loop; `upper` selects the level sign.
#[pyfunction]
fn solid_angle_phase(theta: f64, upper: bool, steps: usize) -> PyResult<f64> {
    let lp = latitude_loop(1.0, theta, 1.0, steps).map_err(numeric_err)?;
    let sign = if upper { LevelSign::Upper } else { LevelSign::Lower };
    Ok(two_level_closed_form(&lp, sign, 1e-6).map_err(numeric_err)?.gamma)
}

/// Effective rotating-frame tilt, `atan2(sin(theta), cos(theta) +- r)`.
#[pyfunction]
fn effective_angle(theta: f64, omega_r: f64, omega_lab: f64, plus: bool) -> f64 {
    let pol = if plus { Polarization::Plus } else { Polarization::Minus };
    nonadiabatic::effective_angle(theta, omega_r, omega_lab, pol).theta_star
}

/// One-cycle phase split for azimuthal number `m`; returns a dict with the
/// dynamic part and both geometric conventions.
#[pyfunction]
fn cycle_phases<'py>(
    py: Python<'py>,
    m: f64,
    theta: f64,
    theta_star: f64,
    omega_lab: f64,
    omega_r: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = nonadiabatic::cycle_phases(m, theta, theta_star, omega_lab, omega_r);
    let d = PyDict::new(py);
    d.set_item("phi_d", p.phi_d)?;
    d.set_item("gamma_pole", p.gamma_pole)?;
    d.set_item("gamma_equator", p.gamma_equator)?;
    d.set_item("solid_angle_shift", p.solid_angle_shift)?;
    Ok(d)
}

/// Exact propagator of a spin-1/2 in a circularly polarized field.
#[pyfunction]
fn rabi_propagator(omega_par: f64, omega_perp: f64, omega_r: f64, t: f64) -> PyResult<PyMatrix> {
    let sol = nonadiabatic::rabi_evolution(omega_par, omega_perp, omega_r, (1.0, 0.0), t)
        .map_err(numeric_err)?;
    Ok(matrix_out(&sol.unitary))
}

/// Diagonal two-qubit gate from per-spin non-adiabatic geometric phases.
#[pyfunction]
fn two_qubit_geometric_gate<'py>(
    py: Python<'py>,
    omega01: f64,
    omega02: f64,
    j: f64,
    omega1: f64,
    omega_r: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = SpinRegisterSpec {
        omega01,
        omega02,
        j,
        omega1,
        omega_r,
    };
    let gate = nonadiabatic::two_qubit_geometric_gate(&spec).map_err(numeric_err)?;
    let d = PyDict::new(py);
    d.set_item("gate", matrix_out(&gate.unitary))?;
    d.set_item("gamma1", gate.gamma1)?;
    d.set_item("gamma2", gate.gamma2)?;
    d.set_item("theta1_star", gate.theta1_star)?;
    d.set_item("theta2_star", gate.theta2_star)?;
    Ok(d)
}

/// Spin-3/2 quadrupole evolution operator in the dressed basis at time `t`.
#[pyfunction]
fn quadrupole_gate<'py>(
    py: Python<'py>,
    omega0: f64,
    omega1: f64,
    theta: f64,
    t: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = QuadrupoleSpec {
        omega0,
        omega1,
        theta,
    };
    let gate = quadrupole::two_qubit_gate(&spec, t).map_err(numeric_err)?;
    let d = PyDict::new(py);
    d.set_item("gate", matrix_out(&gate.unitary))?;
    d.set_item("dynamic_phases", gate.dynamic_phases.to_vec())?;
    d.set_item("unitarity_defect", gate.unitarity_defect)?;
    Ok(d)
}

/// Both routes to the quadrupole connection and their reported mismatch.
#[pyfunction]
fn quadrupole_connection<'py>(
    py: Python<'py>,
    omega0: f64,
    omega1: f64,
    theta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = QuadrupoleSpec {
        omega0,
        omega1,
        theta,
    };
    let conn = quadrupole::connection(&spec).map_err(numeric_err)?;
    let d = PyDict::new(py);
    d.set_item("closed_form", matrix_out(&conn.closed_form))?;
    d.set_item("numeric", matrix_out(&conn.numeric))?;
    d.set_item("mismatch", conn.mismatch)?;
    d.set_item("hermiticity_residual", conn.hermiticity_residual)?;
    d.set_item("time_drift", conn.time_drift)?;
    Ok(d)
}

/// Wilczek-Zee holonomy of a degenerate quadrupole doublet around the lab
/// rotation loop. `level` indexes the sorted spectrum (0 or 2).
#[pyfunction]
fn quadrupole_holonomy(omega0: f64, theta: f64, level: usize, steps: usize) -> PyResult<PyMatrix> {
    let spec = QuadrupoleSpec {
        omega0,
        omega1: 0.0,
        theta,
    };
    let model = quadrupole_model(spec);
    let lp = phase_circle_loop(std::f64::consts::TAU, steps).map_err(numeric_err)?;
    let hol = holonomy(
        &model,
        &lp,
        level,
        2,
        ConnectionRoute::ClosedForm,
        &HolonomyOptions::default(),
    )
    .map_err(numeric_err)?;
    Ok(matrix_out(&hol.u))
}

/// Brute-force Schroedinger propagator of the spin-1/2 latitude drive.
#[pyfunction]
fn propagate_spin_half(
    b_magnitude: f64,
    theta: f64,
    total_time: f64,
    steps: usize,
) -> PyResult<PyMatrix> {
    let model = spin_half_model();
    let lp = latitude_loop(b_magnitude, theta, 1.0, 64).map_err(numeric_err)?;
    let res = propagate(&model, &lp, total_time, steps).map_err(numeric_err)?;
    Ok(matrix_out(&res.u))
}

/// Run a declarative job from a JSON config string; returns
/// (result_json, {trace_name: contents}).
#[pyfunction]
#[pyo3(signature = (config_json, convention = "pole", trace = false))]
fn run_config<'py>(
    py: Python<'py>,
    config_json: &str,
    convention: &str,
    trace: bool,
) -> PyResult<(String, Bound<'py, PyDict>)> {
    let cfg = JobConfig::parse(config_json).map_err(|e| match e {
        JobError::Config(msg) => PyValueError::new_err(format!("config error: {msg}")),
        JobError::Numeric(err) => numeric_err(err),
    })?;
    let opts = JobOptions {
        convention: match convention {
            "pole" => Convention::Pole,
            "equator" => Convention::Equator,
            other => {
                return Err(PyValueError::new_err(format!(
                    "convention must be 'pole' or 'equator', got '{other}'"
                )))
            }
        },
        trace,
        threads: 1,
    };
    let out = run_job(&cfg, &opts).map_err(|e| match e {
        JobError::Config(msg) => PyValueError::new_err(format!("config error: {msg}")),
        JobError::Numeric(err) => numeric_err(err),
    })?;
    let traces = PyDict::new(py);
    for (name, contents) in &out.traces {
        traces.set_item(name, contents)?;
    }
    Ok((out.result_json, traces))
}

/// Model/loop/method catalog, same text as the CLI's `list-models`.
#[pyfunction]
fn list_models() -> String {
    holonomy_core::job::list_models()
}

#[pymodule]
fn holonomy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(berry_phase_latitude, m)?)?;
    m.add_function(wrap_pyfunction!(solid_angle_phase, m)?)?;
    m.add_function(wrap_pyfunction!(effective_angle, m)?)?;
    m.add_function(wrap_pyfunction!(cycle_phases, m)?)?;
    m.add_function(wrap_pyfunction!(rabi_propagator, m)?)?;
    m.add_function(wrap_pyfunction!(two_qubit_geometric_gate, m)?)?;
    m.add_function(wrap_pyfunction!(quadrupole_gate, m)?)?;
    m.add_function(wrap_pyfunction!(quadrupole_connection, m)?)?;
    m.add_function(wrap_pyfunction!(quadrupole_holonomy, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_spin_half, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(list_models, m)?)?;
    Ok(())
}
