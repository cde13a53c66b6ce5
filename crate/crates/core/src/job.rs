//! Declarative job configs and the run dispatcher shared by the CLI and
//! the Python bindings.
//!
//! A job is a single JSON document naming a model, a loop generator, a
//! method and its tolerances. Outputs are canonical JSON (see [`export`])
//! plus optional CSV traces; a fixed config in single-threaded mode
//! produces byte-identical output.

use std::collections::BTreeMap;

use serde_json::Value as J;

use crate::abelian::{berry_phase, BerryOptions};
use crate::error::Error;
use crate::export::{csv_float, fnv1a_hex, matrix_value, CsvTable, Value};
use crate::linalg::unitarity_residual;
use crate::models::{
    great_circle_loop, latitude_loop, phase_circle_loop, quadrupole_model, spin_half_model,
    three_level_model, two_spin_model, ParameterLoop, ParametricHamiltonian, QuadrupoleSpec,
    SpinRegisterSpec, ThreeLevelSpec,
};
use crate::nonabelian::{holonomy, ConnectionRoute, HolonomyOptions};
use crate::nonadiabatic::two_qubit_geometric_gate;
use crate::propagator::adiabatic_sweep;
use crate::quadrupole::{connection, cycle_time, two_qubit_gate};

/// Which geometric-phase reporting convention scalar outputs use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    Pole,
    Equator,
}

impl Convention {
    pub fn tag(&self) -> &'static str {
        match self {
            Convention::Pole => "pole",
            Convention::Equator => "equator",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct JobOptions {
    pub convention: Convention,
    pub trace: bool,
    pub threads: usize,
}

impl Default for JobOptions {
    fn default() -> Self {
        Self {
            convention: Convention::Pole,
            trace: false,
            threads: 1,
        }
    }
}

/// Job failure split by exit-code class: config errors exit 2, numeric
/// (module) errors exit 1.
#[derive(Debug)]
pub enum JobError {
    Config(String),
    Numeric(Error),
}

impl std::fmt::Display for JobError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JobError::Config(msg) => write!(f, "config error: {msg}"),
            JobError::Numeric(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

impl From<Error> for JobError {
    fn from(e: Error) -> Self {
        JobError::Numeric(e)
    }
}

pub struct JobOutput {
    /// Canonical JSON result document.
    pub result_json: String,
    /// `(file name, contents)` pairs for trace exports.
    pub traces: Vec<(String, String)>,
}

/// Validated job configuration.
pub struct JobConfig {
    pub method: String,
    pub model_name: String,
    model: Option<ParametricHamiltonian>,
    loop_: Option<ParameterLoop>,
    spin_register: Option<SpinRegisterSpec>,
    quadrupole: Option<QuadrupoleSpec>,
    pub level: usize,
    pub multiplicity: usize,
    pub total_time: Option<f64>,
    pub prop_steps: Option<usize>,
    pub t_list: Vec<f64>,
    pub gate_time: Option<f64>,
    pub gap_tol: f64,
    pub cond_tol: f64,
    pub leak_tol: f64,
    pub config_hash: String,
}

const METHODS: [&str; 6] = [
    "abelian",
    "nonabelian",
    "nonadiabatic",
    "quadrupole",
    "propagate",
    "sweep",
];

fn cfg_err(msg: impl Into<String>) -> JobError {
    JobError::Config(msg.into())
}

fn get_obj<'a>(v: &'a J, field: &str) -> Result<&'a serde_json::Map<String, J>, JobError> {
    v.get(field)
        .ok_or_else(|| cfg_err(format!("missing field '{field}'")))?
        .as_object()
        .ok_or_else(|| cfg_err(format!("field '{field}' must be an object")))
}

fn get_f64(obj: &serde_json::Map<String, J>, ctx: &str, field: &str) -> Result<f64, JobError> {
    let v = obj
        .get(field)
        .ok_or_else(|| cfg_err(format!("missing field '{ctx}.{field}'")))?;
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| cfg_err(format!("field '{ctx}.{field}' must be a finite number")))
}

fn get_f64_or(
    obj: &serde_json::Map<String, J>,
    ctx: &str,
    field: &str,
    default: f64,
) -> Result<f64, JobError> {
    match obj.get(field) {
        None => Ok(default),
        Some(_) => get_f64(obj, ctx, field),
    }
}

fn get_usize(obj: &serde_json::Map<String, J>, ctx: &str, field: &str) -> Result<usize, JobError> {
    let v = obj
        .get(field)
        .ok_or_else(|| cfg_err(format!("missing field '{ctx}.{field}'")))?;
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| cfg_err(format!("field '{ctx}.{field}' must be a non-negative integer")))
}

impl JobConfig {
    /// Parse and validate a config document.
    pub fn parse(text: &str) -> Result<Self, JobError> {
        let root: J = serde_json::from_str(text)
            .map_err(|e| cfg_err(format!("invalid JSON: {e}")))?;
        let obj = root
            .as_object()
            .ok_or_else(|| cfg_err("config root must be an object"))?;
        let schema = obj
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| cfg_err("missing field 'schema_version'"))?;
        if schema != 1 {
            return Err(cfg_err(format!(
                "field 'schema_version' must be 1, got {schema}"
            )));
        }
        let method = obj
            .get("method")
            .and_then(|v| v.as_str())
            .ok_or_else(|| cfg_err("missing field 'method'"))?
            .to_string();
        if !METHODS.contains(&method.as_str()) {
            return Err(cfg_err(format!(
                "field 'method' must be one of {METHODS:?}, got '{method}'"
            )));
        }

        let model_obj = get_obj(&root, "model")?;
        let model_name = model_obj
            .get("name")
            .and_then(|v| v.as_str())
            .ok_or_else(|| cfg_err("missing field 'model.name'"))?
            .to_string();
        let empty = serde_json::Map::new();
        let params = model_obj
            .get("params")
            .map(|v| {
                v.as_object()
                    .ok_or_else(|| cfg_err("field 'model.params' must be an object"))
            })
            .transpose()?
            .unwrap_or(&empty);

        let mut spin_register = None;
        let mut quadrupole = None;
        let model: Option<ParametricHamiltonian> = match model_name.as_str() {
            "spin_half" => Some(spin_half_model()),
            "two_spin" => {
                let spec = SpinRegisterSpec {
                    omega01: get_f64(params, "model.params", "omega01")?,
                    omega02: get_f64(params, "model.params", "omega02")?,
                    j: get_f64(params, "model.params", "j")?,
                    omega1: get_f64(params, "model.params", "omega1")?,
                    omega_r: get_f64(params, "model.params", "omega_r")?,
                };
                spec.validate()
                    .map_err(|e| cfg_err(format!("model.params: {e}")))?;
                spin_register = Some(spec);
                Some(two_spin_model(spec))
            }
            "quadrupole" => {
                let spec = QuadrupoleSpec {
                    omega0: get_f64(params, "model.params", "omega0")?,
                    omega1: get_f64(params, "model.params", "omega1")?,
                    theta: get_f64(params, "model.params", "theta")?,
                };
                spec.validate()
                    .map_err(|e| cfg_err(format!("model.params: {e}")))?;
                quadrupole = Some(spec);
                Some(quadrupole_model(spec))
            }
            "three_level" => {
                let diag = params
                    .get("diag")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| cfg_err("missing field 'model.params.diag' (array of 3)"))?;
                if diag.len() != 3 {
                    return Err(cfg_err("field 'model.params.diag' must have 3 entries"));
                }
                let mut d = [0.0; 3];
                for (i, v) in diag.iter().enumerate() {
                    d[i] = v.as_f64().ok_or_else(|| {
                        cfg_err(format!("field 'model.params.diag[{i}]' must be a number"))
                    })?;
                }
                let spec = ThreeLevelSpec {
                    diag: d,
                    mag12: get_f64(params, "model.params", "mag12")?,
                    mag13: get_f64(params, "model.params", "mag13")?,
                    mag23: get_f64(params, "model.params", "mag23")?,
                    phi13: get_f64(params, "model.params", "phi13")?,
                    phi23: get_f64(params, "model.params", "phi23")?,
                };
                Some(three_level_model(spec))
            }
            other => {
                return Err(cfg_err(format!(
                    "unknown model '{other}' (see `list-models`)"
                )))
            }
        };

        let loop_ = match obj.get("loop") {
            None => None,
            Some(_) => {
                let loop_obj = get_obj(&root, "loop")?;
                let name = loop_obj
                    .get("name")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| cfg_err("missing field 'loop.name'"))?;
                let lp_params = loop_obj
                    .get("params")
                    .map(|v| {
                        v.as_object()
                            .ok_or_else(|| cfg_err("field 'loop.params' must be an object"))
                    })
                    .transpose()?
                    .unwrap_or(&empty);
                let lp = match name {
                    "latitude" => latitude_loop(
                        get_f64_or(lp_params, "loop.params", "b_magnitude", 1.0)?,
                        get_f64(lp_params, "loop.params", "theta")?,
                        get_f64(lp_params, "loop.params", "omega_r")?,
                        get_usize(lp_params, "loop.params", "steps")?,
                    ),
                    "great_circle" => great_circle_loop(
                        get_f64_or(lp_params, "loop.params", "b_magnitude", 1.0)?,
                        get_f64(lp_params, "loop.params", "omega_r")?,
                        get_usize(lp_params, "loop.params", "steps")?,
                    ),
                    "phase_circle" => phase_circle_loop(
                        get_f64(lp_params, "loop.params", "period")?,
                        get_usize(lp_params, "loop.params", "steps")?,
                    ),
                    other => {
                        return Err(cfg_err(format!("unknown loop generator '{other}'")))
                    }
                };
                Some(lp.map_err(JobError::Numeric)?)
            }
        };

        let level = obj.get("level").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
        let multiplicity = obj
            .get("multiplicity")
            .and_then(|v| v.as_u64())
            .unwrap_or(1) as usize;

        let tol = obj
            .get("tolerances")
            .map(|v| {
                v.as_object()
                    .ok_or_else(|| cfg_err("field 'tolerances' must be an object"))
            })
            .transpose()?;
        let (mut gap_tol, mut cond_tol, mut leak_tol) = (1e-8, 1e-8, 1e-2);
        if let Some(t) = tol {
            gap_tol = get_f64_or(t, "tolerances", "gap_tol", gap_tol)?;
            cond_tol = get_f64_or(t, "tolerances", "cond_tol", cond_tol)?;
            leak_tol = get_f64_or(t, "tolerances", "leak_tol", leak_tol)?;
            for (name, v) in [("gap_tol", gap_tol), ("cond_tol", cond_tol), ("leak_tol", leak_tol)]
            {
                if !(v > 0.0) {
                    return Err(cfg_err(format!(
                        "field 'tolerances.{name}' must be positive"
                    )));
                }
            }
        }

        let total_time = match obj.get("total_time") {
            None => None,
            Some(v) => Some(
                v.as_f64()
                    .filter(|x| x.is_finite() && *x > 0.0)
                    .ok_or_else(|| cfg_err("field 'total_time' must be a positive number"))?,
            ),
        };
        let prop_steps = match obj.get("steps") {
            None => None,
            Some(v) => Some(
                v.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| cfg_err("field 'steps' must be a non-negative integer"))?,
            ),
        };
        let gate_time = match obj.get("gate_time") {
            None => None,
            Some(v) => Some(
                v.as_f64()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .ok_or_else(|| cfg_err("field 'gate_time' must be a non-negative number"))?,
            ),
        };
        let t_list = match obj.get("t_list") {
            None => Vec::new(),
            Some(v) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| cfg_err("field 't_list' must be an array"))?;
                let mut out = Vec::with_capacity(arr.len());
                for (i, item) in arr.iter().enumerate() {
                    out.push(item.as_f64().filter(|x| *x > 0.0).ok_or_else(|| {
                        cfg_err(format!("field 't_list[{i}]' must be a positive number"))
                    })?);
                }
                out
            }
        };

        Ok(JobConfig {
            method,
            model_name,
            model,
            loop_,
            spin_register,
            quadrupole,
            level,
            multiplicity,
            total_time,
            prop_steps,
            t_list,
            gate_time,
            gap_tol,
            cond_tol,
            leak_tol,
            config_hash: fnv1a_hex(text.as_bytes()),
        })
    }
}

fn require_loop<'a>(cfg: &'a JobConfig) -> Result<&'a ParameterLoop, JobError> {
    cfg.loop_
        .as_ref()
        .ok_or_else(|| cfg_err("this method requires a 'loop' section"))
}

fn require_model<'a>(cfg: &'a JobConfig) -> Result<&'a ParametricHamiltonian, JobError> {
    cfg.model
        .as_ref()
        .ok_or_else(|| cfg_err("this method requires a 'model' section"))
}

fn check_unitary(u: &crate::linalg::CMatrix) -> Result<(), JobError> {
    let defect = unitarity_residual(u);
    if defect > 1e-9 {
        return Err(JobError::Numeric(Error::DomainViolation(format!(
            "unitarity defect {defect:.3e} exceeds 1e-9 before serialization"
        ))));
    }
    Ok(())
}

fn base_report(cfg: &JobConfig, opts: &JobOptions) -> BTreeMap<String, Value> {
    let mut out = Value::object();
    out.insert("schema_version".into(), Value::Int(1));
    out.insert("method".into(), Value::Str(cfg.method.clone()));
    out.insert("model".into(), Value::Str(cfg.model_name.clone()));
    out.insert("config_hash".into(), Value::Str(cfg.config_hash.clone()));
    out.insert(
        "convention".into(),
        Value::Str(opts.convention.tag().into()),
    );
    out
}

/// Run a validated job.
pub fn run_job(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    match cfg.method.as_str() {
        "abelian" => run_abelian(cfg, opts),
        "nonabelian" => run_nonabelian(cfg, opts),
        "nonadiabatic" => run_nonadiabatic(cfg, opts),
        "quadrupole" => run_quadrupole(cfg, opts),
        "propagate" => run_propagate(cfg, opts),
        "sweep" => run_sweep(cfg, opts),
        other => Err(cfg_err(format!("unknown method '{other}'"))),
    }
}

fn run_abelian(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let model = require_model(cfg)?;
    let lp = require_loop(cfg)?;
    let berry_opts = BerryOptions {
        cond_scale: cfg.cond_tol,
        gap_tol: cfg.gap_tol,
        energy_drift_tol: 1e-8,
    };
    let run = berry_phase(model, lp, cfg.level, &berry_opts)?;
    let mut out = base_report(cfg, opts);
    out.insert("gamma".into(), Value::Float(run.holonomy.gamma));
    out.insert("winding".into(), Value::Int(run.holonomy.winding));
    out.insert(
        "gamma_principal".into(),
        Value::Float(run.holonomy.principal),
    );
    out.insert("level".into(), Value::Int(cfg.level as i64));
    out.insert(
        "pivot_switches".into(),
        Value::Int(run.pivot_switches as i64),
    );
    out.insert("steps".into(), Value::Int(lp.steps as i64));
    let mut traces = Vec::new();
    if opts.trace {
        let dim_r = run.trace.first().map_or(0, |r| r.point.len());
        let mut header = vec!["step", "t"];
        let names = ["r0", "r1", "r2", "r3", "r4", "r5"];
        header.extend_from_slice(&names[..dim_r.min(6)]);
        header.push("increment");
        header.push("cumulative_gamma");
        let mut table = CsvTable::new(header);
        for row in &run.trace {
            let mut cells = vec![row.step.to_string(), csv_float(row.t)];
            for x in row.point.iter().take(6) {
                cells.push(csv_float(*x));
            }
            cells.push(csv_float(row.increment));
            cells.push(csv_float(row.cumulative));
            table.push_row(cells);
        }
        traces.push(("connection_trace.csv".to_string(), table.render()));
    }
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces,
    })
}

fn run_nonabelian(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let model = require_model(cfg)?;
    let lp = require_loop(cfg)?;
    let hopts = HolonomyOptions {
        cond_scale: cfg.cond_tol,
        gap_tol: cfg.gap_tol,
        cluster_tol: 1e-8,
        energy_drift_tol: 1e-8,
    };
    let h = holonomy(
        model,
        lp,
        cfg.level,
        cfg.multiplicity,
        ConnectionRoute::ClosedForm,
        &hopts,
    )?;
    check_unitary(&h.u)?;
    let mut out = base_report(cfg, opts);
    out.insert("holonomy".into(), matrix_value(&h.u));
    out.insert(
        "unitarity_defect".into(),
        Value::Float(h.unitarity_defect),
    );
    out.insert("multiplicity".into(), Value::Int(h.multiplicity as i64));
    out.insert("level".into(), Value::Int(cfg.level as i64));
    out.insert("pivot_switches".into(), Value::Int(h.pivot_switches as i64));
    out.insert("route_mismatch".into(), Value::Float(h.route_mismatch));
    out.insert("steps".into(), Value::Int(lp.steps as i64));
    out.insert("loop_period".into(), Value::Float(lp.period));
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces: Vec::new(),
    })
}

fn run_nonadiabatic(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let spec = cfg
        .spin_register
        .ok_or_else(|| cfg_err("method 'nonadiabatic' requires model 'two_spin'"))?;
    let gate = two_qubit_geometric_gate(&spec)?;
    check_unitary(&gate.unitary)?;
    let mut out = base_report(cfg, opts);
    // the gate matrix itself follows the equator-referenced diagonal
    // pattern; the reported per-qubit phases follow the selected convention
    let (g1, g2) = match opts.convention {
        Convention::Equator => (gate.gamma1, gate.gamma2),
        Convention::Pole => (
            -std::f64::consts::PI * (1.0 - gate.theta1_star.cos()),
            -std::f64::consts::PI * (1.0 - gate.theta2_star.cos()),
        ),
    };
    out.insert("gate".into(), matrix_value(&gate.unitary));
    out.insert("gamma1".into(), Value::Float(g1));
    out.insert("gamma2".into(), Value::Float(g2));
    out.insert("gamma1_equator".into(), Value::Float(gate.gamma1));
    out.insert("gamma2_equator".into(), Value::Float(gate.gamma2));
    out.insert("theta1_star".into(), Value::Float(gate.theta1_star));
    out.insert("theta2_star".into(), Value::Float(gate.theta2_star));
    out.insert("gate_convention".into(), Value::Str("equator".into()));
    let mut traces = Vec::new();
    if opts.trace {
        // per-qubit geometric phase against the rotation ratio, for plotting
        let omega_a = spec.omega01.hypot(spec.omega1);
        let omega_b = spec.omega02.hypot(spec.omega1);
        let theta1 = (spec.omega1 / omega_a).atan2(spec.omega01 / omega_a).abs();
        let theta2 = (spec.omega1 / omega_b).atan2(spec.omega02 / omega_b).abs();
        let mut csv = CsvTable::new(vec![
            "omega_r",
            "theta1_star",
            "gamma1_pole",
            "gamma1_equator",
            "theta2_star",
            "gamma2_pole",
            "gamma2_equator",
        ]);
        let r_max = 2.0 * spec.omega_r.abs().max(0.1 * omega_a);
        let n = 100;
        for k in 0..=n {
            let wr = r_max * k as f64 / n as f64;
            let t1 = crate::nonadiabatic::effective_angle(
                theta1,
                wr,
                omega_a,
                crate::nonadiabatic::Polarization::Plus,
            );
            let t2 = crate::nonadiabatic::effective_angle(
                theta2,
                wr,
                omega_b,
                crate::nonadiabatic::Polarization::Plus,
            );
            csv.push_row(vec![
                csv_float(wr),
                csv_float(t1.theta_star),
                csv_float(-std::f64::consts::PI * (1.0 - t1.theta_star.cos())),
                csv_float(-std::f64::consts::PI * t1.theta_star.cos()),
                csv_float(t2.theta_star),
                csv_float(-std::f64::consts::PI * (1.0 - t2.theta_star.cos())),
                csv_float(-std::f64::consts::PI * t2.theta_star.cos()),
            ]);
        }
        traces.push(("phase_sweep.csv".to_string(), csv.render()));
    }
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces,
    })
}

fn run_quadrupole(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let spec = cfg
        .quadrupole
        .ok_or_else(|| cfg_err("method 'quadrupole' requires model 'quadrupole'"))?;
    let conn = connection(&spec)?;
    let t = cfg.gate_time.unwrap_or_else(|| cycle_time(&spec));
    let gate = two_qubit_gate(&spec, t)?;
    check_unitary(&gate.unitary)?;
    let mut out = base_report(cfg, opts);
    out.insert("gate".into(), matrix_value(&gate.unitary));
    out.insert("gate_time".into(), Value::Float(t));
    out.insert(
        "dynamic_phases".into(),
        Value::Array(gate.dynamic_phases.iter().map(|&x| Value::Float(x)).collect()),
    );
    out.insert("connection_closed_form".into(), matrix_value(&conn.closed_form));
    out.insert("connection_numeric".into(), matrix_value(&conn.numeric));
    out.insert("connection_mismatch".into(), Value::Float(conn.mismatch));
    let mut coeffs = Value::object();
    for (name, v) in [
        ("a32", conn.a32),
        ("b32", conn.b32),
        ("c32", conn.c32),
        ("a12", conn.a12),
        ("b12", conn.b12),
        ("c12", conn.c12),
    ] {
        coeffs.insert(name.into(), Value::Float(v));
    }
    out.insert("connection_coefficients".into(), Value::Object(coeffs));
    out.insert(
        "unitarity_defect".into(),
        Value::Float(gate.unitarity_defect),
    );
    let mut traces = Vec::new();
    if opts.trace {
        // connection coefficients over a (theta, omega1/omega0) grid
        let mut csv = CsvTable::new(vec![
            "theta", "ratio", "a32", "b32", "c32", "a12", "b12", "c12", "mismatch",
        ]);
        for i in 0..15 {
            let theta = 0.05 + 0.1 * i as f64;
            for ratio in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
                let grid_spec = QuadrupoleSpec {
                    omega0: spec.omega0,
                    omega1: ratio * spec.omega0,
                    theta,
                };
                let c = connection(&grid_spec)?;
                csv.push_row(vec![
                    csv_float(theta),
                    csv_float(ratio),
                    csv_float(c.a32),
                    csv_float(c.b32),
                    csv_float(c.c32),
                    csv_float(c.a12),
                    csv_float(c.b12),
                    csv_float(c.c12),
                    csv_float(c.mismatch),
                ]);
            }
        }
        traces.push(("connection_sweep.csv".to_string(), csv.render()));
    }
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces,
    })
}

fn run_propagate(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let model = require_model(cfg)?;
    let lp = require_loop(cfg)?;
    let total_time = cfg.total_time.unwrap_or(lp.period);
    let steps = cfg
        .prop_steps
        .ok_or_else(|| cfg_err("method 'propagate' requires field 'steps'"))?;
    let res = crate::propagator::propagate_with_energies(model, lp, total_time, steps, opts.trace)?;
    check_unitary(&res.u)?;
    let mut out = base_report(cfg, opts);
    out.insert("propagator".into(), matrix_value(&res.u));
    out.insert("total_time".into(), Value::Float(total_time));
    out.insert("steps".into(), Value::Int(steps as i64));
    out.insert(
        "unitarity_defect".into(),
        Value::Float(res.unitarity_defect),
    );
    let mut traces = Vec::new();
    if opts.trace && !res.energy_trace.is_empty() {
        let mut header: Vec<&'static str> = vec!["t"];
        let names = ["e0", "e1", "e2", "e3", "e4", "e5"];
        header.extend_from_slice(&names[..model.dim.min(6)]);
        let mut csv = CsvTable::new(header);
        let dt = total_time / steps as f64;
        let stride = (steps / 2000).max(1);
        for k in (0..steps).step_by(stride) {
            let mut cells = vec![csv_float((k as f64 + 0.5) * dt)];
            for lvl in 0..model.dim.min(6) {
                cells.push(csv_float(res.energy_trace[lvl][k]));
            }
            csv.push_row(cells);
        }
        traces.push(("energy_trace.csv".to_string(), csv.render()));
    }
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces,
    })
}

fn run_sweep(cfg: &JobConfig, opts: &JobOptions) -> Result<JobOutput, JobError> {
    let model = require_model(cfg)?;
    let lp = require_loop(cfg)?;
    if cfg.t_list.is_empty() {
        return Err(cfg_err("method 'sweep' requires a non-empty 't_list'"));
    }
    let table = if opts.threads > 1 {
        parallel_sweep(model, lp, cfg.level, &cfg.t_list, cfg.leak_tol, opts.threads)?
    } else {
        adiabatic_sweep(model, lp, cfg.level, &cfg.t_list, cfg.leak_tol)?
    };
    let mut out = base_report(cfg, opts);
    let mut rows = Vec::new();
    for row in &table.rows {
        let mut r = Value::object();
        r.insert("total_time".into(), Value::Float(row.total_time));
        r.insert("gamma".into(), Value::Float(row.geometric_phase));
        r.insert("leakage".into(), Value::Float(row.leakage));
        rows.push(Value::Object(r));
    }
    out.insert("rows".into(), Value::Array(rows));
    out.insert(
        "leakage_exponent".into(),
        table
            .leakage_exponent
            .map_or(Value::Null, Value::Float),
    );
    let mut traces = Vec::new();
    if opts.trace {
        let mut csv = CsvTable::new(vec!["total_time", "gamma", "leakage"]);
        for row in &table.rows {
            csv.push_row(vec![
                csv_float(row.total_time),
                csv_float(row.geometric_phase),
                csv_float(row.leakage),
            ]);
        }
        traces.push(("sweep.csv".to_string(), csv.render()));
    }
    Ok(JobOutput {
        result_json: Value::Object(out).render(),
        traces,
    })
}

/// Independent propagations run on scoped threads; rows land by index, so
/// the output is identical to the sequential order.
fn parallel_sweep(
    model: &ParametricHamiltonian,
    lp: &ParameterLoop,
    level: usize,
    t_list: &[f64],
    leak_tol: f64,
    threads: usize,
) -> Result<crate::propagator::SweepTable, JobError> {
    use crate::propagator::{SweepRow, SweepTable};
    if t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(JobError::Numeric(Error::InvalidArgument(
            "t_list must be strictly ascending".into(),
        )));
    }
    let mut slots: Vec<Option<Result<SweepRow, Error>>> =
        (0..t_list.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_mx = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(t_list.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= t_list.len() {
                    break;
                }
                let row = adiabatic_sweep(model, lp, level, &t_list[i..=i], leak_tol)
                    .map(|t| t.rows[0]);
                let mut guard = slots_mx.lock().unwrap();
                guard[i] = Some(row);
            });
        }
    });
    let mut rows = Vec::with_capacity(t_list.len());
    for slot in slots {
        rows.push(slot.expect("sweep slot not filled")?);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.leakage > 1e-300)
        .map(|r| (r.total_time.ln(), r.leakage.ln()))
        .collect();
    let leakage_exponent = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        (denom.abs() > 1e-12).then(|| (n * sxy - sx * sy) / denom)
    } else {
        None
    };
    Ok(SweepTable {
        rows,
        leakage_exponent,
    })
}

/// Model catalog rendered for `list-models`.
pub fn list_models() -> String {
    let mut out = String::new();
    out.push_str("models:\n");
    out.push_str("  spin_half      params: {}  (field comes from the loop; H = B.sigma/2)\n");
    out.push_str("  two_spin       params: {omega01, omega02, j, omega1, omega_r}\n");
    out.push_str("  quadrupole     params: {omega0, omega1, theta}\n");
    out.push_str("  three_level    params: {diag: [d1, d2, d3], mag12, mag13, mag23, phi13, phi23}\n");
    out.push_str("loops:\n");
    out.push_str("  latitude       params: {b_magnitude?, theta, omega_r, steps}\n");
    out.push_str("  great_circle   params: {b_magnitude?, omega_r, steps}\n");
    out.push_str("  phase_circle   params: {period, steps}\n");
    out.push_str("methods: abelian nonabelian nonadiabatic quadrupole propagate sweep\n");
    out
}

/// Names in the catalog, used by validation tests.
pub fn model_names() -> [&'static str; 4] {
    ["spin_half", "two_spin", "quadrupole", "three_level"]
}
