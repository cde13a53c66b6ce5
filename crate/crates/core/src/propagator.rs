//! Brute-force integrator of the time-dependent Schroedinger equation and
//! phase-extraction utilities.
//!
//! This module is the ground-truth oracle for everything else in the crate,
//! so it stays deliberately simple: one ordered product of midpoint matrix
//! exponentials, unitary by construction, second-order accurate.

use crate::error::{Error, Result};
use crate::linalg::{cr, eigh, expm_hermitian, wrap_angle, CMatrix, CVector, I};
use crate::models::{ParameterLoop, ParametricHamiltonian};

/// Result of integrating `i dU/dt = H(t) U` over `[0, T]`.
#[derive(Debug)]
pub struct PropagationResult {
    pub u: CMatrix,
    pub total_time: f64,
    pub steps: usize,
    pub unitarity_defect: f64,
    /// Instantaneous eigenvalues sampled at each midpoint, one row per level.
    pub energy_trace: Vec<Vec<f64>>,
    /// Sampled states `(t, psi(t))` when an initial state was supplied.
    pub trajectory: Option<Vec<(f64, CVector)>>,
}

/// Traversal of `loop_` slowed down or sped up to take `total_time`:
/// `R(t) = loop(t * period / total_time)`.
fn loop_point(loop_: &ParameterLoop, total_time: f64, t: f64) -> crate::models::ParameterPoint {
    loop_.at(t * loop_.period / total_time)
}

/// Integrate the Schroedinger equation for `model` driven around `loop_`
/// over `total_time`, with `steps` midpoint-exponential steps.
///
/// Fails with `StepTooCoarse` when `||H|| * total_time / steps` exceeds the
/// 0.1 stability bound (largest |eigenvalue| sampled at a few points).
pub fn propagate(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    total_time: f64,
    steps: usize,
) -> Result<PropagationResult> {
    propagate_with_energies(model, loop_, total_time, steps, false)
}

/// As `propagate`, optionally recording the instantaneous spectrum at every
/// midpoint (needed for dynamic-phase extraction).
pub fn propagate_with_energies(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    total_time: f64,
    steps: usize,
    record_energies: bool,
) -> Result<PropagationResult> {
    if steps == 0 || !(total_time > 0.0) {
        return Err(Error::InvalidArgument(
            "propagate needs steps > 0 and total_time > 0".into(),
        ));
    }
    let mut norm_h: f64 = 0.0;
    for frac in [0.0, 0.33, 0.67] {
        let h = model.eval(&loop_point(loop_, total_time, frac * total_time))?;
        let (vals, _) = eigh(&h);
        let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        norm_h = norm_h.max(top);
    }
    let dt = total_time / steps as f64;
    if norm_h * dt > 0.1 {
        return Err(Error::StepTooCoarse {
            value: norm_h * dt,
        });
    }

    let n = model.dim;
    let mut u = CMatrix::identity(n, n);
    let mut energy_trace: Vec<Vec<f64>> = if record_energies {
        vec![Vec::with_capacity(steps); n]
    } else {
        Vec::new()
    };
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let h = model.eval_unchecked(&loop_point(loop_, total_time, t_mid));
        if record_energies {
            let (vals, _) = eigh(&h);
            for (lvl, v) in vals.iter().enumerate() {
                energy_trace[lvl].push(*v);
            }
        }
        u = expm_hermitian(&h, -I * cr(dt)) * u;
    }
    let unitarity_defect = crate::linalg::unitarity_residual(&u);
    Ok(PropagationResult {
        u,
        total_time,
        steps,
        unitarity_defect,
        energy_trace,
        trajectory: None,
    })
}

/// Integrate with an initial state, recording the trajectory every
/// `record_every` steps (plus the endpoints).
pub fn propagate_trajectory(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    total_time: f64,
    steps: usize,
    psi0: &CVector,
    record_every: usize,
) -> Result<PropagationResult> {
    if psi0.len() != model.dim {
        return Err(Error::InvalidArgument(
            "initial state dimension does not match the model".into(),
        ));
    }
    let mut res = propagate(model, loop_, total_time, steps)?;
    // replay the ordered product on the state at the requested cadence;
    // the per-step factors are cheap for the small systems handled here
    let dt = total_time / steps as f64;
    let every = record_every.max(1);
    let mut psi = psi0.clone();
    let mut samples = vec![(0.0, psi.clone())];
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let h = model.eval_unchecked(&loop_point(loop_, total_time, t_mid));
        psi = expm_hermitian(&h, -I * cr(dt)) * psi;
        if (k + 1) % every == 0 || k + 1 == steps {
            samples.push(((k + 1) as f64 * dt, psi.clone()));
        }
    }
    res.trajectory = Some(samples);
    Ok(res)
}

/// Split of the total cyclic phase of level `m` into dynamic and geometric
/// parts, with the population leakage diagnostic.
pub struct PhaseExtraction {
    pub total_phase: f64,
    pub dynamic_phase: f64,
    /// Geometric remainder, reduced to (-pi, pi].
    pub geometric_phase: f64,
    pub leakage: f64,
}

/// Extract the geometric phase of non-degenerate level `level` after one
/// traversal of the (closed) loop over `total_time`.
///
/// The state is compared against the same gauge-fixed eigenvector at start
/// and end (the loop is closed), the dynamic part `int E_n dt` is removed
/// from the overlap phase, and `leakage = 1 - |<n|U|n>|^2` is reported.
pub fn extract_geometric_phase(
    result: &PropagationResult,
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    level: usize,
    leak_tol: f64,
) -> Result<PhaseExtraction> {
    let h0 = model.eval(&loop_.at(0.0))?;
    let (vals0, vecs0) = eigh(&h0);
    if level >= model.dim {
        return Err(Error::InvalidArgument(format!(
            "level {level} out of range for dim {}",
            model.dim
        )));
    }
    let n = model.dim;
    if n > 1 {
        let gap = (0..n)
            .filter(|&j| j != level)
            .map(|j| (vals0[j] - vals0[level]).abs())
            .fold(f64::INFINITY, f64::min);
        if gap < 1e-12 {
            return Err(Error::DegenerateSpectrum { gap });
        }
    }
    let v0 = gauge_fix(&vecs0.column(level).into_owned());

    // dynamic phase from the recorded eigenvalue trace (midpoint rule),
    // tracked by nearest-value continuation
    let dt = result.total_time / result.steps as f64;
    let mut dynamic = 0.0;
    if !result.energy_trace.is_empty() {
        let mut current = vals0[level];
        for k in 0..result.steps {
            let column: Vec<f64> = result.energy_trace.iter().map(|row| row[k]).collect();
            let nearest = column
                .iter()
                .copied()
                .min_by(|a, b| {
                    (a - current).abs().partial_cmp(&(b - current).abs()).unwrap()
                })
                .unwrap();
            current = nearest;
            dynamic += nearest * dt;
        }
    } else {
        dynamic = vals0[level] * result.total_time;
    }

    let overlap = (v0.adjoint() * &result.u * &v0)[(0, 0)];
    let leakage = (1.0 - overlap.norm_sqr()).max(0.0);
    if leakage > leak_tol {
        return Err(Error::LeakageExceeded {
            leakage,
            tol: leak_tol,
        });
    }
    let total_phase = overlap.arg();
    let geometric_phase = wrap_angle(total_phase + dynamic);
    Ok(PhaseExtraction {
        total_phase,
        dynamic_phase: dynamic,
        geometric_phase,
        leakage,
    })
}

/// One row of an adiabatic convergence sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub total_time: f64,
    pub geometric_phase: f64,
    pub leakage: f64,
}

pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Log-log slope of leakage vs T (least squares), when computable.
    pub leakage_exponent: Option<f64>,
}

/// Traverse the loop at each `T` in ascending `t_list`, extracting the
/// geometric phase and leakage; step counts scale with `||H|| T`.
pub fn adiabatic_sweep(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    level: usize,
    t_list: &[f64],
    leak_tol: f64,
) -> Result<SweepTable> {
    if t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "t_list must be strictly ascending".into(),
        ));
    }
    let h0 = model.eval(&loop_.at(0.0))?;
    let (vals, _) = eigh(&h0);
    let norm_h = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        // target ||H|| dt ~ 5e-3 for phase accuracy well beyond leak_tol
        let steps = ((norm_h * t / 5e-3).ceil() as usize).max(2000);
        let result = propagate_with_energies(model, loop_, t, steps, true)?;
        let ex = extract_geometric_phase(&result, model, loop_, level, leak_tol)?;
        rows.push(SweepRow {
            total_time: t,
            geometric_phase: ex.geometric_phase,
            leakage: ex.leakage,
        });
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

/// Fix the eigenvector gauge: largest-magnitude component real positive.
pub fn gauge_fix(v: &CVector) -> CVector {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    let phase = v[idx] / cr(v[idx].norm());
    v * phase.conj()
}
